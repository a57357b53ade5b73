#include "stlab/igcv.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "stlab/error.hpp"

namespace stlab::igcv {

namespace {

void check_inputs(const Matrix& x0, const Vector& y0, const Matrix& A) {
  numerics::require_finite(x0, "X0");
  numerics::require_finite(y0, "Y0");
  if (y0.size() != x0.rows()) fail(ErrorCode::DimensionMismatch, "Y0 length differs from X0 rows");
  if (A.rows() != x0.cols() || A.cols() != x0.cols()) {
    fail(ErrorCode::DimensionMismatch, "A_t must be p x p");
  }
}

Matrix gram(const Matrix& x0) { return x0 * x0.transpose() / static_cast<double>(x0.rows()); }

// Inverse of G + lambda I through its eigendecomposition. Throws RankDeficient
// when lambda = 0 and G is numerically singular.
Matrix shifted_inverse(const Matrix& g, double lambda) {
  Eigen::SelfAdjointEigenSolver<Matrix> solver(g);
  if (solver.info() != Eigen::Success) fail(ErrorCode::NumericalFailure, "Gram eigensolver did not converge");
  const Vector& w = solver.eigenvalues();
  const double floor = std::numeric_limits<double>::epsilon() * static_cast<double>(g.rows()) *
                       std::max(w.maxCoeff(), 0.0);
  if (lambda == 0.0 && !(w.minCoeff() > floor)) {
    fail(ErrorCode::RankDeficient, "X0 X0^T is numerically singular; the ridgeless iGCV needs p > n0");
  }
  const Vector inv = (w.array().cwiseMax(0.0) + lambda).inverse().matrix();
  const Matrix& v = solver.eigenvectors();
  return v * inv.asDiagonal() * v.transpose();
}

}  // namespace

double leverage_multiplier(const GcvInputs& in) {
  check_inputs(in.x0, in.y0, in.A);
  if (!(in.lambda > 0.0)) fail(ErrorCode::InvalidParams, "leverage multiplier needs lambda > 0");
  const double n = static_cast<double>(in.x0.rows());
  const Matrix w = shifted_inverse(gram(in.x0), in.lambda);
  // S^{-1} X0^T = X0^T (G + lambda)^{-1}
  const Matrix c = in.x0.transpose() * w;
  const double num = (in.x0 * in.A * c).trace() / (n * n);
  const double den = 1.0 - (in.x0 * c).trace() / (n * n);
  if (den < 1e-12) fail(ErrorCode::DegenerateDenominator, "1 - tr(H)/n0 below 1e-12; use the ridgeless form");
  return num / den;
}

double igcv_estimate(const GcvInputs& in) {
  const double m = leverage_multiplier(in);
  if (in.beta0.size() != in.x0.cols()) fail(ErrorCode::DimensionMismatch, "beta0 length differs from p");
  const Vector fitted_t = in.x0 * (in.A * in.beta0);
  const Vector resid0 = in.y0 - in.x0 * in.beta0;
  const Vector corrected = in.y0 - fitted_t + m * resid0;
  return corrected.squaredNorm() / static_cast<double>(in.x0.rows());
}

double igcv_ridgeless(const Matrix& x0, const Vector& y0, const Matrix& A) {
  check_inputs(x0, y0, A);
  const double n = static_cast<double>(x0.rows());
  const Matrix ginv = shifted_inverse(gram(x0), 0.0);
  const Vector gy = ginv * y0;
  const Vector beta0 = x0.transpose() * gy / n;  // minimum-norm interpolator
  // pinv(X0^T X0/n0) X0^T = X0^T G^{-1}
  const double num = (x0 * A * x0.transpose() * ginv).trace();
  const double scale = num / (n * ginv.trace());
  const Vector corrected = y0 - x0 * (A * beta0) + scale * gy;
  return corrected.squaredNorm() / n;
}

GcvContext::GcvContext(const Matrix& x0, const Vector& y0, double lambda)
    : x0_(x0), y0_(y0), lambda_(lambda) {
  numerics::require_finite(x0, "X0");
  numerics::require_finite(y0, "Y0");
  if (y0.size() != x0.rows()) fail(ErrorCode::DimensionMismatch, "Y0 length differs from X0 rows");
  if (!(lambda >= 0.0)) fail(ErrorCode::InvalidParams, "lambda must be nonnegative");
  const double n = static_cast<double>(x0.rows());
  if (lambda == 0.0 && x0.cols() < x0.rows()) {
    // Tall ridgeless fit: least squares with leverage p/n0.
    probe_ = numerics::pseudoinverse(x0);
    beta0_ = probe_ * y0;
    weighted_ = y0 - x0 * beta0_;
    const double den = 1.0 - (x0 * probe_).trace() / n;
    if (den < 1e-12) fail(ErrorCode::DegenerateDenominator, "1 - tr(H)/n0 below 1e-12");
    trace_w_ = n * den;
    return;
  }
  const Matrix w = shifted_inverse(gram(x0), lambda);
  weighted_ = w * y0;
  trace_w_ = w.trace();
  probe_ = x0.transpose() * w / n;
  beta0_ = probe_ * y0;
}

double GcvContext::value(const Vector& beta_t, const Matrix& tracked_probe) const {
  if (beta_t.size() != x0_.cols() || tracked_probe.rows() != x0_.cols() || tracked_probe.cols() != x0_.rows()) {
    fail(ErrorCode::DimensionMismatch, "trajectory state does not match X0");
  }
  const double scale = (x0_ * tracked_probe).trace() / trace_w_;
  const Vector corrected = y0_ - x0_ * beta_t + scale * weighted_;
  return corrected.squaredNorm() / static_cast<double>(x0_.rows());
}

double GcvContext::value(const Matrix& A) const {
  if (A.rows() != x0_.cols() || A.cols() != x0_.cols()) fail(ErrorCode::DimensionMismatch, "A_t must be p x p");
  return value(A * beta0_, A * probe_);
}

std::vector<double> default_lambda_grid(int count) {
  std::vector<double> grid{0.0};
  for (int i = 0; i < count; ++i) {
    const double e = count == 1 ? 0.0 : -6.0 + 6.0 * i / (count - 1);
    grid.push_back(std::pow(10.0, e));
  }
  return grid;
}

GcvProfile igcv_profile(const model::Dataset& data, const model::GaussianDesign& design,
                        const selftrain::FitConfig& fit, std::span<const double> lambda_grid,
                        const numerics::RngHandle& rng) {
  if (lambda_grid.empty()) fail(ErrorCode::InvalidParams, "lambda grid is empty");
  if (fit.K < 1) fail(ErrorCode::InvalidParams, "profile needs K >= 1");
  GcvProfile out;
  out.lambdas.assign(lambda_grid.begin(), lambda_grid.end());
  out.values.resize(lambda_grid.size());

#pragma omp parallel for schedule(dynamic)
  for (std::size_t i = 0; i < lambda_grid.size(); ++i) {
    const double lambda = lambda_grid[i];
    const GcvContext ctx(data.features, data.labels, lambda);
    auto schedule = fit;
    schedule.lambdas.assign(static_cast<std::size_t>(fit.K) + 1, lambda);
    selftrain::TrajectoryOptions opts;
    opts.keep_operators = false;
    opts.track = &ctx.probe();
    const auto traj = selftrain::self_train_trajectory(
        data, std::span<const model::GaussianDesign>(&design, 1), schedule, rng, opts);
    auto& row = out.values[i];
    for (int t = 0; t <= fit.K; ++t) {
      const auto ut = static_cast<std::size_t>(t);
      row.push_back(ctx.value(traj.estimates[ut], traj.tracked[ut]));
    }
  }

  std::vector<std::size_t> order(lambda_grid.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return lambda_grid[a] < lambda_grid[b]; });
  out.best_value = std::numeric_limits<double>::infinity();
  for (int t = 0; t <= fit.K; ++t) {
    for (std::size_t i : order) {
      const double v = out.values[i][static_cast<std::size_t>(t)];
      if (v < out.best_value) {
        out.best_t = static_cast<std::size_t>(t);
        out.best_lambda = lambda_grid[i];
        out.best_value = v;
      }
    }
  }
  return out;
}

}  // namespace stlab::igcv
