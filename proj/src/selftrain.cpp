#include "stlab/selftrain.hpp"

#include <algorithm>
#include <sstream>

#include "stlab/error.hpp"

namespace stlab::selftrain {

FitConfig FitConfig::uniform(double lambda, Eigen::Index n, int K) {
  FitConfig fit;
  fit.K = K;
  fit.lambdas.assign(static_cast<std::size_t>(K) + 1, lambda);
  fit.sizes.assign(static_cast<std::size_t>(K) + 1, n);
  return fit;
}

void FitConfig::validate() const {
  if (K < 0) fail(ErrorCode::InvalidParams, "iteration count K must be nonnegative");
  const auto expected = static_cast<std::size_t>(K) + 1;
  if (lambdas.size() != expected || sizes.size() != expected) {
    std::ostringstream os;
    os << "schedules must have K+1 = " << expected << " entries (got " << lambdas.size() << " lambdas, "
       << sizes.size() << " sizes)";
    fail(ErrorCode::InvalidParams, os.str());
  }
  for (std::size_t t = 0; t < expected; ++t) {
    if (!(lambdas[t] >= 0.0) || !std::isfinite(lambdas[t])) {
      fail(ErrorCode::InvalidParams, "lambda_" + std::to_string(t) + " must be finite and >= 0");
    }
    if (sizes[t] < 1) fail(ErrorCode::InvalidParams, "n_" + std::to_string(t) + " must be >= 1");
  }
}

RidgePath::RidgePath(const Matrix& x, const Vector& y) : x_(x), n_(x.rows()) {
  numerics::require_finite(x, "design");
  numerics::require_finite(y, "response");
  if (y.size() != x.rows()) fail(ErrorCode::DimensionMismatch, "response length differs from design rows");
  wide_ = x.cols() > x.rows();
  Matrix gram = wide_ ? Matrix(x * x.transpose()) : Matrix(x.transpose() * x);
  Eigen::SelfAdjointEigenSolver<Matrix> solver(gram);
  if (solver.info() != Eigen::Success) fail(ErrorCode::NumericalFailure, "Gram eigensolver did not converge");
  gram_eigs_ = solver.eigenvalues().cwiseMax(0.0);
  basis_ = solver.eigenvectors();
  projected_ = wide_ ? Vector(basis_.transpose() * y) : Vector(basis_.transpose() * (x.transpose() * y));
  cutoff_ = numerics::default_pinv_tolerance(x.rows(), x.cols());
}

Vector RidgePath::fit(double lambda) const {
  if (!(lambda >= 0.0)) fail(ErrorCode::InvalidParams, "ridge penalty must be nonnegative");
  const double shift = static_cast<double>(n_) * lambda;
  const double top = gram_eigs_.maxCoeff() + shift;
  Vector coef(gram_eigs_.size());
  for (Eigen::Index i = 0; i < gram_eigs_.size(); ++i) {
    const double d = gram_eigs_(i) + shift;
    coef(i) = d > cutoff_ * top ? projected_(i) / d : 0.0;
  }
  Vector z = basis_ * coef;
  if (wide_) return x_.transpose() * z;
  return z;
}

Vector ridge_fit(const Matrix& x, const Vector& y, double lambda) { return RidgePath(x, y).fit(lambda); }

UpdateOperator::UpdateOperator(Matrix x, double lambda) : x_(std::move(x)), lambda_(lambda) {
  numerics::require_finite(x_, "design");
  if (!(lambda >= 0.0)) fail(ErrorCode::InvalidParams, "ridge penalty must be nonnegative");
  const auto n = x_.rows();
  const auto p = x_.cols();
  const double tol = numerics::default_pinv_tolerance(n, p);
  const double shift = static_cast<double>(n) * lambda;
  wide_ = p > n;
  if (wide_) {
    Matrix gram = x_ * x_.transpose();
    gram.diagonal().array() += shift;
    core_ = numerics::sym_pseudoinverse(gram, tol);
  } else {
    const Matrix xtx = x_.transpose() * x_;
    Matrix shifted = xtx;
    shifted.diagonal().array() += shift;
    core_ = numerics::sym_pseudoinverse(shifted, tol) * xtx;
  }
}

Vector UpdateOperator::apply(const Vector& v) const {
  if (v.size() != dim()) fail(ErrorCode::DimensionMismatch, "vector length differs from operator dimension");
  if (wide_) return x_.transpose() * (core_ * (x_ * v));
  return core_ * v;
}

Matrix UpdateOperator::apply(const Matrix& block) const {
  if (block.rows() != dim()) fail(ErrorCode::DimensionMismatch, "block rows differ from operator dimension");
  if (wide_) {
    const Matrix xb = x_ * block;
    const Matrix mid = core_ * xb;
    return x_.transpose() * mid;
  }
  return core_ * block;
}

Matrix UpdateOperator::dense() const {
  if (wide_) return x_.transpose() * core_ * x_;
  return core_;
}

Matrix update_operator(const Matrix& x, double lambda) { return UpdateOperator(x, lambda).dense(); }

Trajectory self_train_trajectory(const model::Dataset& data,
                                 std::span<const model::GaussianDesign> designs,
                                 const FitConfig& fit, const numerics::RngHandle& rng,
                                 const TrajectoryOptions& options) {
  fit.validate();
  const Eigen::Index p = data.features.cols();
  if (data.features.rows() != fit.sizes[0]) {
    fail(ErrorCode::InvalidParams, "n_0 differs from the number of training rows");
  }
  if (data.labels.size() != data.features.rows()) {
    fail(ErrorCode::DimensionMismatch, "labels length differs from training rows");
  }
  if (designs.empty() || (designs.size() != 1 && designs.size() != static_cast<std::size_t>(fit.K))) {
    fail(ErrorCode::InvalidParams, "need one shared design or one design per iteration");
  }
  for (const auto& d : designs) {
    if (d.dim() != p) fail(ErrorCode::DimensionMismatch, "design dimension differs from feature count");
  }
  if (options.track != nullptr && options.track->rows() != p) {
    fail(ErrorCode::DimensionMismatch, "tracked block rows differ from feature count");
  }

  Trajectory traj;
  traj.fit = fit;
  traj.estimates.reserve(static_cast<std::size_t>(fit.K) + 1);
  traj.estimates.push_back(ridge_fit(data.features, data.labels, fit.lambdas[0]));
  if (options.keep_operators) traj.cumulative_operators.push_back(Matrix::Identity(p, p));
  if (options.track != nullptr) traj.tracked.push_back(*options.track);

  for (int t = 1; t <= fit.K; ++t) {
    const auto& design = designs.size() == 1 ? designs[0] : designs[static_cast<std::size_t>(t) - 1];
    auto engine = rng.with_stream(static_cast<std::uint64_t>(t)).engine();
    const UpdateOperator op(design.sample(fit.sizes[static_cast<std::size_t>(t)], engine),
                            fit.lambdas[static_cast<std::size_t>(t)]);
    traj.estimates.push_back(op.apply(traj.estimates.back()));
    if (options.keep_operators) traj.cumulative_operators.push_back(op.apply(traj.cumulative_operators.back()));
    if (options.track != nullptr) traj.tracked.push_back(op.apply(traj.tracked.back()));
  }
  return traj;
}

Trajectory self_train_trajectory(const model::Dataset& data, const Matrix& cov, const FitConfig& fit,
                                 const numerics::RngHandle& rng, const TrajectoryOptions& options) {
  const model::GaussianDesign design(cov);
  return self_train_trajectory(data, std::span<const model::GaussianDesign>(&design, 1), fit, rng, options);
}

double prediction_risk(const Vector& beta_hat, const Vector& beta, const Matrix& cov) {
  if (beta_hat.size() != beta.size() || cov.rows() != beta.size() || cov.cols() != beta.size()) {
    fail(ErrorCode::DimensionMismatch, "risk operands have inconsistent dimensions");
  }
  const Vector d = beta_hat - beta;
  return std::max(0.0, d.dot(cov * d));
}

double prediction_risk_diag(const Vector& beta_hat, const Vector& beta, const Vector& cov_diag) {
  if (beta_hat.size() != beta.size() || cov_diag.size() != beta.size()) {
    fail(ErrorCode::DimensionMismatch, "risk operands have inconsistent dimensions");
  }
  const Vector d = beta_hat - beta;
  return (d.array().square() * cov_diag.array()).sum();
}

double mc_test_mse(const Matrix& x_test, const Vector& beta_hat, const Vector& beta) {
  if (beta_hat.size() != beta.size() || x_test.cols() != beta.size()) {
    fail(ErrorCode::DimensionMismatch, "test design and coefficients have inconsistent dimensions");
  }
  if (x_test.rows() < 1) fail(ErrorCode::DimensionMismatch, "test set is empty");
  const Vector err = x_test * (beta_hat - beta);
  return err.squaredNorm() / static_cast<double>(x_test.rows());
}

double mc_test_mse(const Vector& beta_hat, const Vector& beta, const Matrix& cov, Eigen::Index n_test,
                   const numerics::RngHandle& rng) {
  if (cov.rows() != beta.size()) fail(ErrorCode::DimensionMismatch, "covariance and signal differ in size");
  if (n_test < 1) fail(ErrorCode::DimensionMismatch, "n_test must be positive");
  return mc_test_mse(model::generate_fresh_features(cov, n_test, rng), beta_hat, beta);
}

std::vector<double> ridge_risk_curve(const model::Dataset& data, const Vector& beta, const Matrix& cov,
                                     std::span<const double> lambda_grid) {
  const RidgePath path(data.features, data.labels);
  std::vector<double> risks;
  risks.reserve(lambda_grid.size());
  for (double lambda : lambda_grid) risks.push_back(prediction_risk(path.fit(lambda), beta, cov));
  return risks;
}

RidgeSearch optimal_ridge_risk(const Matrix& cov, const Vector& beta, Eigen::Index n, double noise_variance,
                               std::span<const double> lambda_grid, int trials,
                               const numerics::RngHandle& rng) {
  if (lambda_grid.empty()) fail(ErrorCode::InvalidParams, "ridge grid is empty");
  if (trials < 1) fail(ErrorCode::InvalidParams, "trials must be positive");
  const model::GaussianDesign design(cov);
  RidgeSearch out;
  out.mean_risk.assign(lambda_grid.size(), 0.0);
  for (int j = 0; j < trials; ++j) {
    const auto data = model::generate_initial_data(design, beta, n, noise_variance,
                                                   rng.with_stream(rng.stream_id + static_cast<std::uint64_t>(j)));
    const auto curve = ridge_risk_curve(data, beta, cov, lambda_grid);
    for (std::size_t i = 0; i < curve.size(); ++i) out.mean_risk[i] += curve[i] / trials;
  }
  std::size_t best = 0;
  for (std::size_t i = 1; i < lambda_grid.size(); ++i) {
    const double a = out.mean_risk[i];
    const double b = out.mean_risk[best];
    if (a < b || (a == b && lambda_grid[i] < lambda_grid[best])) best = i;
  }
  out.best_lambda = lambda_grid[best];
  out.best_mean_risk = out.mean_risk[best];
  return out;
}

}  // namespace stlab::selftrain
