#include "stlab/detequiv.hpp"

#include <cmath>
#include <sstream>

#include "stlab/error.hpp"

namespace stlab::detequiv {

namespace {

void require_positive_spectrum(const Vector& eig) {
  numerics::require_finite(eig, "covariance eigenvalues");
  if (eig.minCoeff() <= 0.0) fail(ErrorCode::InvalidSpec, "covariance must be positive definite");
}

template <class Problem>
void validate_schedule(const Problem& pr, Eigen::Index p) {
  if (pr.K < 0) fail(ErrorCode::InvalidParams, "K must be nonnegative");
  const auto steps = static_cast<std::size_t>(pr.K) + 1;
  if (pr.lambdas.size() != steps || pr.sizes.size() != steps) {
    fail(ErrorCode::InvalidParams, "lambda and n schedules must have K+1 entries");
  }
  if (pr.cov.size() != 1 && pr.cov.size() != steps) {
    fail(ErrorCode::InvalidParams, "need one covariance or one per iteration");
  }
  if (pr.beta.size() != p) fail(ErrorCode::DimensionMismatch, "signal length differs from dimension");
  if (!(pr.sigma2 >= 0.0)) fail(ErrorCode::InvalidParams, "noise variance must be nonnegative");
  for (std::size_t t = 0; t < steps; ++t) {
    if (!(pr.lambdas[t] >= 0.0)) fail(ErrorCode::InvalidParams, "lambda must be nonnegative");
    if (pr.sizes[t] < 1) fail(ErrorCode::InvalidParams, "sample sizes must be positive");
  }
}

}  // namespace

double tau_equation(const Vector& eig, double tau, double lambda) {
  return (eig.array() / (eig.array() + tau)).mean() + lambda / tau;
}

double solve_tau(const Vector& eig, double rho, double lambda, double tol) {
  require_positive_spectrum(eig);
  if (!(lambda >= 0.0)) fail(ErrorCode::InvalidParams, "lambda must be nonnegative");
  if (!(rho > 0.0) || !std::isfinite(rho)) fail(ErrorCode::InvalidParams, "rho must be positive");
  if (lambda == 0.0 && rho <= 1.0) {
    std::ostringstream os;
    os << "no positive effective regularization for lambda = 0 and rho = " << rho;
    fail(ErrorCode::NoRoot, os.str());
  }
  const double target = 1.0 / rho;
  double lo = 1e-12;
  if (tau_equation(eig, lo, lambda) <= target) fail(ErrorCode::NoRoot, "root lies below the bracket floor");
  double hi = 1.0;
  for (int k = 0; tau_equation(eig, hi, lambda) >= target; ++k) {
    if (k > 1000) fail(ErrorCode::NonConvergence, "could not bracket the effective regularization");
    lo = hi;
    hi *= 2.0;
  }
  for (int step = 0; step < 500; ++step) {
    const double mid = 0.5 * (lo + hi);
    const double f = tau_equation(eig, mid, lambda);
    if (f > target) {
      lo = mid;
    } else {
      hi = mid;
    }
    if (hi - lo <= tol * hi) {
      const double tau = 0.5 * (lo + hi);
      if (std::abs(tau_equation(eig, tau, lambda) - target) < std::max(tol, 1e-10) * std::max(1.0, target)) {
        return tau;
      }
    }
  }
  fail(ErrorCode::NonConvergence, "bisection hit the 500 step cap");
}

double effective_denominator(const Vector& eig, double tau, double lambda) {
  const auto shifted = eig.array() + tau;
  return lambda / tau + tau * (eig.array() / shifted.square()).mean();
}

NoiseInit effective_noise_init(const Vector& eig, const Vector& beta, double sigma2, double tau0,
                               double lambda0) {
  if (beta.size() != eig.size()) fail(ErrorCode::DimensionMismatch, "signal length differs from spectrum");
  const double L = effective_denominator(eig, tau0, lambda0);
  if (!(L >= 1e-14)) fail(ErrorCode::DegenerateDenominator, "L_0 below 1e-14");
  const double energy = (beta.array().square() * eig.array() / (eig.array() + tau0).square()).sum();
  return {(sigma2 + tau0 * tau0 * energy) / L, L};
}

double realized_gamma2(const Vector& eig, const Vector& beta_prev, double tau, double lambda) {
  if (beta_prev.size() != eig.size()) fail(ErrorCode::DimensionMismatch, "estimate length differs from spectrum");
  const double L = effective_denominator(eig, tau, lambda);
  if (!(L >= 1e-14)) fail(ErrorCode::DegenerateDenominator, "L_t below 1e-14");
  const double energy = (beta_prev.array().square() * eig.array() / (eig.array() + tau).square()).sum();
  return tau * tau * energy / L;
}

// Diagonal path

DiagonalState::DiagonalState(const DiagonalProblem& problem, bool parallel)
    : problem_(problem), parallel_(parallel) {
  const Eigen::Index p = problem.beta.size();
  if (p < 1) fail(ErrorCode::DimensionMismatch, "empty signal");
  validate_schedule(problem, p);
  for (const auto& c : problem.cov) {
    if (c.size() != p) fail(ErrorCode::DimensionMismatch, "covariance spectrum length differs from dimension");
    require_positive_spectrum(c);
  }
  if (problem.test_cov.size() != p) fail(ErrorCode::DimensionMismatch, "test spectrum length differs");
  require_positive_spectrum(problem.test_cov);
  p_ = static_cast<double>(p);
  cum_.push_back(Vector::Ones(p));
}

const Vector& DiagonalState::cov_at(int t) const {
  return problem_.cov.size() == 1 ? problem_.cov[0] : problem_.cov[static_cast<std::size_t>(t)];
}

double DiagonalState::noise_step(const Vector& phi, const Vector& psi, double tau, double L) const {
  // cum_[h] holds Q_{t-1:h} here, so Q_{t:h+1} = phi * cum_[h+1].
  const int t = t_ + 1;
  const Vector kernel = (phi.array() * psi.array()).matrix();
  const auto& b = problem_.beta;
  const double signal = (b.array().square() * kernel.array() * cum_[0].array().square()).sum();

  // Q_{t-1:h} (Sigma_h + tau_h)^{-1} = Q_{t-1:h+1} Q_h (Sigma_h + tau_h)^{-1} = cum_[h+1] * weight_[h]
  std::vector<double> lag(static_cast<std::size_t>(t), 0.0);
#pragma omp parallel for if (parallel_) schedule(static)
  for (int h = 0; h < t; ++h) {
    const auto uh = static_cast<std::size_t>(h);
    lag[uh] = params_.D2[uh] / p_ *
              (kernel.array() * cum_[uh + 1].array().square() * weight_[uh].array()).sum();
  }
  double total = signal;
  for (double v : lag) total += v;
  return tau * tau * total / L;
}

int DiagonalState::advance() {
  if (t_ >= problem_.K) fail(ErrorCode::InvalidParams, "trajectory already complete");
  const int t = t_ + 1;
  const auto ut = static_cast<std::size_t>(t);
  const Vector& eig = cov_at(t);
  const double lambda = problem_.lambdas[ut];
  const double rho = p_ / static_cast<double>(problem_.sizes[ut]);
  const double tau = solve_tau(eig, rho, lambda);
  const double L = effective_denominator(eig, tau, lambda);
  if (!(L >= 1e-14)) fail(ErrorCode::DegenerateDenominator, "L_t below 1e-14");
  const Vector phi = (eig.array() / (eig.array() + tau)).matrix();
  const Vector psi = (eig.array() + tau).inverse().matrix();

  double d2 = 0.0;
  if (t == 0) {
    d2 = effective_noise_init(eig, problem_.beta, problem_.sigma2, tau, lambda).d2;
  } else {
    d2 = noise_step(phi, psi, tau, L);
  }

  params_.tau.push_back(tau);
  params_.L.push_back(L);
  params_.D2.push_back(d2);
  params_.rho.push_back(rho);
  params_.lambda.push_back(lambda);

#pragma omp parallel for if (parallel_) schedule(static)
  for (int h = 0; h <= t; ++h) cum_[static_cast<std::size_t>(h)].array() *= phi.array();
  cum_.push_back(Vector::Ones(phi.size()));
  weight_.push_back((phi.array() * psi.array()).matrix());
  t_ = t;
  return t;
}

std::pair<double, double> DiagonalState::det_risk() const {
  if (t_ < 0) fail(ErrorCode::InvalidParams, "no iteration computed yet");
  const auto& test = problem_.test_cov;
  const double bias =
      (problem_.beta.array().square() * (cum_[0].array() - 1.0).square() * test.array()).sum();
  std::vector<double> terms(static_cast<std::size_t>(t_) + 1, 0.0);
#pragma omp parallel for if (parallel_) schedule(static)
  for (int h = 0; h <= t_; ++h) {
    const auto uh = static_cast<std::size_t>(h);
    terms[uh] = params_.D2[uh] / p_ *
                (cum_[uh + 1].array().square() * test.array() * weight_[uh].array()).sum();
  }
  double var = 0.0;
  for (double v : terms) var += v;
  return {bias, var};
}

namespace {

DetRiskTrajectory run_diagonal(const DiagonalProblem& problem, bool parallel) {
  DiagonalState state(problem, parallel);
  DetRiskTrajectory out;
  for (int t = 0; t <= problem.K; ++t) {
    state.advance();
    const auto [b, v] = state.det_risk();
    out.bias.push_back(b);
    out.variance.push_back(v);
    out.risk.push_back(b + v);
  }
  out.params = state.params();
  return out;
}

}  // namespace

DetRiskTrajectory det_trajectory(const DiagonalProblem& problem) { return run_diagonal(problem, false); }

DetRiskTrajectory det_trajectory_parallel(const DiagonalProblem& problem) { return run_diagonal(problem, true); }

// Dense path

DenseProblem to_dense(const DiagonalProblem& problem) {
  DenseProblem out;
  for (const auto& c : problem.cov) out.cov.push_back(c.asDiagonal());
  out.test_cov = problem.test_cov.asDiagonal();
  out.beta = problem.beta;
  out.sigma2 = problem.sigma2;
  out.lambdas = problem.lambdas;
  out.sizes = problem.sizes;
  out.K = problem.K;
  return out;
}

DetRiskTrajectory det_trajectory(const DenseProblem& problem) {
  const Eigen::Index p = problem.beta.size();
  if (p < 1) fail(ErrorCode::DimensionMismatch, "empty signal");
  if (p > kDenseLimit) {
    std::ostringstream os;
    os << "dense deterministic path is limited to p <= " << kDenseLimit << " (got " << p << ")";
    fail(ErrorCode::InvalidParams, os.str());
  }
  validate_schedule(problem, p);
  if (problem.test_cov.rows() != p || problem.test_cov.cols() != p) {
    fail(ErrorCode::DimensionMismatch, "test covariance has the wrong shape");
  }
  std::vector<numerics::SymEigen> eig;
  for (const auto& c : problem.cov) {
    if (c.rows() != p || c.cols() != p) fail(ErrorCode::DimensionMismatch, "covariance has the wrong shape");
    eig.push_back(numerics::sym_eigendecomposition(c));
    require_positive_spectrum(eig.back().values);
  }
  const double pd = static_cast<double>(p);
  const Matrix& test = problem.test_cov;
  const Vector& beta = problem.beta;

  DetRiskTrajectory out;
  std::vector<Matrix> cum{Matrix::Identity(p, p)};  // cum[h] = Q_{t-1:h} before the update, Q_{t:h} after
  std::vector<Matrix> weight;  // Q_h (Sigma_h + tau_h)^{-1}
  for (int t = 0; t <= problem.K; ++t) {
    const auto ut = static_cast<std::size_t>(t);
    const auto& e = eig.size() == 1 ? eig[0] : eig[ut];
    const double lambda = problem.lambdas[ut];
    const double rho = pd / static_cast<double>(problem.sizes[ut]);
    const double tau = solve_tau(e.values, rho, lambda);
    const double L = effective_denominator(e.values, tau, lambda);
    if (!(L >= 1e-14)) fail(ErrorCode::DegenerateDenominator, "L_t below 1e-14");
    const Vector phi = (e.values.array() / (e.values.array() + tau)).matrix();
    const Vector psi = (e.values.array() + tau).inverse().matrix();
    const Matrix q = e.vectors * phi.asDiagonal() * e.vectors.transpose();
    const Matrix res = e.vectors * psi.asDiagonal() * e.vectors.transpose();

    double d2 = 0.0;
    if (t == 0) {
      d2 = effective_noise_init(e.values, e.vectors.transpose() * beta, problem.sigma2, tau, lambda).d2;
    } else {
      const Matrix kernel = q.transpose() * res;  // Q_t^T (Sigma_t + tau_t)^{-1}
      const Vector prev = cum[0] * beta;
      double total = prev.dot(kernel * prev);
      for (int h = 0; h < t; ++h) {
        const auto uh = static_cast<std::size_t>(h);
        const Matrix& inner = cum[uh + 1];
        total += out.params.D2[uh] / pd * (inner.transpose() * kernel * inner * weight[uh]).trace();
      }
      d2 = tau * tau * total / L;
    }
    out.params.tau.push_back(tau);
    out.params.L.push_back(L);
    out.params.D2.push_back(d2);
    out.params.rho.push_back(rho);
    out.params.lambda.push_back(lambda);

    for (auto& m : cum) m = q * m;
    cum.push_back(Matrix::Identity(p, p));
    weight.push_back(e.vectors * (phi.array() * psi.array()).matrix().asDiagonal() * e.vectors.transpose());

    const Vector drift = cum[0] * beta - beta;
    const double bias = drift.dot(test * drift);
    double var = 0.0;
    for (int h = 0; h <= t; ++h) {
      const auto uh = static_cast<std::size_t>(h);
      const Matrix& prop = cum[uh + 1];
      var += out.params.D2[uh] / pd * (prop.transpose() * test * prop * weight[uh]).trace();
    }
    out.bias.push_back(bias);
    out.variance.push_back(var);
    out.risk.push_back(bias + var);
  }
  return out;
}

}  // namespace stlab::detequiv
