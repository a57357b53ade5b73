#pragma once

#include <utility>
#include <vector>

#include "stlab/numerics.hpp"

namespace stlab::detequiv {

/// f(tau) = (1/p) sum_j l_j/(l_j + tau) + lambda/tau. Strictly decreasing in tau.
double tau_equation(const Vector& cov_eigenvalues, double tau, double lambda);

/// Positive root of f(tau) = 1/rho by bisection. tol is relative, on both the
/// bracket width and the residual.
double solve_tau(const Vector& cov_eigenvalues, double rho, double lambda, double tol = 1e-12);

/// lambda/tau + (tau/p) sum_j l_j/(l_j + tau)^2.
double effective_denominator(const Vector& cov_eigenvalues, double tau, double lambda);

struct NoiseInit {
  double d2 = 0.0;  // D_0^2 = gamma_0^2
  double L = 0.0;
};

/// The t = 0 effective noise. `beta` is expressed in the eigenbasis of the
/// covariance, entry j paired with eigenvalue j.
NoiseInit effective_noise_init(const Vector& cov_eigenvalues, const Vector& beta, double sigma2, double tau0,
                               double lambda0);

/// Effective parameters per iteration.
struct EffectiveParams {
  std::vector<double> tau;
  std::vector<double> L;
  std::vector<double> D2;
  std::vector<double> rho;
  std::vector<double> lambda;
};

struct DetRiskTrajectory {
  std::vector<double> bias;      // systematic term
  std::vector<double> variance;  // stochastic term
  std::vector<double> risk;
  EffectiveParams params;
};

/// Covariances that are all diagonal in one basis. Vectors hold the
/// eigenvalues of Sigma_t (one entry, or one per t = 0..K) and of the test
/// covariance, coordinate-aligned with `beta`.
struct DiagonalProblem {
  std::vector<Vector> cov;
  Vector test_cov;
  Vector beta;
  double sigma2 = 0.0;
  std::vector<double> lambdas;         // lambda_0..lambda_K
  std::vector<Eigen::Index> sizes;     // n_0..n_K
  int K = 0;
};

struct DenseProblem {
  std::vector<Matrix> cov;  // one entry, or one per t = 0..K
  Matrix test_cov;
  Vector beta;
  double sigma2 = 0.0;
  std::vector<double> lambdas;
  std::vector<Eigen::Index> sizes;
  int K = 0;
};

/// Largest dimension accepted by the dense path.
inline constexpr Eigen::Index kDenseLimit = 500;

/// Scalar filter recursion on the shared eigenbasis, O(p K^2). The parallel
/// variant splits the per-lag trace sums across threads; every sum is still
/// accumulated in the serial order, so both give bit-identical output.
DetRiskTrajectory det_trajectory(const DiagonalProblem& problem);
DetRiskTrajectory det_trajectory_parallel(const DiagonalProblem& problem);

/// Dense propagators, O(p^3 K^2). Requires p <= kDenseLimit.
DetRiskTrajectory det_trajectory(const DenseProblem& problem);

/// Embeds a diagonal problem in the dense representation.
DenseProblem to_dense(const DiagonalProblem& problem);

/// Filter state carried through the diagonal recursion, exposed so the noise
/// step and the risk can be evaluated one iteration at a time.
class DiagonalState {
 public:
  explicit DiagonalState(const DiagonalProblem& problem, bool parallel = false);

  /// Solves tau_t, runs the D_t^2 recursion and updates the propagators. Returns t.
  int advance();
  /// (systematic, stochastic) at the current t.
  std::pair<double, double> det_risk() const;

  const EffectiveParams& params() const { return params_; }
  int current() const { return t_; }

 private:
  const Vector& cov_at(int t) const;
  double noise_step(const Vector& phi, const Vector& psi, double tau, double L) const;

  const DiagonalProblem& problem_;
  bool parallel_;
  int t_ = -1;
  EffectiveParams params_;
  double p_ = 0.0;
  std::vector<Vector> cum_;     // cum_[h] = Q_{t:h}, with cum_[t+1] = 1
  std::vector<Vector> weight_;  // Q_h (Sigma_h + tau_h)^{-1}
};

/// gamma_t^2 evaluated at a realized estimate beta_hat_{t-1} (t >= 1), on the
/// shared eigenbasis.
double realized_gamma2(const Vector& cov_eigenvalues, const Vector& beta_prev, double tau, double lambda);

}  // namespace stlab::detequiv
