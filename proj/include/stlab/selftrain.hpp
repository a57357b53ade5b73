#pragma once

#include <span>
#include <vector>

#include "stlab/model.hpp"
#include "stlab/numerics.hpp"

namespace stlab::selftrain {

/// Regularization and sample-size schedules for iterations 0..K.
struct FitConfig {
  std::vector<double> lambdas;       // lambda_0..lambda_K, all >= 0
  std::vector<Eigen::Index> sizes;   // n_0..n_K, all >= 1
  int K = 0;

  static FitConfig uniform(double lambda, Eigen::Index n, int K);
  void validate() const;
};

/// Ridge path of a fixed design: one eigendecomposition of the smaller Gram
/// matrix serves every lambda. Zero lambda gives the minimum-norm
/// least-squares solution through the pseudoinverse of the Gram matrix.
class RidgePath {
 public:
  RidgePath(const Matrix& x, const Vector& y);

  Vector fit(double lambda) const;
  Eigen::Index samples() const { return n_; }

 private:
  Matrix x_;
  bool wide_ = false;  // p > n: work with the n x n Gram XX^T
  Matrix basis_;       // eigenvectors of the Gram matrix
  Vector gram_eigs_;
  Vector projected_;   // basis^T y (wide) or basis^T X^T y (tall)
  Eigen::Index n_ = 0;
  double cutoff_ = 0.0;
};

/// Minimizer of (1/2n)||Y - Xb||^2 + (lambda/2)||b||^2; lambda = 0 gives the
/// minimum-norm least-squares solution.
Vector ridge_fit(const Matrix& x, const Vector& y, double lambda);

/// The self-training update b -> (X^T X + n lambda I)^+ X^T X b, held in
/// factored form. For lambda = 0 it is the projection onto the row space of X.
class UpdateOperator {
 public:
  UpdateOperator(Matrix x, double lambda);

  Vector apply(const Vector& v) const;
  Matrix apply(const Matrix& block) const;
  Matrix dense() const;

  double lambda() const { return lambda_; }
  Eigen::Index dim() const { return x_.cols(); }
  const Matrix& features() const { return x_; }

 private:
  Matrix x_;
  double lambda_ = 0.0;
  bool wide_ = false;
  Matrix core_;  // (XX^T + n lambda I)^+ when wide, the dense p x p operator otherwise
};

Matrix update_operator(const Matrix& x, double lambda);

struct TrajectoryOptions {
  /// Materialize A_t = P_t ... P_1 as dense p x p matrices (A_0 = I).
  bool keep_operators = true;
  /// When set, tracked[t] = A_t * (*track) is accumulated for t = 0..K.
  const Matrix* track = nullptr;
};

struct Trajectory {
  std::vector<Vector> estimates;             // beta_hat_0..beta_hat_K
  std::vector<Matrix> cumulative_operators;  // A_0..A_K when kept
  std::vector<Matrix> tracked;               // A_t * track when requested
  FitConfig fit;
};

/// Iterative self-training. beta_hat_0 is the ridge(less) fit on the data; at
/// step t >= 1 a fresh design X_t is drawn from stream t of `rng` and the
/// estimate is refit on the noiseless pseudo-labels X_t beta_hat_{t-1}.
/// `designs` holds either one design shared by every step or one per step t = 1..K.
Trajectory self_train_trajectory(const model::Dataset& data,
                                 std::span<const model::GaussianDesign> designs,
                                 const FitConfig& fit, const numerics::RngHandle& rng,
                                 const TrajectoryOptions& options = {});
Trajectory self_train_trajectory(const model::Dataset& data, const Matrix& cov, const FitConfig& fit,
                                 const numerics::RngHandle& rng, const TrajectoryOptions& options = {});

/// (beta_hat - beta)^T Sigma (beta_hat - beta).
double prediction_risk(const Vector& beta_hat, const Vector& beta, const Matrix& cov);
/// Same quadratic form for a diagonal covariance given by its diagonal.
double prediction_risk_diag(const Vector& beta_hat, const Vector& beta, const Vector& cov_diag);

/// Empirical test MSE on n_test fresh noiseless draws.
double mc_test_mse(const Vector& beta_hat, const Vector& beta, const Matrix& cov, Eigen::Index n_test,
                   const numerics::RngHandle& rng);
/// Empirical test MSE on a fixed test design.
double mc_test_mse(const Matrix& x_test, const Vector& beta_hat, const Vector& beta);

/// Exact prediction risk of ridge on `data` at every lambda in the grid.
std::vector<double> ridge_risk_curve(const model::Dataset& data, const Vector& beta, const Matrix& cov,
                                     std::span<const double> lambda_grid);

struct RidgeSearch {
  double best_lambda = 0.0;
  double best_mean_risk = 0.0;
  std::vector<double> mean_risk;  // aligned with the grid
};

/// Grid search for the best ridge penalty averaged over `trials` fresh
/// datasets. Trial j draws from stream rng.stream_id + j. Exact ties go to the
/// smaller lambda.
RidgeSearch optimal_ridge_risk(const Matrix& cov, const Vector& beta, Eigen::Index n, double noise_variance,
                               std::span<const double> lambda_grid, int trials,
                               const numerics::RngHandle& rng);

}  // namespace stlab::selftrain
