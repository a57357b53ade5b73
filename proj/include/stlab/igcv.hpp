#pragma once

#include <span>
#include <vector>

#include "stlab/model.hpp"
#include "stlab/numerics.hpp"
#include "stlab/selftrain.hpp"

namespace stlab::igcv {

struct GcvInputs {
  const Matrix& x0;     // n0 x p
  const Vector& y0;
  const Vector& beta0;  // ridge fit on (x0, y0) at lambda
  const Matrix& A;      // cumulative update operator A_t
  double lambda = 0.0;
};

/// M_t(lambda) = [tr(X0 A S^{-1} X0^T)/n0^2] / [1 - tr(X0 S^{-1} X0^T)/n0^2]
/// with S = X0^T X0/n0 + lambda I. Needs lambda > 0.
double leverage_multiplier(const GcvInputs& in);

/// (1/n0) sum_i [y_i - x_i^T A beta0 + (y_i - x_i^T beta0) M_t]^2.
double igcv_estimate(const GcvInputs& in);

/// The lambda -> 0+ limit for p > n0, using the minimum-norm interpolator.
double igcv_ridgeless(const Matrix& x0, const Vector& y0, const Matrix& A);

/// Per-dataset quantities shared by every t at one lambda. With
/// W = (G + lambda I)^{-1}, G = X0 X0^T/n0, the corrected residual is
///   y - X0 A beta0 + (W y) * tr(X0 A C0) / tr(W),   C0 = X0^T W / n0,
/// which equals the leverage form for lambda > 0 and its limit at lambda = 0.
/// A_t C0 can be carried along a trajectory instead of A_t itself. For
/// lambda = 0 with p < n0, G is singular and the classical form is used:
/// C0 = X0^+, residual y - X0 beta0 and denominator n0 - rank(X0).
class GcvContext {
 public:
  GcvContext(const Matrix& x0, const Vector& y0, double lambda);

  const Vector& beta0() const { return beta0_; }
  /// p x n0 block C0 to push through the update operators.
  const Matrix& probe() const { return probe_; }
  double lambda() const { return lambda_; }

  /// iGCV at step t from beta_hat_t = A_t beta0 and A_t C0.
  double value(const Vector& beta_t, const Matrix& tracked_probe) const;
  /// iGCV at step t from the dense A_t.
  double value(const Matrix& A) const;

 private:
  Matrix x0_;
  Vector y0_;
  double lambda_;
  Vector beta0_;
  Vector weighted_;  // W y, or the least-squares residual when tall and ridgeless
  double trace_w_ = 0.0;
  Matrix probe_;
};

struct GcvProfile {
  std::vector<double> lambdas;
  std::vector<std::vector<double>> values;  // values[i][t] for lambdas[i]
  std::size_t best_t = 0;
  double best_lambda = 0.0;
  double best_value = 0.0;
};

/// iGCV over a lambda grid and t = 0..fit.K. Each grid value is used at every
/// iteration; fresh designs come from the same streams of `rng` for every
/// lambda. The minimizer prefers smaller t, then smaller lambda, on ties.
GcvProfile igcv_profile(const model::Dataset& data, const model::GaussianDesign& design,
                        const selftrain::FitConfig& fit, std::span<const double> lambda_grid,
                        const numerics::RngHandle& rng);

/// {0} together with `count` log-spaced points in [1e-6, 1].
std::vector<double> default_lambda_grid(int count = 20);

}  // namespace stlab::igcv
