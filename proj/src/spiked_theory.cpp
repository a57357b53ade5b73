#include "stlab/spiked_theory.hpp"

#include <cmath>
#include <sstream>

#include "stlab/error.hpp"

namespace stlab::spiked {

namespace {

void require_rho(double rho) {
  if (!(rho > 1.0) || !std::isfinite(rho)) {
    std::ostringstream os;
    os << "aspect ratio rho must exceed 1 (got " << rho << ")";
    fail(ErrorCode::InvalidParams, os.str());
  }
}

void require_K(int K) {
  if (K < 0) fail(ErrorCode::InvalidParams, "K must be nonnegative");
}

TheoryTrajectory sized(int K) {
  const auto n = static_cast<std::size_t>(K) + 1;
  return {std::vector<double>(n, 0.0), std::vector<double>(n, 0.0), std::vector<double>(n, 0.0)};
}

}  // namespace

void SpikedParams::validate() const {
  require_rho(rho);
  if (!(sigma2 >= 0.0)) fail(ErrorCode::InvalidParams, "noise variance must be nonnegative");
  if (spikes.empty()) fail(ErrorCode::InvalidParams, "at least one spike is required");
  for (std::size_t j = 0; j < spikes.size(); ++j) {
    if (!(spikes[j].s > 1.0) || !std::isfinite(spikes[j].s)) {
      fail(ErrorCode::InvalidParams, "spike strength must exceed 1");
    }
    if (!std::isfinite(spikes[j].r)) fail(ErrorCode::InvalidParams, "spike coefficient must be finite");
    if (j > 0 && spikes[j].s > spikes[j - 1].s) {
      fail(ErrorCode::InvalidParams, "spike strengths must be sorted descending");
    }
  }
}

TheoryTrajectory spiked_trajectory(const SpikedParams& params, int K) {
  if (params.spikes.size() != 1) fail(ErrorCode::InvalidParams, "spiked_trajectory takes exactly one spike");
  return multispike_trajectory(params, K);
}

TheoryTrajectory multispike_trajectory(const SpikedParams& params, int K) {
  params.validate();
  require_K(K);
  const double tau = params.tau();
  auto out = sized(K);

  // Per spike: q = s/(s+tau). The forcing term tau r^2 s^{2t+1}/(s+tau)^{2t+2}
  // is carried as tau r^2 q^{2t+1}/(s+tau) so nothing overflows.
  const std::size_t k = params.spikes.size();
  std::vector<double> q(k), q_pow(k), force_scale(k);
  double v = params.sigma2 / tau;
  for (std::size_t j = 0; j < k; ++j) {
    const auto [s, r] = params.spikes[j];
    q[j] = s / (s + tau);
    q_pow[j] = q[j];  // q^{t+1} at t = 0
    force_scale[j] = tau * r * r / (s + tau);
    v += tau * s * r * r / ((s + tau) * (s + tau));
  }

  for (int t = 0; t <= K; ++t) {
    const auto i = static_cast<std::size_t>(t);
    if (t > 0) {
      double forcing = 0.0;
      for (std::size_t j = 0; j < k; ++j) {
        q_pow[j] *= q[j];
        // q^{2t+1} = q^{t+1} * q^{t+1} / q
        forcing += force_scale[j] * q_pow[j] * q_pow[j] / q[j];
      }
      v = v / (1.0 + tau) + forcing;
    }
    double b = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      const auto [s, r] = params.spikes[j];
      const double keep = 1.0 - q_pow[j];
      b += r * r * s * keep * keep;
    }
    out.bias[i] = b;
    out.variance[i] = v;
    out.risk[i] = b + v;
  }
  return out;
}

TheoryTrajectory isotropic_trajectory(double r2, double sigma2, double rho, int K) {
  require_rho(rho);
  require_K(K);
  if (!(r2 >= 0.0) || !(sigma2 >= 0.0)) fail(ErrorCode::InvalidParams, "r^2 and sigma^2 must be nonnegative");
  const double tau = rho - 1.0;
  const double a = 1.0 / (1.0 + tau);
  auto out = sized(K);
  double a_t = 1.0;
  for (int t = 0; t <= K; ++t) {
    const auto i = static_cast<std::size_t>(t);
    const double keep = 1.0 - a_t * a;
    out.bias[i] = r2 * keep * keep;
    out.variance[i] = sigma2 * a_t / tau;
    out.risk[i] = out.bias[i] + out.variance[i];
    a_t *= a;
  }
  return out;
}

bool isotropic_iteration_helps(double r2, double sigma2, double rho) {
  require_rho(rho);
  if (!(sigma2 > 0.0)) fail(ErrorCode::InvalidParams, "sigma^2 must be positive");
  const double tau = rho - 1.0;
  return r2 / sigma2 < tau * (1.0 + tau);
}

TheoryTrajectory isotropic_recursion_trajectory(double r2, double sigma2, double rho, int K) {
  require_rho(rho);
  require_K(K);
  if (!(r2 >= 0.0) || !(sigma2 >= 0.0)) fail(ErrorCode::InvalidParams, "r^2 and sigma^2 must be nonnegative");
  const double tau = rho - 1.0;
  const double a = 1.0 / (1.0 + tau);
  auto out = sized(K);
  double a_t = 1.0;
  for (int t = 0; t <= K; ++t) {
    const auto i = static_cast<std::size_t>(t);
    const double keep = 1.0 - a_t * a;
    // B_t + V_t of the s = 1 recursion; the signal part of V_t telescopes to r^2 a^{t+1} keep
    out.bias[i] = r2 * keep * keep;
    out.variance[i] = sigma2 * a_t / tau + r2 * a_t * a * keep;
    out.risk[i] = out.bias[i] + out.variance[i];
    a_t *= a;
  }
  return out;
}

double strong_spike_stochastic_limit(double sigma2, double rho, int t) {
  require_rho(rho);
  if (t < 0) fail(ErrorCode::InvalidParams, "t must be nonnegative");
  const double tau = rho - 1.0;
  return sigma2 / (tau * std::pow(1.0 + tau, t));
}

Stopping optimal_stopping(const std::vector<double>& risk) {
  if (risk.empty()) fail(ErrorCode::InvalidParams, "empty trajectory");
  Stopping best{0, risk[0]};
  for (std::size_t t = 1; t < risk.size(); ++t) {
    if (risk[t] < best.risk) best = {t, risk[t]};
  }
  return best;
}

Stopping optimal_stopping(const TheoryTrajectory& traj) { return optimal_stopping(traj.risk); }

}  // namespace stlab::spiked
