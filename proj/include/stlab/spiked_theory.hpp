#pragma once

#include <cstddef>
#include <vector>

namespace stlab::spiked {

struct Spike {
  double s = 0.0;  // strength, > 1
  double r = 0.0;  // signal coefficient along the spike direction
};

struct SpikedParams {
  std::vector<Spike> spikes;  // sorted by strength, descending
  double sigma2 = 0.0;
  double rho = 2.0;

  double tau() const { return rho - 1.0; }
  void validate() const;
};

/// Systematic / stochastic split of the asymptotic risk for t = 0..K.
struct TheoryTrajectory {
  std::vector<double> bias;      // B*_t
  std::vector<double> variance;  // V*_t
  std::vector<double> risk;      // R*_t = B*_t + V*_t

  std::size_t size() const { return risk.size(); }
};

TheoryTrajectory spiked_trajectory(const SpikedParams& params, int K);
TheoryTrajectory multispike_trajectory(const SpikedParams& params, int K);

/// Isotropic closed form R*_t = r^2 (1 - (1+tau)^{-(t+1)})^2 + sigma^2 / (tau (1+tau)^t).
/// The whole risk is reported in `risk`; bias holds the r^2 term and variance the sigma^2 term.
TheoryTrajectory isotropic_trajectory(double r2, double sigma2, double rho, int K);

/// True iff r^2/sigma^2 < tau(1+tau). Equality counts as not helping.
bool isotropic_iteration_helps(double r2, double sigma2, double rho);

/// The single-spike recursion evaluated at s = 1, i.e. Sigma = I with beta of norm r:
/// R*_t = r^2 (1 - a^{t+1}) + sigma^2 a^t / tau, a = 1/(1+tau).
TheoryTrajectory isotropic_recursion_trajectory(double r2, double sigma2, double rho, int K);

/// sigma^2 / (tau (1+tau)^t), the large-spike limit of V*_t.
double strong_spike_stochastic_limit(double sigma2, double rho, int t);

struct Stopping {
  std::size_t t = 0;
  double risk = 0.0;
};

/// Index of the smallest risk; the earliest index wins ties.
Stopping optimal_stopping(const TheoryTrajectory& traj);
Stopping optimal_stopping(const std::vector<double>& risk);

}  // namespace stlab::spiked
