// Serial reference vs OpenMP kernels. Prints wall time per variant and checks
// that both produce the same numbers.
#include <omp.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>

#include "stlab/detequiv.hpp"
#include "stlab/experiment.hpp"
#include "stlab/model.hpp"
#include "stlab/report.hpp"

using namespace stlab;

namespace {

double best_of(int reps, const std::function<void()>& f) {
  double best = 1e300;
  for (int r = 0; r < reps; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    f();
    best = std::min(best, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  }
  return best;
}

void row(const char* name, double serial, double parallel, bool same) {
  std::printf("%-28s %10.4f %10.4f %8.2fx  %s\n", name, serial, parallel, serial / parallel,
              same ? "identical" : "MISMATCH");
}

}  // namespace

int main(int argc, char** argv) {
  const Eigen::Index p = argc > 1 ? std::atol(argv[1]) : 20000;
  const int K = argc > 2 ? std::atoi(argv[2]) : 40;
  std::printf("threads available: %d\n", omp_get_max_threads());
  std::printf("%-28s %10s %10s %9s\n", "kernel", "serial[s]", "omp[s]", "speedup");

  detequiv::DiagonalProblem pr;
  pr.cov = {model::covariance_diagonal(model::PowerLawDiagonal{}, p)};
  pr.test_cov = pr.cov[0];
  pr.beta = Vector::Zero(p);
  pr.beta.head(10).setOnes();
  pr.sigma2 = 1.0;
  pr.K = K;
  pr.lambdas.assign(static_cast<std::size_t>(K) + 1, 0.0);
  pr.sizes.assign(static_cast<std::size_t>(K) + 1, p / 2);
  detequiv::DetRiskTrajectory a, b;
  const double ts = best_of(3, [&] { a = detequiv::det_trajectory(pr); });
  const double tp = best_of(3, [&] { b = detequiv::det_trajectory_parallel(pr); });
  row("det_trajectory (diagonal)", ts, tp, a.risk == b.risk);

  auto cfg = experiment::parse_config_text(R"(
experiment_id: bench
covariance: {type: spiked, s: 25}
signal: {type: spike_aligned, r: 1}
n0: 150
rho: [1.5, 2.0, 2.5]
K: 8
trials: 4
n_test: 1000
)");
  std::string cs, cp;
  const double es = best_of(1, [&] { cs = report::to_csv(experiment::run_experiment_serial(cfg)); });
  const double ep = best_of(1, [&] { cp = report::to_csv(experiment::run_experiment(cfg)); });
  row("run_experiment (grid x trial)", es, ep, cs == cp);
  return cs == cp && a.risk == b.risk ? 0 : 1;
}
