#include "stlab/experiment.hpp"

#include <cmath>
#include <cstdlib>
#include <exception>
#include <optional>
#include <variant>
#include <limits>
#include <sstream>

#include <omp.h>

#include "stlab/detequiv.hpp"
#include "stlab/error.hpp"
#include "stlab/igcv.hpp"
#include "stlab/selftrain.hpp"
#include "stlab/spiked_theory.hpp"

namespace stlab::experiment {

namespace {

constexpr Eigen::Index kTestChunk = 2048;

struct GridPoint {
  double rho = 0.0;
  Eigen::Index p = 0;
  model::Covariance cov;
  Vector beta;
  std::optional<model::GaussianDesign> design;
  std::optional<TheoryCurve> theory;
};

struct TrialResult {
  std::vector<double> mc;
  std::vector<double> igcv;
};

std::string point_label(const GridPoint& g) {
  std::ostringstream os;
  os << "grid point rho=" << g.rho << " p=" << g.p;
  return os.str();
}

[[noreturn]] void rethrow_at(const GridPoint& g, const Error& e) {
  fail(e.code(), point_label(g) + ": " + e.message());
}

bool is_spiked(const model::CovarianceSpec& spec) {
  return std::holds_alternative<model::SingleSpike>(spec) || std::holds_alternative<model::MultiSpike>(spec);
}

std::vector<double> spike_strengths(const model::CovarianceSpec& spec) {
  if (const auto* s = std::get_if<model::SingleSpike>(&spec)) return {s->strength};
  return std::get<model::MultiSpike>(spec).strengths;
}

// Closed-form theory applies to ridgeless spiked models with a constant
// sample size and a signal carried by the spikes.
bool closed_form_applies(const ExperimentConfig& cfg) {
  if (!is_spiked(cfg.covariance)) return false;
  for (int t = 0; t <= cfg.K; ++t) {
    if (cfg.lambda_at(t) != 0.0 || cfg.n_at(t) != cfg.n0) return false;
  }
  if (std::holds_alternative<model::SpikeAligned>(cfg.signal)) return true;
  if (const auto* m = std::get_if<model::MultiSpikeCoeffs>(&cfg.signal)) {
    return m->r.size() == spike_strengths(cfg.covariance).size();
  }
  return false;
}

TheoryCurve closed_form_curve(const ExperimentConfig& cfg, Eigen::Index p) {
  spiked::SpikedParams params;
  const auto strengths = spike_strengths(cfg.covariance);
  std::vector<double> r;
  if (const auto* a = std::get_if<model::SpikeAligned>(&cfg.signal)) {
    r.assign(strengths.size(), 0.0);
    r[0] = a->r;
  } else {
    r = std::get<model::MultiSpikeCoeffs>(cfg.signal).r;
  }
  for (std::size_t j = 0; j < strengths.size(); ++j) params.spikes.push_back({strengths[j], r[j]});
  params.sigma2 = cfg.sigma2;
  params.rho = static_cast<double>(p) / static_cast<double>(cfg.n0);
  const auto traj = spiked::multispike_trajectory(params, cfg.K);
  return {traj.bias, traj.variance, traj.risk, "closed_form"};
}

TheoryCurve deterministic_curve(const ExperimentConfig& cfg, const model::Covariance& cov, const Vector& beta) {
  std::vector<double> lambdas;
  std::vector<Eigen::Index> sizes;
  for (int t = 0; t <= cfg.K; ++t) {
    lambdas.push_back(cfg.lambda_at(t));
    sizes.push_back(cfg.n_at(t));
  }
  detequiv::DetRiskTrajectory traj;
  if (cov.shared_eigenbasis) {
    detequiv::DiagonalProblem pr;
    pr.cov = {cov.matrix.diagonal()};
    pr.test_cov = cov.matrix.diagonal();
    pr.beta = beta;
    pr.sigma2 = cfg.sigma2;
    pr.lambdas = lambdas;
    pr.sizes = sizes;
    pr.K = cfg.K;
    traj = detequiv::det_trajectory(pr);
  } else {
    detequiv::DenseProblem pr;
    pr.cov = {cov.matrix};
    pr.test_cov = cov.matrix;
    pr.beta = beta;
    pr.sigma2 = cfg.sigma2;
    pr.lambdas = lambdas;
    pr.sizes = sizes;
    pr.K = cfg.K;
    traj = detequiv::det_trajectory(pr);
  }
  return {traj.bias, traj.variance, traj.risk, "deterministic"};
}

TheoryCurve theory_for(const ExperimentConfig& cfg, const model::Covariance& cov, const Vector& beta,
                       Eigen::Index p) {
  switch (cfg.theory) {
    case TheoryKind::ClosedForm:
      if (!closed_form_applies(cfg)) {
        fail(ErrorCode::ValidationError,
             "closed-form theory needs a ridgeless spiked model with constant n and spike-carried signal");
      }
      return closed_form_curve(cfg, p);
    case TheoryKind::Deterministic:
      return deterministic_curve(cfg, cov, beta);
    case TheoryKind::Auto:
      break;
  }
  return closed_form_applies(cfg) ? closed_form_curve(cfg, p) : deterministic_curve(cfg, cov, beta);
}

std::vector<GridPoint> prepare_grid(const ExperimentConfig& cfg, std::vector<std::string>& notes) {
  std::vector<GridPoint> grid;
  const auto dims = grid_dimensions(cfg);
  for (std::size_t i = 0; i < dims.size(); ++i) {
    GridPoint g;
    g.p = dims[i];
    g.rho = cfg.rho.empty() ? static_cast<double>(g.p) / static_cast<double>(cfg.n0) : cfg.rho[i];
    try {
      g.cov = model::build_covariance(cfg.covariance, g.p);
      for (const auto& w : g.cov.warnings) {
        const auto note = "p=" + std::to_string(g.p) + ": " + w;
        notes.push_back(note);
      }
      g.beta = model::build_signal(cfg.signal, g.cov.eigen, g.p);
      if (cfg.wants_mc()) g.design.emplace(g.cov.matrix);
      if (cfg.wants_theory()) g.theory = theory_for(cfg, g.cov, g.beta, g.p);
    } catch (const Error& e) {
      rethrow_at(g, e);
    }
    grid.push_back(std::move(g));
  }
  return grid;
}

TrialResult run_trial(const ExperimentConfig& cfg, const GridPoint& g, int trial) {
  const numerics::RngHandle rng{cfg.base_seed + static_cast<std::uint64_t>(trial), 0};
  const auto& design = *g.design;
  const auto data = model::generate_initial_data(design, g.beta, cfg.n0, cfg.sigma2, rng);

  selftrain::FitConfig fit;
  fit.K = cfg.K;
  for (int t = 0; t <= cfg.K; ++t) {
    fit.lambdas.push_back(cfg.lambda_at(t));
    fit.sizes.push_back(cfg.n_at(t));
  }
  selftrain::TrajectoryOptions opts;
  opts.keep_operators = false;
  std::optional<igcv::GcvContext> ctx;
  if (cfg.mode == Mode::Igcv) {
    ctx.emplace(data.features, data.labels, fit.lambdas[0]);
    opts.track = &ctx->probe();
  }
  const auto traj =
      selftrain::self_train_trajectory(data, std::span<const model::GaussianDesign>(&design, 1), fit, rng, opts);

  const auto steps = static_cast<Eigen::Index>(cfg.K) + 1;
  Matrix err(g.p, steps);
  for (Eigen::Index t = 0; t < steps; ++t) err.col(t) = traj.estimates[static_cast<std::size_t>(t)] - g.beta;

  const Vector mse = test_mse_columns(design, err, cfg.n_test, rng);
  TrialResult out;
  out.mc.assign(mse.data(), mse.data() + mse.size());
  if (ctx) {
    for (std::size_t t = 0; t < static_cast<std::size_t>(steps); ++t) {
      out.igcv.push_back(ctx->value(traj.estimates[t], traj.tracked[t]));
    }
  }
  return out;
}

ResultTable assemble(const ExperimentConfig& cfg, const std::vector<GridPoint>& grid,
                     const std::vector<TrialResult>& trials, std::vector<std::string> notes) {
  ResultTable table;
  table.notes = std::move(notes);
  for (std::size_t gi = 0; gi < grid.size(); ++gi) {
    const auto& g = grid[gi];
    for (int t = 0; t <= cfg.K; ++t) {
      const auto ut = static_cast<std::size_t>(t);
      ResultRow base;
      base.experiment_id = cfg.experiment_id;
      base.rho = g.rho;
      base.n = cfg.n_at(t);
      base.p = g.p;
      base.t = t;
      base.lambda = cfg.lambda_at(t);
      if (g.theory) {
        base.theory_risk = g.theory->risk[ut];
        base.theory_bias = g.theory->bias[ut];
        base.theory_var = g.theory->variance[ut];
      }
      if (!cfg.wants_mc()) {
        table.rows.push_back(base);
        continue;
      }
      for (int j = 0; j < cfg.trials; ++j) {
        const auto& res = trials[gi * static_cast<std::size_t>(cfg.trials) + static_cast<std::size_t>(j)];
        ResultRow row = base;
        row.trial = j;
        row.seed = cfg.base_seed + static_cast<std::uint64_t>(j);
        row.mc_risk = res.mc[ut];
        if (!res.igcv.empty()) row.igcv = res.igcv[ut];
        table.rows.push_back(std::move(row));
      }
    }
  }
  return table;
}

ResultTable run_impl(const ExperimentConfig& cfg, bool parallel, int threads) {
  cfg.validate();
  std::vector<std::string> notes = cfg.notes;
  const auto grid = prepare_grid(cfg, notes);
  std::vector<TrialResult> results;
  if (cfg.wants_mc()) {
    const auto jobs = static_cast<long>(grid.size()) * cfg.trials;
    results.resize(static_cast<std::size_t>(jobs));
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(jobs));
    const int nthreads = parallel ? (threads > 0 ? threads : omp_get_max_threads()) : 1;
#pragma omp parallel for schedule(dynamic) num_threads(nthreads) if (parallel)
    for (long job = 0; job < jobs; ++job) {
      const auto gi = static_cast<std::size_t>(job / cfg.trials);
      const int trial = static_cast<int>(job % cfg.trials);
      try {
        try {
          results[static_cast<std::size_t>(job)] = run_trial(cfg, grid[gi], trial);
        } catch (const Error& e) {
          rethrow_at(grid[gi], e);
        }
      } catch (...) {
        errors[static_cast<std::size_t>(job)] = std::current_exception();
      }
    }
    for (const auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }
  return assemble(cfg, grid, results, std::move(notes));
}

}  // namespace

Vector test_mse_columns(const model::GaussianDesign& design, const Matrix& errors, Eigen::Index n_test,
                        const numerics::RngHandle& trial_rng) {
  if (errors.rows() != design.dim()) fail(ErrorCode::DimensionMismatch, "error columns differ from dimension");
  if (n_test < 1) fail(ErrorCode::DimensionMismatch, "n_test must be positive");
  auto engine = trial_rng.with_stream(kTestStream).engine();
  Vector sq = Vector::Zero(errors.cols());
  for (Eigen::Index done = 0; done < n_test; done += kTestChunk) {
    const Eigen::Index rows = std::min(kTestChunk, n_test - done);
    const Matrix xt = design.sample(rows, engine);
    sq += (xt * errors).colwise().squaredNorm().transpose();
  }
  return sq / static_cast<double>(n_test);
}

std::vector<Eigen::Index> grid_dimensions(const ExperimentConfig& cfg) {
  if (cfg.p) return {*cfg.p};
  std::vector<Eigen::Index> dims;
  for (double r : cfg.rho) dims.push_back(static_cast<Eigen::Index>(std::llround(r * static_cast<double>(cfg.n0))));
  return dims;
}

TheoryCurve theory_curve(const ExperimentConfig& cfg, Eigen::Index p) {
  const auto cov = model::build_covariance(cfg.covariance, p);
  const Vector beta = model::build_signal(cfg.signal, cov.eigen, p);
  return theory_for(cfg, cov, beta, p);
}

int effective_threads(int requested) {
  int n = requested;
  if (const char* cap = std::getenv("STLAB_MAX_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(cap, &end, 10);
    if (end != cap && *end == '\0' && v > 0) {
      const int limit = static_cast<int>(std::min<long>(v, std::numeric_limits<int>::max()));
      if (n <= 0) n = std::min(omp_get_max_threads(), limit);
      n = std::min(n, limit);
    }
  }
  return n;
}

ResultTable run_experiment(const ExperimentConfig& config, const RunOptions& options) {
  return run_impl(config, true, effective_threads(options.threads));
}

ResultTable run_experiment_serial(const ExperimentConfig& config) { return run_impl(config, false, 1); }

}  // namespace stlab::experiment
