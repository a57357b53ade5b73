#include "stlab/figures.hpp"

#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>

#include <omp.h>

#include "stlab/error.hpp"
#include "stlab/selftrain.hpp"

namespace stlab::figures {

using experiment::ExperimentConfig;
using experiment::Mode;
using report::PlotSpec;
using report::YField;

std::vector<double> logspace(double lo_exp, double hi_exp, int count) {
  std::vector<double> out;
  for (int i = 0; i < count; ++i) {
    const double e = count == 1 ? lo_exp : lo_exp + (hi_exp - lo_exp) * i / (count - 1);
    out.push_back(std::pow(10.0, e));
  }
  return out;
}

std::vector<double> linspace(double lo, double hi, int count) {
  std::vector<double> out;
  for (int i = 0; i < count; ++i) out.push_back(count == 1 ? lo : lo + (hi - lo) * i / (count - 1));
  return out;
}

const std::vector<std::string>& figure_ids() {
  static const std::vector<std::string> ids{"fig1a", "fig1b", "fig2",  "fig3a", "fig3b",
                                            "fig4a", "fig4b", "fig5a", "fig5b"};
  return ids;
}

namespace {

void require_known(const std::string& id) {
  const auto& ids = figure_ids();
  if (std::find(ids.begin(), ids.end(), id) == ids.end()) {
    std::string known;
    for (const auto& k : ids) known += (known.empty() ? "" : ", ") + k;
    fail(ErrorCode::UnknownFigure, "unknown figure '" + id + "' (known: " + known + ")");
  }
}

ExperimentConfig spiked_base(const std::string& id, double s) {
  ExperimentConfig c;
  c.experiment_id = id;
  c.covariance = model::SingleSpike{s};
  c.signal = model::SpikeAligned{1.0};
  c.n0 = 500;
  c.sigma2 = 1.0;
  c.lambda = {0.0};
  c.trials = 10;
  c.mode = Mode::Both;
  return c;
}

ExperimentConfig powerlaw_base(const std::string& id) {
  ExperimentConfig c;
  c.experiment_id = id;
  c.covariance = model::PowerLawDiagonal{};
  c.signal = model::SparseOnes{10};
  c.n0 = 500;
  c.sigma2 = 1.0;
  c.trials = 10;
  return c;
}

std::string s_tag(double s) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", s);
  return buf;
}

}  // namespace

std::vector<ExperimentConfig> figure_configs(const std::string& id) {
  require_known(id);
  if (id == "fig1a" || id == "fig1b") {
    auto c = spiked_base(id, 25.0);
    c.n_test = 2000;
    if (id == "fig1a") {
      c.rho = linspace(1.2, 3.0, 10);
      c.K = 4;
    } else {
      c.rho = {1.5, 2.0, 2.5};
      c.K = 15;
    }
    return {c};
  }
  if (id == "fig2") {
    auto c = spiked_base(id, 5.0);
    c.mode = Mode::Theory;
    c.theory = experiment::TheoryKind::ClosedForm;
    c.rho = {1.5, 2.0, 2.5};
    c.K = 15;
    c.trials = 1;
    return {c};
  }
  if (id == "fig3a") {
    std::vector<ExperimentConfig> out;
    for (double s : {5.0, 25.0, 100.0}) {
      auto c = spiked_base("fig3a_s" + s_tag(s), s);
      c.p = 1000;
      c.n_test = 1000;
      c.K = 15;
      c.notes = {"sigma = 1 and r = 1 are assumed for this panel"};
      out.push_back(c);
    }
    return out;
  }
  if (id == "fig3b") return {};
  if (id == "fig4a" || id == "fig4b") {
    auto c = powerlaw_base(id);
    c.mode = Mode::Igcv;
    c.lambda = {static_cast<double>(c.n0) * 1e-4};
    if (id == "fig4a") {
      c.rho = linspace(1.2, 3.0, 10);
      c.K = 3;
      c.n_test = 10000;
    } else {
      c.rho = {1.5, 2.0, 2.5};
      c.K = 15;
      c.n_test = 5000;
    }
    return {c};
  }
  auto c = powerlaw_base(id);
  c.mode = Mode::Both;
  c.lambda = {0.0};
  c.n_test = 10000;
  if (id == "fig5a") {
    c.rho = linspace(1.2, 3.0, 10);
    c.K = 4;
    c.notes = {"rho grid: 10 points in [1.2, 3], iterations t <= 4"};
  } else {
    c.rho = {1.5, 2.0, 2.5};
    c.K = 50;
  }
  return {c};
}

PlotSpec figure_plot(const std::string& id) {
  require_known(id);
  PlotSpec spec;
  const YField theory{"theory_risk", YField::Style::Line, 0.0, "theory"};
  const YField mc{"mc_risk", YField::Style::Markers, 0.0, "simulation"};
  if (id == "fig1a" || id == "fig5a") {
    spec = {"rho", {theory, mc}, "t", false, false, ""};
  } else if (id == "fig1b" || id == "fig5b") {
    spec = {"t", {theory, mc}, "rho", false, false, ""};
  } else if (id == "fig2") {
    spec = {"t",
            {{"theory_bias", YField::Style::Line, 0.0, "systematic"},
             {"theory_var", YField::Style::Line, 0.0, "stochastic"},
             {"theory_risk", YField::Style::Line, 0.0, "total"}},
            "rho", false, false, ""};
  } else if (id == "fig3a") {
    spec = {"t", {theory, mc}, "experiment_id", false, false, ""};
  } else if (id == "fig4a" || id == "fig4b") {
    const YField gcv{"igcv", YField::Style::Line, 0.0, "iGCV"};
    const YField shifted{"mc_risk", YField::Style::Markers, 1.0, "test MSE + sigma^2"};
    spec = id == "fig4a" ? PlotSpec{"rho", {gcv, shifted}, "t", false, false, ""}
                         : PlotSpec{"t", {gcv, shifted}, "rho", false, false, ""};
  } else {
    spec = {"t", {mc}, "experiment_id", false, false, ""};
  }
  spec.title = id;
  return spec;
}

CrossoverConfig default_crossover() {
  CrossoverConfig c;
  c.strengths = logspace(2.0, 4.0, 10);
  c.ridge_grid = logspace(2.5, 3.8, 50);
  for (double& l : c.ridge_grid) l /= static_cast<double>(c.n);
  return c;
}

namespace {

struct TrialCurves {
  Vector selftrain;  // per t
  Vector ridge;      // per lambda
};

std::pair<double, double> mean_se(const std::vector<double>& v) {
  const double m = static_cast<double>(v.size());
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= m;
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return {mean, v.size() > 1 ? std::sqrt(ss / (m - 1.0) / m) : 0.0};
}

}  // namespace

std::vector<CrossoverPoint> crossover_sweep(const CrossoverConfig& cfg, experiment::ResultTable* rows,
                                            int threads) {
  if (cfg.strengths.empty() || cfg.ridge_grid.empty()) fail(ErrorCode::InvalidParams, "empty crossover sweep");
  if (cfg.trials < 1 || cfg.K < 0) fail(ErrorCode::InvalidParams, "bad crossover trial settings");
  const auto p = static_cast<Eigen::Index>(std::llround(cfg.rho * static_cast<double>(cfg.n)));
  const auto ns = cfg.strengths.size();
  const auto nt = static_cast<std::size_t>(cfg.trials);
  std::vector<TrialCurves> curves(ns * nt);
  std::vector<std::exception_ptr> errors(ns * nt);
  std::vector<std::optional<model::GaussianDesign>> designs(ns);
  std::vector<Vector> betas(ns);
  for (std::size_t i = 0; i < ns; ++i) {
    const auto cov = model::build_covariance(model::SingleSpike{cfg.strengths[i]}, p);
    designs[i].emplace(cov.matrix);
    betas[i] = model::build_signal(model::SpikeAligned{cfg.r}, cov.eigen, p);
  }
  const auto fit = selftrain::FitConfig::uniform(0.0, cfg.n, cfg.K);
  const int nthreads = threads > 0 ? threads : omp_get_max_threads();

#pragma omp parallel for schedule(dynamic) num_threads(nthreads)
  for (long job = 0; job < static_cast<long>(ns * nt); ++job) {
    const auto i = static_cast<std::size_t>(job) / nt;
    const auto j = static_cast<std::size_t>(job) % nt;
    try {
      const auto& design = *designs[i];
      const numerics::RngHandle rng{cfg.base_seed + j, 0};
      const auto data = model::generate_initial_data(design, betas[i], cfg.n, cfg.sigma2, rng);
      selftrain::TrajectoryOptions opts;
      opts.keep_operators = false;
      const auto traj = selftrain::self_train_trajectory(data, std::span<const model::GaussianDesign>(&design, 1),
                                                         fit, rng, opts);
      const auto nl = static_cast<Eigen::Index>(cfg.ridge_grid.size());
      Matrix err(p, cfg.K + 1 + nl);
      for (int t = 0; t <= cfg.K; ++t) err.col(t) = traj.estimates[static_cast<std::size_t>(t)] - betas[i];
      const selftrain::RidgePath path(data.features, data.labels);
      for (Eigen::Index l = 0; l < nl; ++l) {
        err.col(cfg.K + 1 + l) = path.fit(cfg.ridge_grid[static_cast<std::size_t>(l)]) - betas[i];
      }
      const Vector mse = experiment::test_mse_columns(design, err, cfg.n_test, rng);
      curves[static_cast<std::size_t>(job)] = {mse.head(cfg.K + 1), mse.tail(nl)};
    } catch (...) {
      errors[static_cast<std::size_t>(job)] = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  std::vector<CrossoverPoint> out;
  for (std::size_t i = 0; i < ns; ++i) {
    CrossoverPoint pt;
    pt.s = cfg.strengths[i];
    pt.selftrain_min = std::numeric_limits<double>::infinity();
    for (int t = 0; t <= cfg.K; ++t) {
      std::vector<double> v;
      for (std::size_t j = 0; j < nt; ++j) v.push_back(curves[i * nt + j].selftrain(t));
      const auto [m, se] = mean_se(v);
      if (m < pt.selftrain_min) {
        pt.selftrain_min = m;
        pt.selftrain_se = se;
        pt.selftrain_t = static_cast<std::size_t>(t);
      }
    }
    pt.ridge_min = std::numeric_limits<double>::infinity();
    for (std::size_t l = 0; l < cfg.ridge_grid.size(); ++l) {
      std::vector<double> v;
      for (std::size_t j = 0; j < nt; ++j) v.push_back(curves[i * nt + j].ridge(static_cast<Eigen::Index>(l)));
      const auto [m, se] = mean_se(v);
      if (m < pt.ridge_min) {
        pt.ridge_min = m;
        pt.ridge_se = se;
        pt.ridge_lambda = cfg.ridge_grid[l];
      }
    }
    out.push_back(pt);

    if (rows != nullptr) {
      const double rho = static_cast<double>(p) / static_cast<double>(cfg.n);
      for (int t = 0; t <= cfg.K; ++t) {
        for (std::size_t j = 0; j < nt; ++j) {
          experiment::ResultRow r;
          r.experiment_id = "fig3b_selftrain_s" + s_tag(pt.s);
          r.rho = rho;
          r.n = cfg.n;
          r.p = p;
          r.t = t;
          r.lambda = 0.0;
          r.trial = static_cast<int>(j);
          r.mc_risk = curves[i * nt + j].selftrain(t);
          r.seed = cfg.base_seed + j;
          rows->rows.push_back(r);
        }
      }
      for (std::size_t l = 0; l < cfg.ridge_grid.size(); ++l) {
        for (std::size_t j = 0; j < nt; ++j) {
          experiment::ResultRow r;
          r.experiment_id = "fig3b_ridge_s" + s_tag(pt.s);
          r.rho = rho;
          r.n = cfg.n;
          r.p = p;
          r.lambda = cfg.ridge_grid[l];
          r.trial = static_cast<int>(j);
          r.mc_risk = curves[i * nt + j].ridge(static_cast<Eigen::Index>(l));
          r.seed = cfg.base_seed + j;
          rows->rows.push_back(r);
        }
      }
    }
  }
  return out;
}

FigureResult build_figure(const std::string& id, const FigureOptions& options) {
  require_known(id);
  FigureResult out;
  if (id == "fig3b") {
    auto cfg = default_crossover();
    if (options.trials) cfg.trials = *options.trials;
    if (options.seed) cfg.base_seed = *options.seed;
    out.table.notes = {"sigma = 1 and r = 1 are assumed for this panel",
                       "self-training minimum is over t = 0..10; ridge minimum is over the lambda grid"};
    const auto pts = crossover_sweep(cfg, &out.table, experiment::effective_threads(options.threads));
    report::Series st{"self-training (min over t)", report::SeriesKind::Markers, {}};
    report::Series rg{"ridge (min over lambda)", report::SeriesKind::Markers, {}};
    report::Series stl{"self-training", report::SeriesKind::Line, {}};
    report::Series rgl{"ridge", report::SeriesKind::Line, {}};
    for (const auto& pt : pts) {
      st.points.push_back({pt.s, pt.selftrain_min, pt.selftrain_se});
      rg.points.push_back({pt.s, pt.ridge_min, pt.ridge_se});
      stl.points.push_back({pt.s, pt.selftrain_min, 0.0});
      rgl.points.push_back({pt.s, pt.ridge_min, 0.0});
    }
    out.chart.title = id;
    out.chart.x_label = "spike strength s";
    out.chart.y_label = "minimum test MSE";
    out.chart.log_x = true;
    out.chart.log_y = true;
    out.chart.series = {stl, rgl, st, rg};
    return out;
  }
  for (auto cfg : figure_configs(id)) {
    if (options.trials && cfg.mode != Mode::Theory) cfg.trials = *options.trials;
    if (options.seed) cfg.base_seed = *options.seed;
    auto part = experiment::run_experiment(cfg, {options.threads});
    out.table.rows.insert(out.table.rows.end(), part.rows.begin(), part.rows.end());
    for (const auto& n : part.notes) {
      if (std::find(out.table.notes.begin(), out.table.notes.end(), n) == out.table.notes.end()) {
        out.table.notes.push_back(n);
      }
    }
  }
  out.chart = report::build_chart(out.table, figure_plot(id));
  return out;
}

FigureResult reproduce_figure(const std::string& id, const std::string& out_dir, const FigureOptions& options) {
  require_known(id);
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) fail(ErrorCode::IoError, "cannot create output directory " + out_dir + ": " + ec.message());
  auto result = build_figure(id, options);
  const auto base = std::filesystem::path(out_dir) / id;
  report::emit_csv(result.table, base.string() + ".csv");
  report::write_svg(result.chart, base.string() + ".svg");
  return result;
}

}  // namespace stlab::figures
