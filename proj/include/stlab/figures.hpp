#pragma once

#include <optional>
#include <string>
#include <vector>

#include "stlab/experiment.hpp"
#include "stlab/report.hpp"

namespace stlab::figures {

const std::vector<std::string>& figure_ids();

struct FigureOptions {
  int threads = 0;
  std::optional<int> trials;
  std::optional<std::uint64_t> seed;
};

/// Experiment configs behind a figure (fig3b has its own sweep and none).
std::vector<experiment::ExperimentConfig> figure_configs(const std::string& id);
report::PlotSpec figure_plot(const std::string& id);

struct FigureResult {
  experiment::ResultTable table;
  report::Chart chart;
};

/// Builds the table and chart without touching the filesystem.
FigureResult build_figure(const std::string& id, const FigureOptions& options = {});

/// Writes <out_dir>/<id>.csv and <out_dir>/<id>.svg.
FigureResult reproduce_figure(const std::string& id, const std::string& out_dir,
                              const FigureOptions& options = {});

/// Ridge-vs-self-training sweep over spike strengths.
struct CrossoverPoint {
  double s = 0.0;
  double selftrain_min = 0.0;  // min over t of the trial-mean MC risk
  double selftrain_se = 0.0;
  std::size_t selftrain_t = 0;
  double ridge_min = 0.0;      // min over the lambda grid of the trial-mean MC risk
  double ridge_se = 0.0;
  double ridge_lambda = 0.0;
};

struct CrossoverConfig {
  std::vector<double> strengths;
  Eigen::Index n = 500;
  double rho = 2.0;
  double r = 1.0;
  double sigma2 = 1.0;
  int K = 10;
  int trials = 10;
  Eigen::Index n_test = 1000;
  std::vector<double> ridge_grid;
  std::uint64_t base_seed = 42;
};

/// Defaults: 10 log-spaced strengths in [1e2, 1e4] and 50
/// log-spaced penalties in [10^2.5/n, 10^3.8/n].
CrossoverConfig default_crossover();

std::vector<CrossoverPoint> crossover_sweep(const CrossoverConfig& cfg, experiment::ResultTable* rows,
                                            int threads = 0);

std::vector<double> logspace(double lo_exp, double hi_exp, int count);
std::vector<double> linspace(double lo, double hi, int count);

}  // namespace stlab::figures
