#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "stlab/model.hpp"

namespace stlab::experiment {

enum class Mode { Mc, Theory, Both, Igcv };
enum class TheoryKind { Auto, ClosedForm, Deterministic };

struct ExperimentConfig {
  std::string experiment_id = "experiment";
  model::CovarianceSpec covariance = model::Identity{};
  model::SignalSpec signal = model::SparseOnes{1};
  Eigen::Index n0 = 0;
  std::optional<Eigen::Index> p;      // exactly one of p / rho
  std::vector<double> rho;
  std::vector<Eigen::Index> n_schedule;  // n_1..n_K; empty means n_t = n0
  double sigma2 = 1.0;
  std::vector<double> lambda{0.0};    // one value, or lambda_0..lambda_K
  int K = 0;
  int trials = 10;
  Eigen::Index n_test = 10000;
  std::uint64_t base_seed = 42;
  Mode mode = Mode::Both;
  TheoryKind theory = TheoryKind::Auto;
  std::string output_dir = ".";
  std::vector<std::string> notes;     // written as '#' lines after the CSV rows

  void validate() const;
  double lambda_at(int t) const;
  Eigen::Index n_at(int t) const;
  bool wants_mc() const { return mode != Mode::Theory; }
  bool wants_theory() const { return mode == Mode::Theory || mode == Mode::Both; }
};

ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig parse_config_file(const std::string& path);

std::string to_string(Mode mode);
std::string to_string(TheoryKind kind);

/// One CSV row. Absent optionals are written as empty cells.
struct ResultRow {
  std::string experiment_id;
  double rho = 0.0;
  Eigen::Index n = 0;
  Eigen::Index p = 0;
  std::optional<int> t;
  std::optional<double> lambda;
  std::optional<int> trial;
  std::optional<double> mc_risk;
  std::optional<double> theory_risk;
  std::optional<double> theory_bias;
  std::optional<double> theory_var;
  std::optional<double> igcv;
  std::optional<std::uint64_t> seed;
};

struct ResultTable {
  std::vector<ResultRow> rows;
  std::vector<std::string> notes;
};

struct RunOptions {
  int threads = 0;  // 0 keeps the OpenMP default
};

/// OpenMP over (grid point, trial) jobs. Rows come out ordered by grid point,
/// then t, then trial, independent of scheduling.
ResultTable run_experiment(const ExperimentConfig& config, const RunOptions& options = {});
/// Same jobs executed one after another.
ResultTable run_experiment_serial(const ExperimentConfig& config);

/// Theory for one grid point: (bias, variance, risk) per t.
struct TheoryCurve {
  std::vector<double> bias, variance, risk;
  std::string method;
};
TheoryCurve theory_curve(const ExperimentConfig& config, Eigen::Index p);

/// Dimension for each grid point.
std::vector<Eigen::Index> grid_dimensions(const ExperimentConfig& config);

/// Stream holding a trial's noiseless test set; trajectory steps use 0..K.
inline constexpr std::uint64_t kTestStream = std::uint64_t{1} << 32;

/// Test MSE of every column of `errors` (beta_hat - beta, one column per
/// estimate) on n_test fresh rows drawn from the trial's test stream. The rows
/// are generated in chunks from one engine, so the draws do not depend on the
/// chunk size.
Vector test_mse_columns(const model::GaussianDesign& design, const Matrix& errors, Eigen::Index n_test,
                        const numerics::RngHandle& trial_rng);

/// Thread count after applying the STLAB_MAX_THREADS cap. 0 means "default".
int effective_threads(int requested);

}  // namespace stlab::experiment
