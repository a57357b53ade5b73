// selftrain-lab: command-line front end for the experiment harness.

#include <filesystem>
#include <iostream>

#include "CLI11.hpp"
#include "stlab/error.hpp"
#include "stlab/experiment.hpp"
#include "stlab/figures.hpp"
#include "stlab/report.hpp"

namespace {

using namespace stlab;

int exit_code(ErrorCode code) {
  switch (code) {
    case ErrorCode::ParseError:
    case ErrorCode::ValidationError:
    case ErrorCode::UnknownFigure:
    case ErrorCode::UnknownField:
    case ErrorCode::InvalidSpec:
    case ErrorCode::InvalidParams:
      return 2;
    default:
      return 1;
  }
}

report::PlotSpec default_plot(const experiment::ExperimentConfig& cfg) {
  report::PlotSpec spec;
  spec.title = cfg.experiment_id;
  spec.x_field = "t";
  spec.group_field = "rho";
  if (cfg.wants_theory()) spec.y_fields.push_back({"theory_risk", report::YField::Style::Line, 0.0, "theory"});
  if (cfg.wants_mc()) spec.y_fields.push_back({"mc_risk", report::YField::Style::Markers, 0.0, "simulation"});
  if (cfg.mode == experiment::Mode::Igcv) {
    spec.y_fields.push_back({"igcv", report::YField::Style::Line, -cfg.sigma2, "iGCV - sigma^2"});
  }
  return spec;
}

void write_outputs(const experiment::ExperimentConfig& cfg, const experiment::ResultTable& table,
                   const std::string& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) fail(ErrorCode::IoError, "cannot create output directory " + out_dir);
  const auto base = (std::filesystem::path(out_dir) / cfg.experiment_id).string();
  report::emit_csv(table, base + ".csv");
  report::emit_svg(table, default_plot(cfg), base + ".svg");
  std::cout << "wrote " << base << ".csv (" << table.rows.size() << " rows) and " << base << ".svg\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Iterative self-training in overparameterized linear regression: simulations and risk theory"};
  app.require_subcommand(1);

  std::string config_path, out_dir, figure_id;
  std::uint64_t seed = 0;
  int trials = 0, threads = 0;

  auto* run = app.add_subcommand("run", "Run the experiment described by a config file");
  run->add_option("--config", config_path, "YAML config file")->required();
  run->add_option("--out", out_dir, "Output directory (default: output_dir from the config)");
  auto* seed_opt = run->add_option("--seed", seed, "Override base_seed");
  auto* trials_opt = run->add_option("--trials", trials, "Override the number of trials")->check(CLI::PositiveNumber);
  run->add_option("--threads", threads, "Worker threads (capped by STLAB_MAX_THREADS)")->check(CLI::PositiveNumber);

  auto* repro = app.add_subcommand("reproduce", "Regenerate one of the built-in figures");
  repro->add_option("figure_id", figure_id, "fig1a, fig1b, fig2, fig3a, fig3b, fig4a, fig4b, fig5a or fig5b")
      ->required();
  repro->add_option("--out", out_dir, "Output directory")->required();
  repro->add_option("--threads", threads, "Worker threads (capped by STLAB_MAX_THREADS)")->check(CLI::PositiveNumber);

  auto* theory = app.add_subcommand("theory", "Deterministic-equivalent risk curves only");
  theory->add_option("--config", config_path, "YAML config file")->required();
  theory->add_option("--out", out_dir, "Output directory (default: output_dir from the config)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*run) {
      auto cfg = experiment::parse_config_file(config_path);
      if (*seed_opt) cfg.base_seed = seed;
      if (*trials_opt) cfg.trials = trials;
      const auto table = experiment::run_experiment(cfg, {threads});
      write_outputs(cfg, table, out_dir.empty() ? cfg.output_dir : out_dir);
    } else if (*repro) {
      figures::FigureOptions opts;
      opts.threads = threads;
      const auto res = figures::reproduce_figure(figure_id, out_dir, opts);
      std::cout << "wrote " << (std::filesystem::path(out_dir) / figure_id).string() << ".csv ("
                << res.table.rows.size() << " rows) and .svg\n";
    } else if (*theory) {
      auto cfg = experiment::parse_config_file(config_path);
      cfg.mode = experiment::Mode::Theory;
      cfg.theory = experiment::TheoryKind::Deterministic;
      cfg.validate();
      const auto table = experiment::run_experiment(cfg);
      write_outputs(cfg, table, out_dir.empty() ? cfg.output_dir : out_dir);
    }
  } catch (const Error& e) {
    std::cerr << "error [" << to_string(e.code()) << "]: " << e.message() << '\n';
    return exit_code(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
