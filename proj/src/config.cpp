#include <fstream>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "stlab/error.hpp"
#include "stlab/experiment.hpp"

namespace stlab::experiment {

namespace {

[[noreturn]] void parse_error(const YAML::Node& node, const std::string& what) {
  std::ostringstream os;
  const auto mark = node.Mark();
  if (mark.line >= 0) os << "line " << mark.line + 1 << ": ";
  os << what;
  fail(ErrorCode::ParseError, os.str());
}

[[noreturn]] void invalid(const std::string& what) { fail(ErrorCode::ValidationError, what); }

template <class T>
T scalar(const YAML::Node& node, const std::string& field) {
  if (!node.IsScalar()) parse_error(node, "field '" + field + "' must be a scalar");
  try {
    return node.as<T>();
  } catch (const YAML::Exception&) {
    parse_error(node, "field '" + field + "' has the wrong type (value '" + node.Scalar() + "')");
  }
}

template <class T>
std::vector<T> scalar_list(const YAML::Node& node, const std::string& field) {
  std::vector<T> out;
  if (node.IsScalar()) {
    out.push_back(scalar<T>(node, field));
    return out;
  }
  if (!node.IsSequence()) parse_error(node, "field '" + field + "' must be a scalar or a list");
  for (const auto& item : node) out.push_back(scalar<T>(item, field));
  return out;
}

Vector to_vector(const std::vector<double>& v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) out(static_cast<Eigen::Index>(i)) = v[i];
  return out;
}

void check_keys(const YAML::Node& map, std::initializer_list<const char*> allowed, const std::string& where) {
  for (const auto& kv : map) {
    const auto key = kv.first.as<std::string>();
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) parse_error(kv.first, "unknown field '" + key + "' in " + where);
  }
}

model::CovarianceSpec parse_covariance(const YAML::Node& node) {
  if (node.IsScalar()) {
    const auto type = node.as<std::string>();
    if (type == "identity") return model::Identity{};
    if (type == "powerlaw") return model::PowerLawDiagonal{};
    parse_error(node, "covariance type '" + type + "' needs parameters; use a mapping");
  }
  if (!node.IsMap()) parse_error(node, "covariance must be a mapping");
  if (!node["type"]) parse_error(node, "covariance.type is required");
  const auto type = scalar<std::string>(node["type"], "covariance.type");
  auto need = [&](const char* key) {
    if (!node[key]) parse_error(node, std::string("covariance.") + key + " is required for type " + type);
    return node[key];
  };
  if (type == "identity") {
    check_keys(node, {"type"}, "covariance");
    return model::Identity{};
  }
  if (type == "spiked") {
    check_keys(node, {"type", "s"}, "covariance");
    return model::SingleSpike{scalar<double>(need("s"), "covariance.s")};
  }
  if (type == "multispike") {
    check_keys(node, {"type", "spikes"}, "covariance");
    return model::MultiSpike{scalar_list<double>(need("spikes"), "covariance.spikes")};
  }
  if (type == "powerlaw") {
    check_keys(node, {"type"}, "covariance");
    return model::PowerLawDiagonal{};
  }
  if (type == "diagonal") {
    check_keys(node, {"type", "values"}, "covariance");
    return model::ExplicitDiagonal{to_vector(scalar_list<double>(need("values"), "covariance.values"))};
  }
  if (type == "dense") {
    check_keys(node, {"type", "matrix"}, "covariance");
    const auto rows = need("matrix");
    if (!rows.IsSequence() || rows.size() == 0) parse_error(rows, "covariance.matrix must be a list of rows");
    const auto p = static_cast<Eigen::Index>(rows.size());
    Matrix m(p, p);
    for (Eigen::Index i = 0; i < p; ++i) {
      const auto row = scalar_list<double>(rows[static_cast<std::size_t>(i)], "covariance.matrix");
      if (static_cast<Eigen::Index>(row.size()) != p) parse_error(rows, "covariance.matrix must be square");
      for (Eigen::Index j = 0; j < p; ++j) m(i, j) = row[static_cast<std::size_t>(j)];
    }
    return model::ExplicitDense{m};
  }
  parse_error(node["type"], "unknown covariance type '" + type + "'");
}

model::SignalSpec parse_signal(const YAML::Node& node) {
  if (!node.IsMap()) parse_error(node, "signal must be a mapping");
  if (!node["type"]) parse_error(node, "signal.type is required");
  const auto type = scalar<std::string>(node["type"], "signal.type");
  auto need = [&](const char* key) {
    if (!node[key]) parse_error(node, std::string("signal.") + key + " is required for type " + type);
    return node[key];
  };
  if (type == "spike_aligned") {
    check_keys(node, {"type", "r"}, "signal");
    return model::SpikeAligned{node["r"] ? scalar<double>(node["r"], "signal.r") : 1.0};
  }
  if (type == "multispike") {
    check_keys(node, {"type", "r"}, "signal");
    return model::MultiSpikeCoeffs{scalar_list<double>(need("r"), "signal.r")};
  }
  if (type == "sparse_ones") {
    check_keys(node, {"type", "k"}, "signal");
    return model::SparseOnes{scalar<Eigen::Index>(need("k"), "signal.k")};
  }
  if (type == "explicit") {
    check_keys(node, {"type", "beta"}, "signal");
    return model::ExplicitSignal{to_vector(scalar_list<double>(need("beta"), "signal.beta"))};
  }
  parse_error(node["type"], "unknown signal type '" + type + "'");
}

Mode parse_mode(const YAML::Node& node) {
  const auto v = scalar<std::string>(node, "mode");
  if (v == "mc") return Mode::Mc;
  if (v == "theory") return Mode::Theory;
  if (v == "both") return Mode::Both;
  if (v == "igcv") return Mode::Igcv;
  parse_error(node, "mode must be one of mc, theory, both, igcv");
}

TheoryKind parse_theory(const YAML::Node& node) {
  const auto v = scalar<std::string>(node, "theory");
  if (v == "auto") return TheoryKind::Auto;
  if (v == "closed_form") return TheoryKind::ClosedForm;
  if (v == "deterministic") return TheoryKind::Deterministic;
  parse_error(node, "theory must be one of auto, closed_form, deterministic");
}

}  // namespace

std::string to_string(Mode mode) {
  switch (mode) {
    case Mode::Mc: return "mc";
    case Mode::Theory: return "theory";
    case Mode::Both: return "both";
    case Mode::Igcv: return "igcv";
  }
  return "?";
}

std::string to_string(TheoryKind kind) {
  switch (kind) {
    case TheoryKind::Auto: return "auto";
    case TheoryKind::ClosedForm: return "closed_form";
    case TheoryKind::Deterministic: return "deterministic";
  }
  return "?";
}

double ExperimentConfig::lambda_at(int t) const {
  return lambda.size() == 1 ? lambda[0] : lambda[static_cast<std::size_t>(t)];
}

Eigen::Index ExperimentConfig::n_at(int t) const {
  if (t == 0 || n_schedule.empty()) return n0;
  return n_schedule[static_cast<std::size_t>(t) - 1];
}

void ExperimentConfig::validate() const {
  if (experiment_id.empty()) invalid("experiment_id must be nonempty");
  for (char c : experiment_id) {
    if (c == ',' || c == '"' || c == '\n' || c == '/') invalid("experiment_id may not contain , \" / or newlines");
  }
  if (n0 < 1) invalid("n0 must be a positive integer");
  if (p.has_value() == !rho.empty()) invalid("specify exactly one of p and rho");
  if (p && *p < 1) invalid("p must be positive");
  for (double r : rho) {
    if (!(r > 0.0) || !std::isfinite(r)) invalid("rho values must be positive");
    if (std::llround(r * static_cast<double>(n0)) < 1) invalid("rho * n0 rounds to zero features");
  }
  if (K < 0) invalid("K must be nonnegative");
  if (trials < 1) invalid("trials must be at least 1");
  if (n_test < 1) invalid("n_test must be at least 1");
  if (!(sigma2 >= 0.0) || !std::isfinite(sigma2)) invalid("sigma2 must be nonnegative");
  const auto steps = static_cast<std::size_t>(K) + 1;
  if (lambda.size() != 1 && lambda.size() != steps) invalid("lambda must be a scalar or have K+1 entries");
  for (double l : lambda) {
    if (!(l >= 0.0) || !std::isfinite(l)) invalid("lambda values must be nonnegative");
  }
  if (!n_schedule.empty() && n_schedule.size() != static_cast<std::size_t>(K)) {
    invalid("n_schedule must list n_1..n_K");
  }
  for (auto n : n_schedule) {
    if (n < 1) invalid("n_schedule entries must be positive");
  }
  if (wants_theory()) {
    for (auto pd : grid_dimensions(*this)) {
      for (int t = 0; t <= K; ++t) {
        if (lambda_at(t) == 0.0 && pd <= n_at(t)) {
          invalid("ridgeless theory needs p > n_t at every iteration (p = " + std::to_string(pd) + ")");
        }
      }
    }
  }
}

ExperimentConfig parse_config_text(const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    std::ostringstream os;
    os << "line " << e.mark.line + 1 << ", column " << e.mark.column + 1 << ": " << e.msg;
    fail(ErrorCode::ParseError, os.str());
  }
  if (!root.IsMap()) fail(ErrorCode::ParseError, "config must be a mapping of fields");
  check_keys(root,
             {"experiment_id", "mode", "covariance", "signal", "n0", "n", "p", "rho", "n_schedule", "sigma2",
              "sigma", "lambda", "K", "trials", "n_test", "base_seed", "output_dir", "theory"},
             "config");

  ExperimentConfig cfg;
  if (root["experiment_id"]) cfg.experiment_id = scalar<std::string>(root["experiment_id"], "experiment_id");
  if (root["mode"]) cfg.mode = parse_mode(root["mode"]);
  if (root["theory"]) cfg.theory = parse_theory(root["theory"]);
  if (root["covariance"]) cfg.covariance = parse_covariance(root["covariance"]);
  if (root["signal"]) cfg.signal = parse_signal(root["signal"]);
  if (root["n0"] && root["n"]) parse_error(root["n"], "give n0 or n, not both");
  if (root["n0"]) cfg.n0 = scalar<Eigen::Index>(root["n0"], "n0");
  if (root["n"]) cfg.n0 = scalar<Eigen::Index>(root["n"], "n");
  if (!root["n0"] && !root["n"]) invalid("n0 is required");
  if (root["p"]) cfg.p = scalar<Eigen::Index>(root["p"], "p");
  if (root["rho"]) cfg.rho = scalar_list<double>(root["rho"], "rho");
  if (root["n_schedule"]) cfg.n_schedule = scalar_list<Eigen::Index>(root["n_schedule"], "n_schedule");
  if (root["sigma2"] && root["sigma"]) parse_error(root["sigma"], "give sigma2 or sigma, not both");
  if (root["sigma2"]) cfg.sigma2 = scalar<double>(root["sigma2"], "sigma2");
  if (root["sigma"]) {
    const double s = scalar<double>(root["sigma"], "sigma");
    cfg.sigma2 = s * s;
  }
  if (root["lambda"]) cfg.lambda = scalar_list<double>(root["lambda"], "lambda");
  if (root["K"]) cfg.K = scalar<int>(root["K"], "K");
  if (root["trials"]) cfg.trials = scalar<int>(root["trials"], "trials");
  if (root["n_test"]) cfg.n_test = scalar<Eigen::Index>(root["n_test"], "n_test");
  if (root["base_seed"]) cfg.base_seed = scalar<std::uint64_t>(root["base_seed"], "base_seed");
  if (root["output_dir"]) cfg.output_dir = scalar<std::string>(root["output_dir"], "output_dir");
  cfg.validate();
  return cfg;
}

ExperimentConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::IoError, "cannot open config file " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

}  // namespace stlab::experiment
