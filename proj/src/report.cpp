#include "stlab/report.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>

#include "stlab/error.hpp"

namespace stlab::report {

using experiment::ResultRow;
using experiment::ResultTable;

std::string format_double(double v) {
  char buf[40];
  const int len = std::snprintf(buf, sizeof buf, "%.17g", v);
  return std::string(buf, static_cast<std::size_t>(len));
}

namespace {

template <class T>
std::string cell(const std::optional<T>& v) {
  if (!v) return {};
  if constexpr (std::is_floating_point_v<T>) {
    return format_double(*v);
  } else {
    return std::to_string(*v);
  }
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::IoError, "cannot open " + path + " for writing");
  out << content;
  out.close();
  if (!out) fail(ErrorCode::IoError, "failed writing " + path);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::IoError, "cannot open " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

template <class T>
std::optional<T> parse_cell(const std::string& s) {
  if (s.empty()) return std::nullopt;
  if constexpr (std::is_floating_point_v<T>) {
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end != s.c_str() + s.size()) fail(ErrorCode::ParseError, "bad number '" + s + "' in CSV");
    return v;
  } else {
    T v{};
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) fail(ErrorCode::ParseError, "bad integer '" + s + "' in CSV");
    return v;
  }
}

std::optional<double> field_value(const ResultRow& r, const std::string& name) {
  auto d = [](auto v) -> std::optional<double> {
    if (!v) return std::nullopt;
    return static_cast<double>(*v);
  };
  if (name == "rho") return r.rho;
  if (name == "n") return static_cast<double>(r.n);
  if (name == "p") return static_cast<double>(r.p);
  if (name == "t") return d(r.t);
  if (name == "lambda") return r.lambda;
  if (name == "trial") return d(r.trial);
  if (name == "mc_risk") return r.mc_risk;
  if (name == "theory_risk") return r.theory_risk;
  if (name == "theory_bias") return r.theory_bias;
  if (name == "theory_var") return r.theory_var;
  if (name == "igcv") return r.igcv;
  if (name == "seed") return d(r.seed);
  fail(ErrorCode::UnknownField, "unknown field '" + name + "'");
}

void require_field(const std::string& name, bool allow_id) {
  if (allow_id && name == "experiment_id") return;
  const auto& f = numeric_fields();
  if (std::find(f.begin(), f.end(), name) == f.end()) fail(ErrorCode::UnknownField, "unknown field '" + name + "'");
}

std::string short_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

std::string escape_xml(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

}  // namespace

const std::vector<std::string>& numeric_fields() {
  static const std::vector<std::string> fields{"rho",         "n",           "p",          "t",    "lambda",
                                               "trial",       "mc_risk",     "theory_risk", "theory_bias",
                                               "theory_var",  "igcv",        "seed"};
  return fields;
}

std::string to_csv(const ResultTable& table) {
  std::string out(kCsvHeader);
  out += '\n';
  for (const auto& r : table.rows) {
    out += r.experiment_id;
    out += ',' + format_double(r.rho);
    out += ',' + std::to_string(r.n);
    out += ',' + std::to_string(r.p);
    out += ',' + cell(r.t);
    out += ',' + cell(r.lambda);
    out += ',' + cell(r.trial);
    out += ',' + cell(r.mc_risk);
    out += ',' + cell(r.theory_risk);
    out += ',' + cell(r.theory_bias);
    out += ',' + cell(r.theory_var);
    out += ',' + cell(r.igcv);
    out += ',' + cell(r.seed);
    out += '\n';
  }
  for (const auto& note : table.notes) out += "# " + note + '\n';
  return out;
}

void emit_csv(const ResultTable& table, const std::string& path) { write_file(path, to_csv(table)); }

ResultTable parse_csv(const std::string& text) {
  ResultTable table;
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kCsvHeader) fail(ErrorCode::ParseError, "CSV header mismatch");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      table.notes.push_back(line.size() > 2 ? line.substr(2) : std::string());
      continue;
    }
    const auto c = split(line, ',');
    if (c.size() != 13) fail(ErrorCode::ParseError, "CSV row has " + std::to_string(c.size()) + " cells");
    ResultRow r;
    r.experiment_id = c[0];
    r.rho = parse_cell<double>(c[1]).value_or(0.0);
    r.n = parse_cell<Eigen::Index>(c[2]).value_or(0);
    r.p = parse_cell<Eigen::Index>(c[3]).value_or(0);
    r.t = parse_cell<int>(c[4]);
    r.lambda = parse_cell<double>(c[5]);
    r.trial = parse_cell<int>(c[6]);
    r.mc_risk = parse_cell<double>(c[7]);
    r.theory_risk = parse_cell<double>(c[8]);
    r.theory_bias = parse_cell<double>(c[9]);
    r.theory_var = parse_cell<double>(c[10]);
    r.igcv = parse_cell<double>(c[11]);
    r.seed = parse_cell<std::uint64_t>(c[12]);
    table.rows.push_back(std::move(r));
  }
  return table;
}

ResultTable read_csv(const std::string& path) { return parse_csv(read_file(path)); }

Chart build_chart(const ResultTable& table, const PlotSpec& spec) {
  require_field(spec.x_field, false);
  if (!spec.group_field.empty()) require_field(spec.group_field, true);
  if (spec.y_fields.empty()) fail(ErrorCode::UnknownField, "no y fields requested");
  for (const auto& y : spec.y_fields) require_field(y.name, false);

  Chart chart;
  chart.title = spec.title;
  chart.x_label = spec.x_field;
  chart.log_x = spec.log_x;
  chart.log_y = spec.log_y;
  for (const auto& y : spec.y_fields) {
    if (!chart.y_label.empty()) chart.y_label += " / ";
    chart.y_label += y.label.empty() ? y.name : y.label;
  }

  // Group keys in order of first appearance.
  std::vector<std::string> groups;
  auto group_of = [&](const ResultRow& r) -> std::string {
    if (spec.group_field.empty()) return {};
    if (spec.group_field == "experiment_id") return r.experiment_id;
    const auto v = field_value(r, spec.group_field);
    return v ? spec.group_field + "=" + short_number(*v) : spec.group_field + "=none";
  };
  for (const auto& r : table.rows) {
    const auto g = group_of(r);
    if (std::find(groups.begin(), groups.end(), g) == groups.end()) groups.push_back(g);
  }

  for (const auto& y : spec.y_fields) {
    const bool line = y.style == YField::Style::Line ||
                      (y.style == YField::Style::Auto && y.name.rfind("theory_", 0) == 0);
    for (const auto& g : groups) {
      std::map<double, std::vector<double>> by_x;
      for (const auto& r : table.rows) {
        if (group_of(r) != g) continue;
        const auto x = field_value(r, spec.x_field);
        const auto v = field_value(r, y.name);
        if (x && v) by_x[*x].push_back(*v + y.offset);
      }
      if (by_x.empty()) continue;
      Series s;
      const std::string label = y.label.empty() ? y.name : y.label;
      s.name = g.empty() ? label : label + " (" + g + ")";
      s.kind = line ? SeriesKind::Line : SeriesKind::Markers;
      for (const auto& [x, vals] : by_x) {
        const double m = static_cast<double>(vals.size());
        double mean = 0.0;
        for (double v : vals) mean += v;
        mean /= m;
        double se = 0.0;
        if (!line && vals.size() > 1) {
          double ss = 0.0;
          for (double v : vals) ss += (v - mean) * (v - mean);
          se = std::sqrt(ss / (m - 1.0) / m);
        }
        s.points.push_back({x, mean, se});
      }
      chart.series.push_back(std::move(s));
    }
  }
  return chart;
}

namespace {

struct Axis {
  double lo = 0.0, hi = 1.0;
  bool log = false;
  double map(double v, double a, double b) const {
    const double u = log ? (std::log10(v) - lo) / (hi - lo) : (v - lo) / (hi - lo);
    return a + u * (b - a);
  }
};

Axis make_axis(const std::vector<double>& vals, bool log) {
  Axis ax;
  ax.log = log;
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (double v : vals) {
    if (log && !(v > 0.0)) continue;
    const double u = log ? std::log10(v) : v;
    lo = std::min(lo, u);
    hi = std::max(hi, u);
  }
  if (!std::isfinite(lo)) lo = 0.0, hi = 1.0;
  if (hi - lo < 1e-12) {
    lo -= 0.5;
    hi += 0.5;
  }
  const double pad = 0.04 * (hi - lo);
  ax.lo = lo - pad;
  ax.hi = hi + pad;
  return ax;
}

std::vector<double> ticks(const Axis& ax) {
  std::vector<double> out;
  if (ax.log) {
    for (double e = std::ceil(ax.lo); e <= ax.hi; e += 1.0) out.push_back(std::pow(10.0, e));
    if (out.size() < 2) {
      out.clear();
      for (int i = 0; i <= 4; ++i) out.push_back(std::pow(10.0, ax.lo + (ax.hi - ax.lo) * i / 4.0));
    }
    return out;
  }
  const double span = ax.hi - ax.lo;
  const double raw = span / 6.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double step = mag;
  for (double m : {1.0, 2.0, 5.0, 10.0}) {
    if (m * mag >= raw) {
      step = m * mag;
      break;
    }
  }
  for (double v = std::ceil(ax.lo / step) * step; v <= ax.hi + 1e-12 * span; v += step) {
    out.push_back(std::abs(v) < 1e-12 * span ? 0.0 : v);
  }
  return out;
}

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

}  // namespace

std::string render_svg(const Chart& chart) {
  constexpr double W = 800, H = 520, left = 80, right = 240, top = 50, bottom = 60;
  const double x0 = left, x1 = W - right, y0 = H - bottom, y1 = top;

  std::vector<double> xs, ys;
  for (const auto& s : chart.series) {
    for (const auto& pt : s.points) {
      xs.push_back(pt.x);
      ys.push_back(pt.y - pt.err);
      ys.push_back(pt.y + pt.err);
      ys.push_back(pt.y);
    }
  }
  const Axis ax = make_axis(xs, chart.log_x);
  const Axis ay = make_axis(ys, chart.log_y);
  auto ok = [&](double x, double y) { return (!chart.log_x || x > 0.0) && (!chart.log_y || y > 0.0); };

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
     << "\" viewBox=\"0 0 " << W << ' ' << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  if (!chart.title.empty()) {
    os << "<text x=\"" << (x0 + x1) / 2 << "\" y=\"28\" text-anchor=\"middle\" font-size=\"15\">"
       << escape_xml(chart.title) << "</text>\n";
  }
  os << "<rect x=\"" << x0 << "\" y=\"" << y1 << "\" width=\"" << x1 - x0 << "\" height=\"" << y0 - y1
     << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (double v : ticks(ax)) {
    const double px = ax.map(v, x0, x1);
    os << "<line x1=\"" << px << "\" y1=\"" << y0 << "\" x2=\"" << px << "\" y2=\"" << y0 + 5
       << "\" stroke=\"black\"/><text x=\"" << px << "\" y=\"" << y0 + 18 << "\" text-anchor=\"middle\">"
       << short_number(v) << "</text>\n";
  }
  for (double v : ticks(ay)) {
    const double py = ay.map(v, y0, y1);
    os << "<line x1=\"" << x0 - 5 << "\" y1=\"" << py << "\" x2=\"" << x0 << "\" y2=\"" << py
       << "\" stroke=\"black\"/><text x=\"" << x0 - 8 << "\" y=\"" << py + 4 << "\" text-anchor=\"end\">"
       << short_number(v) << "</text>\n";
  }
  os << "<text x=\"" << (x0 + x1) / 2 << "\" y=\"" << H - 18 << "\" text-anchor=\"middle\">"
     << escape_xml(chart.x_label) << (chart.log_x ? " (log)" : "") << "</text>\n";
  os << "<text transform=\"translate(20," << (y0 + y1) / 2 << ") rotate(-90)\" text-anchor=\"middle\">"
     << escape_xml(chart.y_label) << (chart.log_y ? " (log)" : "") << "</text>\n";

  for (std::size_t k = 0; k < chart.series.size(); ++k) {
    const auto& s = chart.series[k];
    const char* color = kPalette[k % (sizeof kPalette / sizeof kPalette[0])];
    os << "<g class=\"" << (s.kind == SeriesKind::Line ? "line-series" : "marker-series") << "\">\n";
    if (s.kind == SeriesKind::Line) {
      os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
      for (const auto& pt : s.points) {
        if (ok(pt.x, pt.y)) os << ax.map(pt.x, x0, x1) << ',' << ay.map(pt.y, y0, y1) << ' ';
      }
      os << "\"/>\n";
    } else {
      for (const auto& pt : s.points) {
        if (!ok(pt.x, pt.y)) continue;
        const double px = ax.map(pt.x, x0, x1);
        const double py = ay.map(pt.y, y0, y1);
        if (pt.err > 0.0) {
          const double lo = pt.y - pt.err;
          const double pl = (chart.log_y && lo <= 0.0) ? y0 : ay.map(lo, y0, y1);
          const double ph = ay.map(pt.y + pt.err, y0, y1);
          os << "<line x1=\"" << px << "\" y1=\"" << pl << "\" x2=\"" << px << "\" y2=\"" << ph << "\" stroke=\""
             << color << "\"/>";
        }
        os << "<circle cx=\"" << px << "\" cy=\"" << py << "\" r=\"3.5\" fill=\"" << color << "\"/>\n";
      }
    }
    os << "</g>\n";
    const double ly = top + 16.0 * static_cast<double>(k);
    const double lx = x1 + 15;
    if (s.kind == SeriesKind::Line) {
      os << "<line x1=\"" << lx << "\" y1=\"" << ly << "\" x2=\"" << lx + 20 << "\" y2=\"" << ly << "\" stroke=\""
         << color << "\" stroke-width=\"2\"/>";
    } else {
      os << "<circle cx=\"" << lx + 10 << "\" cy=\"" << ly << "\" r=\"3.5\" fill=\"" << color << "\"/>";
    }
    os << "<text x=\"" << lx + 26 << "\" y=\"" << ly + 4 << "\">" << escape_xml(s.name) << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

void write_svg(const Chart& chart, const std::string& path) { write_file(path, render_svg(chart)); }

void emit_svg(const ResultTable& table, const PlotSpec& spec, const std::string& path) {
  write_svg(build_chart(table, spec), path);
}

}  // namespace stlab::report
