#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "stlab/experiment.hpp"

namespace stlab::report {

inline constexpr std::string_view kCsvHeader =
    "experiment_id,rho,n,p,t,lambda,trial,mc_risk,theory_risk,theory_bias,theory_var,igcv,seed";

std::string format_double(double v);  // 17 significant digits

std::string to_csv(const experiment::ResultTable& table);
void emit_csv(const experiment::ResultTable& table, const std::string& path);
experiment::ResultTable parse_csv(const std::string& text);
experiment::ResultTable read_csv(const std::string& path);

enum class SeriesKind { Line, Markers };

struct Point {
  double x = 0.0;
  double y = 0.0;
  double err = 0.0;  // half-width of the error bar
};

struct Series {
  std::string name;
  SeriesKind kind = SeriesKind::Line;
  std::vector<Point> points;
};

struct Chart {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log_x = false;
  bool log_y = false;
  std::vector<Series> series;
};

std::string render_svg(const Chart& chart);
void write_svg(const Chart& chart, const std::string& path);

struct YField {
  std::string name;
  enum class Style { Auto, Line, Markers } style = Style::Auto;  // Auto: theory_* lines, others markers
  double offset = 0.0;  // added to every value before plotting
  std::string label;    // legend text; defaults to the field name
};

struct PlotSpec {
  std::string x_field = "t";
  std::vector<YField> y_fields;
  std::string group_field = "rho";
  bool log_x = false;
  bool log_y = false;
  std::string title;
};

/// Lines are drawn through per-x means; markers show per-x trial means with
/// one standard error of the mean. Unknown fields raise UnknownField.
Chart build_chart(const experiment::ResultTable& table, const PlotSpec& spec);
void emit_svg(const experiment::ResultTable& table, const PlotSpec& spec, const std::string& path);

/// Columns holding numbers, in CSV order (experiment_id excluded).
const std::vector<std::string>& numeric_fields();

}  // namespace stlab::report
