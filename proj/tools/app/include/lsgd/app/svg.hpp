#pragma once

#include <optional>
#include <string>
#include <vector>

namespace lsgd::app {

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

struct ChartOptions {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log_x = false;
  bool log_y = false;
  /// Emitted as an XML comment when set.
  std::optional<std::string> timestamp;
};

/// Standalone SVG line chart. Points that are non-finite, or non-positive on
/// a log axis, are skipped.
std::string line_chart_svg(const std::vector<Series>& series, const ChartOptions& options);

}  // namespace lsgd::app
