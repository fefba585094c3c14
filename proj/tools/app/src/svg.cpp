#include "lsgd/app/svg.hpp"

#include "lsgd/app/artifacts.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>

namespace lsgd::app {
namespace {

constexpr double kWidth = 640.0, kHeight = 420.0;
constexpr double kLeft = 70.0, kRight = 160.0, kTop = 40.0, kBottom = 50.0;
constexpr std::array<const char*, 6> kColors{"#1f77b4", "#d62728", "#2ca02c",
                                             "#9467bd", "#ff7f0e", "#8c564b"};

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string fmt(double v) {
  // Two decimals keep the files small and stable.
  const double r = std::round(v * 100.0) / 100.0;
  return format_number(r == 0.0 ? 0.0 : r);
}

std::string tick_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

struct Axis {
  bool log = false;
  double lo = 0.0, hi = 1.0;

  bool usable(double v) const { return std::isfinite(v) && (!log || v > 0.0); }
  double t(double v) const { return log ? std::log10(v) : v; }
  double frac(double v) const { return (t(v) - t(lo)) / (t(hi) - t(lo)); }

  void fit(double a, double b) {
    lo = a;
    hi = b;
    if (hi <= lo) {
      const double pad = log ? 10.0 : std::max(1.0, std::abs(lo) * 0.1);
      if (log) {
        lo /= pad;
        hi *= pad;
      } else {
        lo -= pad;
        hi += pad;
      }
    }
  }

  std::vector<double> ticks() const {
    std::vector<double> out;
    if (log) {
      for (double e = std::ceil(std::log10(lo)); e <= std::floor(std::log10(hi)); e += 1.0) {
        out.push_back(std::pow(10.0, e));
      }
      if (out.size() < 2) out = {lo, hi};
    } else {
      for (int i = 0; i <= 4; ++i) out.push_back(lo + (hi - lo) * i / 4.0);
    }
    return out;
  }
};

}  // namespace

std::string line_chart_svg(const std::vector<Series>& series, const ChartOptions& options) {
  Axis ax{.log = options.log_x}, ay{.log = options.log_y};
  double xlo = std::numeric_limits<double>::infinity(), xhi = -xlo, ylo = xlo, yhi = -xlo;
  for (const Series& s : series) {
    for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
      if (!ax.usable(s.x[i]) || !ay.usable(s.y[i])) continue;
      xlo = std::min(xlo, s.x[i]);
      xhi = std::max(xhi, s.x[i]);
      ylo = std::min(ylo, s.y[i]);
      yhi = std::max(yhi, s.y[i]);
    }
  }
  if (!std::isfinite(xlo)) {
    xlo = ax.log ? 1.0 : 0.0;
    xhi = ax.log ? 10.0 : 1.0;
    ylo = ay.log ? 1.0 : 0.0;
    yhi = ay.log ? 10.0 : 1.0;
  }
  ax.fit(xlo, xhi);
  ay.fit(ylo, yhi);

  const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
  auto px = [&](double v) { return kLeft + ax.frac(v) * pw; };
  auto py = [&](double v) { return kTop + (1.0 - ay.frac(v)) * ph; };

  std::string o;
  o += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  if (options.timestamp) o += "<!-- generated " + escape(*options.timestamp) + " -->\n";
  o += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fmt(kWidth) + "\" height=\"" +
       fmt(kHeight) + "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o += "<text x=\"" + fmt(kLeft + pw / 2) + "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" +
       escape(options.title) + "</text>\n";
  o += "<rect x=\"" + fmt(kLeft) + "\" y=\"" + fmt(kTop) + "\" width=\"" + fmt(pw) + "\" height=\"" +
       fmt(ph) + "\" fill=\"none\" stroke=\"black\"/>\n";

  for (double t : ax.ticks()) {
    const std::string x = fmt(px(t));
    o += "<line x1=\"" + x + "\" y1=\"" + fmt(kTop + ph) + "\" x2=\"" + x + "\" y2=\"" +
         fmt(kTop + ph + 5) + "\" stroke=\"black\"/>\n";
    o += "<text x=\"" + x + "\" y=\"" + fmt(kTop + ph + 18) + "\" text-anchor=\"middle\">" +
         tick_label(t) + "</text>\n";
  }
  for (double t : ay.ticks()) {
    const std::string y = fmt(py(t));
    o += "<line x1=\"" + fmt(kLeft - 5) + "\" y1=\"" + y + "\" x2=\"" + fmt(kLeft) + "\" y2=\"" + y +
         "\" stroke=\"black\"/>\n";
    o += "<text x=\"" + fmt(kLeft - 8) + "\" y=\"" + fmt(py(t) + 4) + "\" text-anchor=\"end\">" +
         tick_label(t) + "</text>\n";
  }
  o += "<text x=\"" + fmt(kLeft + pw / 2) + "\" y=\"" + fmt(kHeight - 12) +
       "\" text-anchor=\"middle\">" + escape(options.x_label) + "</text>\n";
  o += "<text transform=\"translate(16," + fmt(kTop + ph / 2) +
       ") rotate(-90)\" text-anchor=\"middle\">" + escape(options.y_label) + "</text>\n";

  for (std::size_t k = 0; k < series.size(); ++k) {
    const Series& s = series[k];
    const char* color = kColors[k % kColors.size()];
    std::string points;
    for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
      if (!ax.usable(s.x[i]) || !ay.usable(s.y[i])) continue;
      if (!points.empty()) points += ' ';
      points += fmt(px(s.x[i])) + "," + fmt(py(s.y[i]));
    }
    o += "<polyline fill=\"none\" stroke=\"" + std::string(color) +
         "\" stroke-width=\"1.5\" points=\"" + points + "\"/>\n";
    const double ly = kTop + 12 + 18 * static_cast<double>(k);
    o += "<line x1=\"" + fmt(kLeft + pw + 12) + "\" y1=\"" + fmt(ly) + "\" x2=\"" +
         fmt(kLeft + pw + 32) + "\" y2=\"" + fmt(ly) + "\" stroke=\"" + color +
         "\" stroke-width=\"2\"/>\n";
    o += "<text x=\"" + fmt(kLeft + pw + 38) + "\" y=\"" + fmt(ly + 4) + "\">" + escape(s.label) +
         "</text>\n";
  }
  o += "</svg>\n";
  return o;
}

}  // namespace lsgd::app
