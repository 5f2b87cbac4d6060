#include "fixthresh/plot.hpp"

#include <algorithm>

#include "fixthresh/csv.hpp"
#include "fixthresh/error.hpp"

namespace fixthresh::plot {

namespace {

constexpr double kMarginLeft = 62.0;
constexpr double kMarginRight = 18.0;
constexpr double kMarginTop = 42.0;
constexpr double kMarginBottom = 86.0;

const char* kPalette[] = {"#c0392b", "#2471a3", "#1e8449",
                          "#8e44ad", "#b7950b", "#34495e"};

std::string px(double v) { return csv::format_fixed(v, 2); }

}  // namespace

AxisMap x_axis_map(std::size_t n_points, int width) {
  const double span = width - kMarginLeft - kMarginRight;
  if (n_points <= 1) {
    // Single point sits centered; keep the map well defined.
    const double center = kMarginLeft + span / 2.0;
    return {0.0, 1.0, center, center + 1.0};
  }
  return {0.0, static_cast<double>(n_points - 1), kMarginLeft, kMarginLeft + span};
}

AxisMap y_axis_map(int height) {
  return {0.0, 1.0, static_cast<double>(height) - kMarginBottom, kMarginTop};
}

std::string render_svg(const LineChart& chart, int width, int height) {
  require(!chart.x_labels.empty(), ErrorCode::invalid_argument,
          "render_svg: no x positions");
  for (const auto& s : chart.series) {
    require(s.values.size() == chart.x_labels.size(), ErrorCode::invalid_argument,
            "render_svg: series length mismatch");
    require(s.ci_lo.size() == s.ci_hi.size() &&
                (s.ci_lo.empty() || s.ci_lo.size() == s.values.size()),
            ErrorCode::invalid_argument, "render_svg: CI length mismatch");
  }
  const AxisMap xm = x_axis_map(chart.x_labels.size(), width);
  const AxisMap ym = y_axis_map(height);

  std::string svg;
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" +
         std::to_string(width) + "\" height=\"" + std::to_string(height) +
         "\" viewBox=\"0 0 " + std::to_string(width) + " " +
         std::to_string(height) + "\">\n";
  svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg += "<text x=\"" + px(width / 2.0) + "\" y=\"22\" text-anchor=\"middle\" "
         "font-family=\"sans-serif\" font-size=\"15\">" + chart.title + "</text>\n";

  // Horizontal gridlines + y tick labels every 0.25.
  for (int i = 0; i <= 4; ++i) {
    const double v = 0.25 * i;
    const double y = ym.map(v);
    svg += "<line x1=\"" + px(kMarginLeft) + "\" y1=\"" + px(y) + "\" x2=\"" +
           px(width - kMarginRight) + "\" y2=\"" + px(y) +
           "\" stroke=\"#dddddd\"/>\n";
    svg += "<text x=\"" + px(kMarginLeft - 8) + "\" y=\"" + px(y + 4) +
           "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" +
           csv::format_fixed(v, 2) + "</text>\n";
  }
  svg += "<text x=\"16\" y=\"" + px(height / 2.0) +
         "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" "
         "transform=\"rotate(-90 16 " + px(height / 2.0) + ")\">" +
         chart.y_label + "</text>\n";

  // X labels, rotated to fit condition names.
  for (std::size_t i = 0; i < chart.x_labels.size(); ++i) {
    const double x = xm.map(static_cast<double>(i));
    const double y = height - kMarginBottom + 16.0;
    svg += "<text x=\"" + px(x) + "\" y=\"" + px(y) +
           "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\" "
           "transform=\"rotate(-35 " + px(x) + " " + px(y) + ")\">" +
           chart.x_labels[i] + "</text>\n";
  }

  // Axis frame.
  svg += "<line x1=\"" + px(kMarginLeft) + "\" y1=\"" + px(ym.map(0.0)) +
         "\" x2=\"" + px(width - kMarginRight) + "\" y2=\"" + px(ym.map(0.0)) +
         "\" stroke=\"black\"/>\n";
  svg += "<line x1=\"" + px(kMarginLeft) + "\" y1=\"" + px(ym.map(0.0)) +
         "\" x2=\"" + px(kMarginLeft) + "\" y2=\"" + px(ym.map(1.0)) +
         "\" stroke=\"black\"/>\n";

  for (std::size_t si = 0; si < chart.series.size(); ++si) {
    const Series& s = chart.series[si];
    const char* color = kPalette[si % (sizeof kPalette / sizeof *kPalette)];
    std::string pts;
    for (std::size_t i = 0; i < s.values.size(); ++i) {
      if (i) pts += " ";
      pts += px(xm.map(static_cast<double>(i))) + "," + px(ym.map(s.values[i]));
    }
    if (s.values.size() > 1) {
      svg += "<polyline fill=\"none\" stroke=\"" + std::string(color) +
             "\" stroke-width=\"2\" points=\"" + pts + "\"/>\n";
    }
    for (std::size_t i = 0; i < s.values.size(); ++i) {
      const double x = xm.map(static_cast<double>(i));
      svg += "<circle cx=\"" + px(x) + "\" cy=\"" + px(ym.map(s.values[i])) +
             "\" r=\"3\" fill=\"" + color + "\"/>\n";
      if (!s.ci_lo.empty()) {
        const double ylo = ym.map(std::clamp(s.ci_lo[i], 0.0, 1.0));
        const double yhi = ym.map(std::clamp(s.ci_hi[i], 0.0, 1.0));
        svg += "<line x1=\"" + px(x) + "\" y1=\"" + px(ylo) + "\" x2=\"" + px(x) +
               "\" y2=\"" + px(yhi) + "\" stroke=\"" + color + "\"/>\n";
        for (double yy : {ylo, yhi})
          svg += "<line x1=\"" + px(x - 3) + "\" y1=\"" + px(yy) + "\" x2=\"" +
                 px(x + 3) + "\" y2=\"" + px(yy) + "\" stroke=\"" + color + "\"/>\n";
      }
    }
    // Legend entry.
    const double lx = kMarginLeft + 12.0 + 150.0 * static_cast<double>(si);
    svg += "<rect x=\"" + px(lx) + "\" y=\"30\" width=\"12\" height=\"4\" fill=\"" +
           color + "\"/>\n";
    svg += "<text x=\"" + px(lx + 16) + "\" y=\"36\" font-family=\"sans-serif\" "
           "font-size=\"11\">" + s.label + "</text>\n";
  }
  svg += "</svg>\n";
  return svg;
}

}  // namespace fixthresh::plot
