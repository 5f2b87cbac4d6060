#ifndef FIXTHRESH_PLOT_HPP
#define FIXTHRESH_PLOT_HPP

#include <string>
#include <vector>

namespace fixthresh::plot {

// Affine value -> pixel mapping for one chart axis.
struct AxisMap {
  double v0, v1;  // value range
  double p0, p1;  // pixel range
  double map(double v) const { return p0 + (v - v0) * (p1 - p0) / (v1 - v0); }
};

struct Series {
  std::string label;
  std::vector<double> values;             // one per x position
  std::vector<double> ci_lo, ci_hi;       // empty, or one per x position
};

struct LineChart {
  std::string title;
  std::string y_label;
  std::vector<std::string> x_labels;
  std::vector<Series> series;             // values in [0,1]
};

inline constexpr int kChartWidth = 760;
inline constexpr int kChartHeight = 420;

// Pixel mapping used by render_svg; x maps point index, y maps [0,1].
AxisMap x_axis_map(std::size_t n_points, int width = kChartWidth);
AxisMap y_axis_map(int height = kChartHeight);

std::string render_svg(const LineChart& chart, int width = kChartWidth,
                       int height = kChartHeight);

}  // namespace fixthresh::plot

#endif
