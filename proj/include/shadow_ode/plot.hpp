#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

namespace shadow_ode::plot {

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  /// Palette index; series sharing a color share a legend swatch.
  std::size_t color = 0;
};

struct Figure {
  std::string title;
  std::string x_label = "x";
  std::string y_label = "y";
  std::vector<Series> series;
};

inline constexpr int kWidth = 960;
inline constexpr int kHeight = 640;
inline constexpr int kTicks = 10;

/// Self-contained SVG line plot: axes with kTicks intervals each, one polyline per series
/// (broken at non-finite points) and a legend.
void write_svg(std::ostream& os, const Figure& figure);

}  // namespace shadow_ode::plot
