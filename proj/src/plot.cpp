#include "shadow_ode/plot.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <set>

namespace shadow_ode::plot {

namespace {

constexpr double kLeft = 90, kRight = 220, kTop = 50, kBottom = 70;

constexpr std::array<const char*, 10> kPalette = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                                  "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string num(double v, const char* fmt = "%.2f") {
  char buf[48];
  std::snprintf(buf, sizeof buf, fmt, v);
  return buf;
}

struct Range {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  void add(double v) {
    if (!std::isfinite(v)) return;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  void settle() {
    if (!(lo <= hi)) lo = 0, hi = 1;
    if (hi - lo < 1e-12 * std::max(1.0, std::abs(hi))) {
      lo -= 0.5;
      hi += 0.5;
    }
  }
};

}  // namespace

void write_svg(std::ostream& os, const Figure& figure) {
  Range rx, ry;
  for (const auto& s : figure.series) {
    for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
      if (std::isfinite(s.x[i]) && std::isfinite(s.y[i])) {
        rx.add(s.x[i]);
        ry.add(s.y[i]);
      }
    }
  }
  rx.settle();
  ry.settle();

  const double pw = kWidth - kLeft - kRight;
  const double ph = kHeight - kTop - kBottom;
  auto px = [&](double x) { return kLeft + (x - rx.lo) / (rx.hi - rx.lo) * pw; };
  auto py = [&](double y) { return kTop + (ry.hi - y) / (ry.hi - ry.lo) * ph; };

  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
     << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << kWidth / 2 << "\" y=\"28\" text-anchor=\"middle\" font-size=\"16\">" << escape(figure.title)
     << "</text>\n";

  // Axes and ticks.
  os << "<g stroke=\"black\" stroke-width=\"1\">\n";
  os << "<line x1=\"" << num(kLeft) << "\" y1=\"" << num(kTop + ph) << "\" x2=\"" << num(kLeft + pw) << "\" y2=\""
     << num(kTop + ph) << "\"/>\n";
  os << "<line x1=\"" << num(kLeft) << "\" y1=\"" << num(kTop) << "\" x2=\"" << num(kLeft) << "\" y2=\""
     << num(kTop + ph) << "\"/>\n";
  for (int i = 0; i <= kTicks; ++i) {
    const double tx = kLeft + pw * i / kTicks;
    const double ty = kTop + ph - ph * i / kTicks;
    os << "<line x1=\"" << num(tx) << "\" y1=\"" << num(kTop + ph) << "\" x2=\"" << num(tx) << "\" y2=\""
       << num(kTop + ph + 5) << "\"/>\n";
    os << "<line x1=\"" << num(kLeft - 5) << "\" y1=\"" << num(ty) << "\" x2=\"" << num(kLeft) << "\" y2=\""
       << num(ty) << "\"/>\n";
  }
  os << "</g>\n<g fill=\"black\">\n";
  for (int i = 0; i <= kTicks; ++i) {
    const double vx = rx.lo + (rx.hi - rx.lo) * i / kTicks;
    const double vy = ry.lo + (ry.hi - ry.lo) * i / kTicks;
    os << "<text x=\"" << num(kLeft + pw * i / kTicks) << "\" y=\"" << num(kTop + ph + 20)
       << "\" text-anchor=\"middle\">" << num(vx, "%.4g") << "</text>\n";
    os << "<text x=\"" << num(kLeft - 8) << "\" y=\"" << num(kTop + ph - ph * i / kTicks + 4)
       << "\" text-anchor=\"end\">" << num(vy, "%.4g") << "</text>\n";
  }
  os << "<text x=\"" << num(kLeft + pw / 2) << "\" y=\"" << kHeight - 20 << "\" text-anchor=\"middle\">"
     << escape(figure.x_label) << "</text>\n";
  os << "<text x=\"20\" y=\"" << num(kTop + ph / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 20 "
     << num(kTop + ph / 2) << ")\">" << escape(figure.y_label) << "</text>\n</g>\n";

  for (const auto& s : figure.series) {
    const char* color = kPalette[s.color % kPalette.size()];
    std::string points;
    auto flush = [&] {
      if (!points.empty()) {
        os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"" << points
           << "\"/>\n";
        points.clear();
      }
    };
    for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) {
        flush();
        continue;
      }
      if (!points.empty()) points += ' ';
      points += num(px(s.x[i])) + ',' + num(py(s.y[i]));
    }
    flush();
  }

  // Legend: one entry per distinct (label, color).
  std::set<std::pair<std::size_t, std::string>> seen;
  double ly = kTop + 10;
  const double lx = kWidth - kRight + 20;
  for (const auto& s : figure.series) {
    if (!seen.insert({s.color, s.label}).second) continue;
    const char* color = kPalette[s.color % kPalette.size()];
    os << "<line x1=\"" << num(lx) << "\" y1=\"" << num(ly) << "\" x2=\"" << num(lx + 24) << "\" y2=\"" << num(ly)
       << "\" stroke=\"" << color << "\" stroke-width=\"3\"/>\n";
    os << "<text x=\"" << num(lx + 30) << "\" y=\"" << num(ly + 4) << "\">" << escape(s.label) << "</text>\n";
    ly += 20;
  }
  os << "</svg>\n";
}

}  // namespace shadow_ode::plot
