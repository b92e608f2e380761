#include "hybridnn/svg.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fmt/format.h>
#include <limits>

namespace hybridnn::svg {
namespace {

constexpr std::array kPalette{"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                              "#ff7f0e", "#8c564b", "#e377c2", "#17becf"};

std::string escape(const std::string& text) {
  std::string out;
  for (char c : text) {
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

struct Bounds {
  double x0 = std::numeric_limits<double>::infinity();
  double x1 = -std::numeric_limits<double>::infinity();
  double y0 = std::numeric_limits<double>::infinity();
  double y1 = -std::numeric_limits<double>::infinity();

  void add_x(double x) {
    if (!std::isfinite(x)) return;
    x0 = std::min(x0, x);
    x1 = std::max(x1, x);
  }
  void add_y(double y) {
    if (!std::isfinite(y)) return;
    y0 = std::min(y0, y);
    y1 = std::max(y1, y);
  }
  void finish() {
    if (!std::isfinite(x0)) { x0 = 0.0; x1 = 1.0; }
    if (!std::isfinite(y0)) { y0 = 0.0; y1 = 1.0; }
    if (x1 - x0 < 1e-12) { x0 -= 0.5; x1 += 0.5; }
    if (y1 - y0 < 1e-12) { y0 -= 0.5; y1 += 0.5; }
    const double pad = 0.05 * (y1 - y0);
    y0 -= pad;
    y1 += pad;
  }
};

}  // namespace

std::string render(const Chart& chart) {
  const double left = 70, right = 160, top = 40, bottom = 55;
  const double pw = chart.width - left - right;
  const double ph = chart.height - top - bottom;

  Bounds b;
  for (const auto& s : chart.series) {
    for (double x : s.x) b.add_x(x);
    for (double y : s.y) b.add_y(y);
    for (double y : s.band_low) b.add_y(y);
    for (double y : s.band_high) b.add_y(y);
  }
  for (const auto& r : chart.references) {
    if (r.vertical) b.add_x(r.value); else b.add_y(r.value);
  }
  b.finish();

  auto sx = [&](double x) { return left + (x - b.x0) / (b.x1 - b.x0) * pw; };
  auto sy = [&](double y) { return top + (b.y1 - y) / (b.y1 - b.y0) * ph; };

  std::string out = fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" "
      "font-family=\"sans-serif\" font-size=\"12\">\n"
      "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n",
      chart.width, chart.height);
  out += fmt::format("<text x=\"{}\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">{}</text>\n",
                     left + pw / 2, escape(chart.title));
  out += fmt::format(
      "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#444\"/>\n", left,
      top, pw, ph);

  for (int i = 0; i <= 5; ++i) {
    const double fx = b.x0 + (b.x1 - b.x0) * i / 5.0;
    const double fy = b.y0 + (b.y1 - b.y0) * i / 5.0;
    out += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" text-anchor=\"middle\">{:.3g}</text>\n",
                       sx(fx), top + ph + 16, fx);
    out += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" text-anchor=\"end\">{:.3g}</text>\n",
                       left - 6, sy(fy) + 4, fy);
  }
  out += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n", left + pw / 2,
                     chart.height - 12, escape(chart.x_label));
  out += fmt::format(
      "<text x=\"16\" y=\"{}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {})\">{}</text>\n",
      top + ph / 2, top + ph / 2, escape(chart.y_label));

  for (std::size_t k = 0; k < chart.series.size(); ++k) {
    const auto& s = chart.series[k];
    const char* color = kPalette[k % kPalette.size()];
    const std::size_t n = std::min(s.x.size(), s.y.size());
    if (s.band_low.size() == n && s.band_high.size() == n && n > 0) {
      std::string pts;
      for (std::size_t i = 0; i < n; ++i) pts += fmt::format("{:.2f},{:.2f} ", sx(s.x[i]), sy(s.band_high[i]));
      for (std::size_t i = n; i-- > 0;) pts += fmt::format("{:.2f},{:.2f} ", sx(s.x[i]), sy(s.band_low[i]));
      out += fmt::format("<polygon points=\"{}\" fill=\"{}\" fill-opacity=\"0.2\" stroke=\"none\"/>\n",
                         pts, color);
    }
    std::string pts;
    for (std::size_t i = 0; i < n; ++i) {
      if (std::isfinite(s.x[i]) && std::isfinite(s.y[i])) {
        pts += fmt::format("{:.2f},{:.2f} ", sx(s.x[i]), sy(s.y[i]));
      }
    }
    out += fmt::format("<polyline points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"2\"/>\n",
                       pts, color);
    const double ly = top + 14 + 18 * double(k);
    out += fmt::format("<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"{}\" stroke-width=\"2\"/>\n",
                       left + pw + 10, ly, left + pw + 30, ly, color);
    out += fmt::format("<text x=\"{}\" y=\"{}\">{}</text>\n", left + pw + 34, ly + 4,
                       escape(s.label));
  }

  for (const auto& r : chart.references) {
    if (r.vertical) {
      out += fmt::format(
          "<line x1=\"{0:.2f}\" y1=\"{1}\" x2=\"{0:.2f}\" y2=\"{2}\" stroke=\"#888\" "
          "stroke-dasharray=\"5,4\"/>\n<text x=\"{0:.2f}\" y=\"{3}\" fill=\"#555\">{4}</text>\n",
          sx(r.value), top, top + ph, top - 4, escape(r.label));
    } else {
      out += fmt::format(
          "<line x1=\"{1}\" y1=\"{0:.2f}\" x2=\"{2}\" y2=\"{0:.2f}\" stroke=\"#888\" "
          "stroke-dasharray=\"5,4\"/>\n<text x=\"{3}\" y=\"{4:.2f}\" fill=\"#555\">{5}</text>\n",
          sy(r.value), left, left + pw, left + 4, sy(r.value) - 4, escape(r.label));
    }
  }
  out += "</svg>\n";
  return out;
}

}  // namespace hybridnn::svg
