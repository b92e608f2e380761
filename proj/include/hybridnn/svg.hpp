#pragma once

// Minimal SVG line charts for sweep and report output.

#include <string>
#include <vector>

namespace hybridnn::svg {

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  std::vector<double> band_low;   // optional shaded band, same length as x
  std::vector<double> band_high;
};

struct ReferenceLine {
  std::string label;
  double value = 0.0;
  bool vertical = false;
};

struct Chart {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<Series> series;
  std::vector<ReferenceLine> references;
  int width = 640;
  int height = 420;
};

std::string render(const Chart& chart);

}  // namespace hybridnn::svg
