#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace commentguard::svg {

struct Series {
  std::string name;
  std::vector<std::pair<double, double>> points;
};

struct LineChart {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<Series> series;
  double y_min = 0.0;
  double y_max = 1.0;
};

/// Static SVG document; output depends only on the chart contents.
std::string render(const LineChart& chart);
void save(const LineChart& chart, const std::filesystem::path& path);

}  // namespace commentguard::svg
