#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace backaction::svg {

enum class Mark { points, line };

struct Series {
  std::vector<double> x;
  std::vector<double> y;
  Mark mark = Mark::line;
  std::string color = "#1f4e9c";
  std::string label;
};

/// Cell values in [0, 1], row-major; row 0 is drawn at the top.
struct Heatmap {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;
  double x_min = 0.0;
  double x_max = 1.0;
  std::vector<std::string> row_labels;
};

struct Panel {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<Series> series;
  std::optional<Heatmap> heatmap;
  bool log_x = false;
  bool log_y = false;
  std::optional<std::pair<double, double>> x_range;
  std::optional<std::pair<double, double>> y_range;
};

/// Panels stacked vertically in one self-contained SVG document. Output depends
/// only on the inputs.
std::string render(std::span<const Panel> panels, int width = 720, int panel_height = 260);

} // namespace backaction::svg
