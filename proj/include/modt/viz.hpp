#pragma once

#include "modt/data.hpp"
#include "modt/predict.hpp"
#include "modt/tree.hpp"

#include <cstddef>
#include <string>
#include <vector>

namespace modt {

/// Low-saturation fills for expert regions.
std::vector<std::string> region_palette(std::size_t experts);
/// Saturated colors for classes, shared by gate and tree plots.
std::vector<std::string> class_palette(std::size_t classes);

/// Expert chosen at the center of each cell of a regular grid over the two
/// gate features. Row 0 is the top (largest second feature).
struct GateGrid {
  std::size_t resolution = 0;
  double x_min = 0.0;
  double x_max = 1.0;
  double y_min = 0.0;
  double y_max = 1.0;
  std::vector<std::size_t> expert;  // resolution * resolution, row-major

  double cell_width() const { return (x_max - x_min) / static_cast<double>(resolution); }
  double cell_height() const { return (y_max - y_min) / static_cast<double>(resolution); }
  double center_x(std::size_t col) const { return x_min + (static_cast<double>(col) + 0.5) * cell_width(); }
  double center_y(std::size_t row) const { return y_max - (static_cast<double>(row) + 0.5) * cell_height(); }
  std::size_t at(std::size_t row, std::size_t col) const { return expert[row * resolution + col]; }
};

/// Axis ranges are the data extent of the gate features padded by 5%.
GateGrid gate_region_grid(const MoDTModel& model, const Dataset& data, std::size_t resolution);

struct GatePlotSpec {
  const MoDTModel& model;
  const Dataset& data;
  std::size_t resolution = 300;
  std::vector<std::string> regions;  // defaults to region_palette(e)
  std::vector<std::string> classes;  // defaults to class_palette(k)
};

/// SVG of the gate regions with the data drawn on top. Throws NotTwoDGate
/// for full-gate models.
std::string render_gating_plot(const GatePlotSpec& spec);

struct TreePlotSpec {
  const DecisionTree& tree;
  std::vector<std::string> feature_names;
  std::vector<std::string> class_names;
  std::vector<std::string> classes;  // defaults to class_palette(k)
  std::string title;
};

std::string render_tree(const TreePlotSpec& spec);

}  // namespace modt
