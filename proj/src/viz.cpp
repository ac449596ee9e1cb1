#include "modt/viz.hpp"

#include "modt/error.hpp"
#include "modt/gating.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace modt {
namespace {

std::string hsl_hex(double hue, double sat, double light) {
  hue = std::fmod(hue, 360.0);
  const double c = (1.0 - std::abs(2.0 * light - 1.0)) * sat;
  const double hp = hue / 60.0;
  const double x = c * (1.0 - std::abs(std::fmod(hp, 2.0) - 1.0));
  double r = 0, g = 0, b = 0;
  if (hp < 1) { r = c; g = x; }
  else if (hp < 2) { r = x; g = c; }
  else if (hp < 3) { g = c; b = x; }
  else if (hp < 4) { g = x; b = c; }
  else if (hp < 5) { r = x; b = c; }
  else { r = c; b = x; }
  const double m = light - c / 2.0;
  const auto byte = [&](double v) { return static_cast<int>(std::lround((v + m) * 255.0)); };
  char buf[8];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", byte(r), byte(g), byte(b));
  return buf;
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  std::string s = buf;
  while (s.back() == '0') s.pop_back();
  if (s.back() == '.') s.pop_back();
  if (s == "-0") s = "0";
  return s;
}

std::string label_num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

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

void open_svg(std::ostringstream& out, double width, double height) {
  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" << num(width) << "\" height=\""
      << num(height) << "\" viewBox=\"0 0 " << num(width) << ' ' << num(height)
      << "\" font-family=\"Helvetica, Arial, sans-serif\" font-size=\"12\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n";
}

}  // namespace

std::vector<std::string> region_palette(std::size_t experts) {
  std::vector<std::string> out;
  for (std::size_t j = 0; j < experts; ++j)
    out.push_back(hsl_hex(120.0 + 360.0 * static_cast<double>(j) / static_cast<double>(experts), 0.45, 0.86));
  return out;
}

std::vector<std::string> class_palette(std::size_t classes) {
  std::vector<std::string> out;
  for (std::size_t c = 0; c < classes; ++c)
    out.push_back(hsl_hex(15.0 + 360.0 * static_cast<double>(c) / static_cast<double>(classes), 0.85, 0.40));
  return out;
}

GateGrid gate_region_grid(const MoDTModel& model, const Dataset& data, std::size_t resolution) {
  if (!model.gating.mode.is_two_d())
    throw Error(ErrorKind::NotTwoDGate, "gate regions can only be drawn for 2D gates; retrain with --gate 2d");
  if (resolution < 1) throw Error(ErrorKind::InvalidConfig, "grid resolution must be positive");
  if (data.rows() == 0) throw Error(ErrorKind::EmptyInput, "no data to derive the plot range from");
  const auto [fi, fj] = model.gating.mode.features;
  if (fi >= data.features() || fj >= data.features())
    throw Error(ErrorKind::WidthMismatch, "gate features are outside the dataset columns");

  const auto padded = [&](std::size_t f, double& lo, double& hi) {
    lo = data.X.col(static_cast<Eigen::Index>(f)).minCoeff();
    hi = data.X.col(static_cast<Eigen::Index>(f)).maxCoeff();
    const double pad = hi > lo ? 0.05 * (hi - lo) : 0.5;
    lo -= pad;
    hi += pad;
  };
  GateGrid grid;
  grid.resolution = resolution;
  padded(fi, grid.x_min, grid.x_max);
  padded(fj, grid.y_min, grid.y_max);

  Matrix Xg(static_cast<Eigen::Index>(resolution * resolution), 3);
  for (std::size_t r = 0; r < resolution; ++r) {
    for (std::size_t c = 0; c < resolution; ++c) {
      const auto i = static_cast<Eigen::Index>(r * resolution + c);
      Xg(i, 0) = grid.center_x(c);
      Xg(i, 1) = grid.center_y(r);
      Xg(i, 2) = 1.0;
    }
  }
  const Matrix G = gating_values(Xg, model.gating.theta);
  grid.expert.resize(resolution * resolution);
  for (Eigen::Index i = 0; i < G.rows(); ++i)
    grid.expert[static_cast<std::size_t>(i)] = select_expert({G.data() + i * G.cols(), static_cast<std::size_t>(G.cols())});
  return grid;
}

std::string render_gating_plot(const GatePlotSpec& spec) {
  const MoDTModel& model = spec.model;
  const GateGrid grid = gate_region_grid(model, spec.data, spec.resolution);
  const std::size_t e = model.gating.experts();
  const std::size_t k = std::max(model.class_names.size(), spec.data.classes());
  const auto regions = spec.regions.size() >= e ? spec.regions : region_palette(e);
  const auto classes = spec.classes.size() >= k ? spec.classes : class_palette(k);

  constexpr double left = 70, top = 30, size = 540, legend_x = 640, width = 860, height = 630;
  const double cw = size / static_cast<double>(grid.resolution);
  const auto px = [&](double v) { return left + (v - grid.x_min) / (grid.x_max - grid.x_min) * size; };
  const auto py = [&](double v) { return top + (grid.y_max - v) / (grid.y_max - grid.y_min) * size; };

  std::ostringstream out;
  open_svg(out, width, height);

  // Regions: horizontal runs of equal cells merged into one rect.
  out << "<g class=\"regions\" shape-rendering=\"crispEdges\">\n";
  for (std::size_t r = 0; r < grid.resolution; ++r) {
    std::size_t c = 0;
    while (c < grid.resolution) {
      const std::size_t j = grid.at(r, c);
      std::size_t end = c + 1;
      while (end < grid.resolution && grid.at(r, end) == j) ++end;
      out << "<rect class=\"cell\" data-expert=\"" << j << "\" x=\"" << num(left + static_cast<double>(c) * cw)
          << "\" y=\"" << num(top + static_cast<double>(r) * cw) << "\" width=\""
          << num(static_cast<double>(end - c) * cw) << "\" height=\"" << num(cw) << "\" fill=\"" << regions[j]
          << "\"/>\n";
      c = end;
    }
  }
  out << "</g>\n";

  // Axes.
  const auto [fi, fj] = model.gating.mode.features;
  const auto name_of = [&](std::size_t f) {
    if (f < spec.data.feature_names.size()) return spec.data.feature_names[f];
    if (f < model.feature_names.size()) return model.feature_names[f];
    return "x" + std::to_string(f);
  };
  out << "<g class=\"axes\" stroke=\"#333333\" fill=\"none\">\n"
      << "<rect x=\"" << num(left) << "\" y=\"" << num(top) << "\" width=\"" << num(size) << "\" height=\""
      << num(size) << "\"/>\n";
  for (int t = 0; t <= 4; ++t) {
    const double fx = grid.x_min + (grid.x_max - grid.x_min) * t / 4.0;
    const double fy = grid.y_min + (grid.y_max - grid.y_min) * t / 4.0;
    out << "<line x1=\"" << num(px(fx)) << "\" y1=\"" << num(top + size) << "\" x2=\"" << num(px(fx)) << "\" y2=\""
        << num(top + size + 5) << "\"/>\n";
    out << "<line x1=\"" << num(left - 5) << "\" y1=\"" << num(py(fy)) << "\" x2=\"" << num(left) << "\" y2=\""
        << num(py(fy)) << "\"/>\n";
  }
  out << "</g>\n<g class=\"tick-labels\" fill=\"#333333\">\n";
  for (int t = 0; t <= 4; ++t) {
    const double fx = grid.x_min + (grid.x_max - grid.x_min) * t / 4.0;
    const double fy = grid.y_min + (grid.y_max - grid.y_min) * t / 4.0;
    out << "<text x=\"" << num(px(fx)) << "\" y=\"" << num(top + size + 18) << "\" text-anchor=\"middle\">"
        << label_num(fx) << "</text>\n";
    out << "<text x=\"" << num(left - 8) << "\" y=\"" << num(py(fy) + 4) << "\" text-anchor=\"end\">"
        << label_num(fy) << "</text>\n";
  }
  out << "<text class=\"axis-label\" x=\"" << num(left + size / 2) << "\" y=\"" << num(top + size + 38)
      << "\" text-anchor=\"middle\" font-size=\"14\">" << escape(name_of(fi)) << "</text>\n"
      << "<text class=\"axis-label\" x=\"" << num(18) << "\" y=\"" << num(top + size / 2)
      << "\" text-anchor=\"middle\" font-size=\"14\" transform=\"rotate(-90 18 " << num(top + size / 2) << ")\">"
      << escape(name_of(fj)) << "</text>\n</g>\n";

  // Data points.
  out << "<g class=\"points\" stroke=\"#1a1a1a\" stroke-width=\"0.6\">\n";
  for (std::size_t i = 0; i < spec.data.rows(); ++i) {
    const double x = spec.data.X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(fi));
    const double y = spec.data.X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(fj));
    const int label = spec.data.y.empty() ? 0 : spec.data.y[i];
    out << "<circle class=\"point\" data-label=\"" << label << "\" cx=\"" << num(px(x)) << "\" cy=\"" << num(py(y))
        << "\" r=\"3.5\" fill=\"" << classes[static_cast<std::size_t>(label)] << "\"/>\n";
  }
  out << "</g>\n";

  // Legends: experts top right, classes bottom right.
  out << "<g class=\"legend experts\">\n<text x=\"" << num(legend_x) << "\" y=\"" << num(top + 10)
      << "\" font-weight=\"bold\">Regions (experts)</text>\n";
  for (std::size_t j = 0; j < e; ++j) {
    const double y = top + 24 + 22 * static_cast<double>(j);
    out << "<rect x=\"" << num(legend_x) << "\" y=\"" << num(y) << "\" width=\"16\" height=\"16\" fill=\""
        << regions[j] << "\" stroke=\"#555555\"/>\n<text x=\"" << num(legend_x + 24) << "\" y=\"" << num(y + 12)
        << "\">DT " << j << "</text>\n";
  }
  out << "</g>\n<g class=\"legend classes\">\n";
  const double class_top = top + size - 22 * static_cast<double>(k) - 14;
  out << "<text x=\"" << num(legend_x) << "\" y=\"" << num(class_top) << "\" font-weight=\"bold\">Classes</text>\n";
  for (std::size_t c = 0; c < k; ++c) {
    const double y = class_top + 14 + 22 * static_cast<double>(c);
    const std::string name = c < model.class_names.size() ? model.class_names[c] : std::to_string(c);
    out << "<circle cx=\"" << num(legend_x + 8) << "\" cy=\"" << num(y + 8) << "\" r=\"5\" fill=\"" << classes[c]
        << "\" stroke=\"#1a1a1a\" stroke-width=\"0.6\"/>\n<text x=\"" << num(legend_x + 24) << "\" y=\""
        << num(y + 12) << "\">" << escape(name) << "</text>\n";
  }
  out << "</g>\n</svg>\n";
  return out.str();
}

std::string render_tree(const TreePlotSpec& spec) {
  const DecisionTree& tree = spec.tree;
  const auto& nodes = tree.nodes();
  if (nodes.empty()) throw Error(ErrorKind::EmptyInput, "tree has no nodes");
  const auto k = static_cast<std::size_t>(tree.n_classes());
  const auto classes = spec.classes.size() >= k ? spec.classes : class_palette(k);

  // Leaves take consecutive slots left to right; parents sit above the
  // midpoint of their children.
  std::vector<double> slot(nodes.size(), 0.0);
  std::vector<int> level(nodes.size(), 0);
  double next_leaf = 0.0;
  const auto place = [&](auto&& self, int index, int depth) -> void {
    const TreeNode& node = nodes[static_cast<std::size_t>(index)];
    level[static_cast<std::size_t>(index)] = depth;
    if (node.is_leaf()) {
      slot[static_cast<std::size_t>(index)] = next_leaf++;
      return;
    }
    self(self, node.left, depth + 1);
    self(self, node.right, depth + 1);
    slot[static_cast<std::size_t>(index)] =
        (slot[static_cast<std::size_t>(node.left)] + slot[static_cast<std::size_t>(node.right)]) / 2.0;
  };
  place(place, 0, 0);

  constexpr double box_w = 170, box_h = 48, gap_x = 20, gap_y = 60, margin = 20, legend_w = 180;
  const int depth = tree.depth();
  const double title_h = spec.title.empty() ? 0 : 28;
  const double content_w = next_leaf * (box_w + gap_x) - gap_x;
  const double width = margin * 2 + content_w + legend_w;
  const double height = margin * 2 + title_h + (depth + 1) * box_h + depth * gap_y;
  const auto node_x = [&](std::size_t i) { return margin + slot[i] * (box_w + gap_x); };
  const auto node_y = [&](std::size_t i) { return margin + title_h + level[i] * (box_h + gap_y); };

  const auto feature_name = [&](int f) {
    const auto idx = static_cast<std::size_t>(f);
    return idx < spec.feature_names.size() ? spec.feature_names[idx] : "x" + std::to_string(f);
  };
  const auto class_name = [&](std::size_t c) {
    return c < spec.class_names.size() ? spec.class_names[c] : std::to_string(c);
  };

  std::ostringstream out;
  open_svg(out, width, height);
  if (!spec.title.empty())
    out << "<text x=\"" << num(margin) << "\" y=\"" << num(margin + 14) << "\" font-size=\"15\" font-weight=\"bold\">"
        << escape(spec.title) << "</text>\n";

  out << "<g class=\"edges\" stroke=\"#666666\" stroke-width=\"1.2\">\n";
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (nodes[i].is_leaf()) continue;
    for (int child : {nodes[i].left, nodes[i].right}) {
      const auto c = static_cast<std::size_t>(child);
      out << "<line class=\"edge\" x1=\"" << num(node_x(i) + box_w / 2) << "\" y1=\"" << num(node_y(i) + box_h)
          << "\" x2=\"" << num(node_x(c) + box_w / 2) << "\" y2=\"" << num(node_y(c)) << "\"/>\n";
    }
  }
  out << "</g>\n<g class=\"edge-labels\" fill=\"#444444\" font-size=\"11\">\n";
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (nodes[i].is_leaf()) continue;
    const auto l = static_cast<std::size_t>(nodes[i].left);
    const auto r = static_cast<std::size_t>(nodes[i].right);
    const double my = (node_y(i) + box_h + node_y(l)) / 2;
    out << "<text x=\"" << num((node_x(i) + node_x(l)) / 2 + box_w / 2 - 8) << "\" y=\"" << num(my)
        << "\" text-anchor=\"end\">yes</text>\n<text x=\"" << num((node_x(i) + node_x(r)) / 2 + box_w / 2 + 8)
        << "\" y=\"" << num(my) << "\">no</text>\n";
  }
  out << "</g>\n";

  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const TreeNode& node = nodes[i];
    const double x = node_x(i);
    const double y = node_y(i);
    if (!node.is_leaf()) {
      out << "<g class=\"node internal\">\n<rect x=\"" << num(x) << "\" y=\"" << num(y) << "\" width=\""
          << num(box_w) << "\" height=\"" << num(box_h)
          << "\" rx=\"6\" fill=\"#f4f4f4\" stroke=\"#444444\"/>\n<text x=\"" << num(x + box_w / 2) << "\" y=\""
          << num(y + 20) << "\" text-anchor=\"middle\">" << escape(feature_name(node.feature)) << " ≤ "
          << label_num(node.threshold) << "</text>\n<text x=\"" << num(x + box_w / 2) << "\" y=\"" << num(y + 38)
          << "\" text-anchor=\"middle\" font-size=\"10\" fill=\"#666666\">weight " << label_num(node.weight)
          << "</text>\n</g>\n";
      continue;
    }
    out << "<g class=\"node leaf\" data-class=\"" << node.majority << "\">\n<rect x=\"" << num(x) << "\" y=\""
        << num(y) << "\" width=\"" << num(box_w) << "\" height=\"" << num(box_h)
        << "\" rx=\"6\" fill=\"#ffffff\" stroke=\"" << classes[static_cast<std::size_t>(node.majority)]
        << "\" stroke-width=\"2\"/>\n";
    double bx = x + 8;
    const double bar_w = box_w - 16;
    for (std::size_t c = 0; c < k; ++c) {
      const double w = bar_w * node.distribution[c];
      if (w <= 0.0) continue;
      out << "<rect class=\"bar\" x=\"" << num(bx) << "\" y=\"" << num(y + 8) << "\" width=\"" << num(w)
          << "\" height=\"12\" fill=\"" << classes[c] << "\"/>\n";
      bx += w;
    }
    out << "<text x=\"" << num(x + box_w / 2) << "\" y=\"" << num(y + 38) << "\" text-anchor=\"middle\">"
        << escape(class_name(static_cast<std::size_t>(node.majority))) << " ("
        << label_num(node.distribution[static_cast<std::size_t>(node.majority)]) << ")</text>\n</g>\n";
  }

  const double lx = margin + content_w + 30;
  out << "<g class=\"legend classes\">\n<text x=\"" << num(lx) << "\" y=\"" << num(margin + title_h + 12)
      << "\" font-weight=\"bold\">Classes</text>\n";
  for (std::size_t c = 0; c < k; ++c) {
    const double y = margin + title_h + 24 + 22 * static_cast<double>(c);
    out << "<rect x=\"" << num(lx) << "\" y=\"" << num(y) << "\" width=\"14\" height=\"14\" fill=\"" << classes[c]
        << "\"/>\n<text x=\"" << num(lx + 22) << "\" y=\"" << num(y + 11) << "\">" << escape(class_name(c))
        << "</text>\n";
  }
  out << "</g>\n</svg>\n";
  return out.str();
}

}  // namespace modt
