#include "modt/tree.hpp"

#include "modt/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace modt {
namespace {

// Weighted Gini scaled by the node mass: M - sum m_c^2 / M.
double scaled_gini(std::span<const double> mass, double total) {
  if (total <= 0.0) return 0.0;
  double sq = 0.0;
  for (double m : mass) sq += m * m;
  return total - sq / total;
}

int argmax(std::span<const double> values) {
  int best = 0;
  for (std::size_t c = 1; c < values.size(); ++c)
    if (values[c] > values[static_cast<std::size_t>(best)]) best = static_cast<int>(c);
  return best;
}

struct Split {
  int feature = -1;
  double threshold = 0.0;
  double score = std::numeric_limits<double>::infinity();
};

class Builder {
 public:
  Builder(const Matrix& X, std::span<const int> y, std::span<const double> w, int k, const TreeOptions& options)
      : X_(X), y_(y), w_(w), k_(static_cast<std::size_t>(k)), options_(options) {}

  std::vector<TreeNode> run() {
    std::vector<std::size_t> all(y_.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    build(std::move(all), 0, nullptr);
    return std::move(nodes_);
  }

 private:
  double x(std::size_t row, int feature) const {
    return X_(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(feature));
  }

  int build(std::vector<std::size_t> rows, int depth, const std::vector<double>* parent) {
    std::vector<double> mass(k_, 0.0);
    std::vector<double> split_mass(k_, 0.0);
    std::vector<std::size_t> eligible;
    double total = 0.0;
    for (std::size_t r : rows) {
      mass[static_cast<std::size_t>(y_[r])] += w_[r];
      total += w_[r];
      if (w_[r] >= kMinSplitWeight) {
        eligible.push_back(r);
        split_mass[static_cast<std::size_t>(y_[r])] += w_[r];
      }
    }

    TreeNode node;
    node.weight = total;
    node.impurity = total > 0.0 ? scaled_gini(mass, total) / total : 0.0;
    if (total > 0.0) {
      node.distribution.resize(k_);
      for (std::size_t c = 0; c < k_; ++c) node.distribution[c] = mass[c] / total;
    } else if (parent != nullptr) {
      node.distribution = *parent;
    } else {
      node.distribution.assign(k_, 1.0 / static_cast<double>(k_));
    }
    node.majority = argmax(node.distribution);

    const int index = static_cast<int>(nodes_.size());
    nodes_.push_back(node);

    const bool depth_reached = options_.max_depth > 0 && depth >= options_.max_depth;
    const auto classes_present = std::count_if(split_mass.begin(), split_mass.end(), [](double m) { return m > 0.0; });
    if (depth_reached || eligible.size() < 2 || classes_present < 2) return index;

    const Split split = best_split(eligible, split_mass);
    if (split.feature < 0) return index;

    std::vector<std::size_t> left;
    std::vector<std::size_t> right;
    for (std::size_t r : rows) (x(r, split.feature) <= split.threshold ? left : right).push_back(r);

    const std::vector<double> dist = nodes_[static_cast<std::size_t>(index)].distribution;
    const int l = build(std::move(left), depth + 1, &dist);
    const int r = build(std::move(right), depth + 1, &dist);
    TreeNode& stored = nodes_[static_cast<std::size_t>(index)];
    stored.feature = split.feature;
    stored.threshold = split.threshold;
    stored.left = l;
    stored.right = r;
    return index;
  }

  Split best_split(std::vector<std::size_t>& rows, std::span<const double> mass) {
    double total = 0.0;
    for (double m : mass) total += m;
    const double parent_score = scaled_gini(mass, total);
    const double tol = 1e-12 * total;

    const auto n_features = static_cast<int>(X_.cols());
    std::vector<int> order(static_cast<std::size_t>(n_features));
    std::iota(order.begin(), order.end(), 0);
    const bool subsample = options_.max_features > 0 && options_.max_features < order.size();
    if (subsample) options_.rng->shuffle(std::span(order));

    Split best;
    std::vector<double> left(k_);
    std::vector<double> right(k_);
    std::size_t usable_features = 0;
    for (int f : order) {
      if (subsample && usable_features >= options_.max_features) break;
      std::sort(rows.begin(), rows.end(), [&](std::size_t a, std::size_t b) {
        const double xa = x(a, f);
        const double xb = x(b, f);
        return xa < xb || (xa == xb && a < b);
      });
      if (x(rows.front(), f) == x(rows.back(), f)) continue;
      ++usable_features;

      std::fill(left.begin(), left.end(), 0.0);
      double left_total = 0.0;
      for (std::size_t i = 0; i + 1 < rows.size(); ++i) {
        const std::size_t r = rows[i];
        left[static_cast<std::size_t>(y_[r])] += w_[r];
        left_total += w_[r];
        const double here = x(r, f);
        const double next = x(rows[i + 1], f);
        if (here == next) continue;
        const double right_total = total - left_total;
        for (std::size_t c = 0; c < k_; ++c) right[c] = std::max(0.0, mass[c] - left[c]);
        const double score = scaled_gini(left, left_total) + scaled_gini(right, right_total);
        if (score < best.score - tol) {
          double threshold = here + (next - here) / 2.0;
          if (threshold >= next) threshold = here;
          best = {f, threshold, score};
        }
      }
    }
    if (best.feature >= 0 && best.score < parent_score - tol) return best;
    return {};
  }

  const Matrix& X_;
  std::span<const int> y_;
  std::span<const double> w_;
  std::size_t k_;
  TreeOptions options_;
  std::vector<TreeNode> nodes_;
};

}  // namespace

double gini(std::span<const double> mass) {
  double total = 0.0;
  for (double m : mass) total += m;
  if (!(total > 0.0)) throw Error(ErrorKind::ZeroMass, "gini of an empty class mass vector");
  return scaled_gini(mass, total) / total;
}

DecisionTree::DecisionTree(std::vector<TreeNode> nodes, int max_depth, int n_classes, std::size_t n_features)
    : nodes_(std::move(nodes)), max_depth_(max_depth), n_classes_(n_classes), n_features_(n_features) {}

int DecisionTree::depth() const {
  if (nodes_.empty()) return 0;
  int deepest = 0;
  std::vector<std::pair<int, int>> stack{{0, 0}};
  while (!stack.empty()) {
    const auto [index, d] = stack.back();
    stack.pop_back();
    const TreeNode& node = nodes_[static_cast<std::size_t>(index)];
    if (node.is_leaf()) {
      deepest = std::max(deepest, d);
    } else {
      stack.emplace_back(node.left, d + 1);
      stack.emplace_back(node.right, d + 1);
    }
  }
  return deepest;
}

const TreeNode& DecisionTree::leaf_for(std::span<const double> x) const {
  if (x.size() != n_features_) {
    throw Error(ErrorKind::WidthMismatch, "tree expects " + std::to_string(n_features_) + " features, got " +
                                              std::to_string(x.size()));
  }
  const TreeNode* node = &nodes_.front();
  while (!node->is_leaf()) {
    const auto next = x[static_cast<std::size_t>(node->feature)] <= node->threshold ? node->left : node->right;
    node = &nodes_[static_cast<std::size_t>(next)];
  }
  return *node;
}

std::vector<int> DecisionTree::predict(const Matrix& X) const {
  std::vector<int> out(static_cast<std::size_t>(X.rows()));
  for (Eigen::Index i = 0; i < X.rows(); ++i)
    out[static_cast<std::size_t>(i)] = predict_class({X.data() + i * X.cols(), static_cast<std::size_t>(X.cols())});
  return out;
}

std::vector<double> DecisionTree::feature_importance() const {
  std::vector<double> importance(n_features_, 0.0);
  for (const TreeNode& node : nodes_) {
    if (node.is_leaf()) continue;
    const TreeNode& l = nodes_[static_cast<std::size_t>(node.left)];
    const TreeNode& r = nodes_[static_cast<std::size_t>(node.right)];
    importance[static_cast<std::size_t>(node.feature)] +=
        node.weight * node.impurity - l.weight * l.impurity - r.weight * r.impurity;
  }
  return importance;
}

DecisionTree fit_tree(const Matrix& X, std::span<const int> y, std::span<const double> w, int max_depth,
                      int n_classes) {
  if (max_depth < 1) throw Error(ErrorKind::InvalidConfig, "max depth must be at least 1");
  return fit_tree(X, y, w, n_classes, TreeOptions{max_depth, 0, nullptr});
}

DecisionTree fit_tree(const Matrix& X, std::span<const int> y, std::span<const double> w, int n_classes,
                      const TreeOptions& options) {
  const auto n = static_cast<std::size_t>(X.rows());
  if (n == 0 || X.cols() == 0) throw Error(ErrorKind::EmptyInput, "cannot fit a tree on an empty matrix");
  if (y.size() != n || w.size() != n)
    throw Error(ErrorKind::WidthMismatch, "labels and weights must have one entry per row");
  if (n_classes < 1) throw Error(ErrorKind::InvalidConfig, "class count must be positive");
  if (options.max_features > 0 && options.rng == nullptr)
    throw Error(ErrorKind::InvalidConfig, "feature subsampling needs a random generator");
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!(w[i] >= 0.0) || !std::isfinite(w[i]))
      throw Error(ErrorKind::NonFiniteInput, "sample weights must be finite and nonnegative");
    if (y[i] < 0 || y[i] >= n_classes) throw Error(ErrorKind::UnknownLabel, "class index out of range");
    total += w[i];
  }
  if (!(total > 0.0)) throw Error(ErrorKind::AllWeightsZero, "every sample weight is zero");
  if (!X.allFinite()) throw Error(ErrorKind::NonFiniteInput, "feature matrix contains non-finite values");

  Builder builder(X, y, w, n_classes, options);
  return DecisionTree(builder.run(), options.max_depth, n_classes, static_cast<std::size_t>(X.cols()));
}

}  // namespace modt
