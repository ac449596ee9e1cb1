#pragma once

#include "modt/data.hpp"
#include "modt/rng.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace modt {

/// Samples lighter than this take no part in split selection but still
/// contribute their weight to leaf distributions.
inline constexpr double kMinSplitWeight = 1e-12;

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;   // rows with x[feature] <= threshold
  int right = -1;
  std::vector<double> distribution;  // class probabilities, sums to 1
  int majority = 0;
  double weight = 0.0;    // total sample weight reaching the node
  double impurity = 0.0;  // Gini of that weight

  bool is_leaf() const { return feature < 0; }
};

/// Binary axis-aligned classification tree. Node 0 is the root; nodes are
/// stored in pre-order.
class DecisionTree {
 public:
  DecisionTree() = default;
  DecisionTree(std::vector<TreeNode> nodes, int max_depth, int n_classes, std::size_t n_features);

  const std::vector<TreeNode>& nodes() const { return nodes_; }
  std::size_t node_count() const { return nodes_.size(); }
  int max_depth() const { return max_depth_; }  // <= 0 when unrestricted
  int n_classes() const { return n_classes_; }
  std::size_t n_features() const { return n_features_; }
  int depth() const;

  const TreeNode& leaf_for(std::span<const double> x) const;
  int predict_class(std::span<const double> x) const { return leaf_for(x).majority; }
  std::span<const double> predict_proba(std::span<const double> x) const { return leaf_for(x).distribution; }

  std::vector<int> predict(const Matrix& X) const;

  /// Total weighted Gini decrease attributed to each feature.
  std::vector<double> feature_importance() const;

 private:
  std::vector<TreeNode> nodes_;
  int max_depth_ = 0;
  int n_classes_ = 0;
  std::size_t n_features_ = 0;
};

struct TreeOptions {
  int max_depth = 2;             // <= 0 grows until pure
  std::size_t max_features = 0;  // 0 considers every feature at each node
  Rng* rng = nullptr;            // required when max_features > 0
};

/// Gini impurity 1 - sum (m_c / M)^2 of a class mass vector.
double gini(std::span<const double> mass);

DecisionTree fit_tree(const Matrix& X, std::span<const int> y, std::span<const double> w, int max_depth,
                      int n_classes);
DecisionTree fit_tree(const Matrix& X, std::span<const int> y, std::span<const double> w, int n_classes,
                      const TreeOptions& options);

}  // namespace modt
