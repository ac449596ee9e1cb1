#pragma once

#include "modt/data.hpp"
#include "modt/gating.hpp"
#include "modt/predict.hpp"
#include "modt/tree.hpp"

#include <ostream>
#include <span>
#include <vector>

namespace modt {

/// Ridge added to the normal equations of the M-step regression.
inline constexpr double kRidge = 1e-8;

struct IterationRecord {
  int iteration = 0;  // 1-based
  double training_accuracy = 0.0;
  Matrix theta;                     // gate parameters used in this iteration
  std::vector<double> expert_mass;  // column sums of G
  std::vector<std::size_t> reseeded;
};

struct TrainingTrace {
  std::vector<IterationRecord> iterations;
  int selected_iteration = 0;

  /// iteration,training_accuracy,mass_0,...,mass_{e-1},reseeded
  void write_csv(std::ostream& out) const;
};

struct EStepResult {
  std::vector<DecisionTree> trees;
  Matrix G;
  Matrix E;
};

/// n x e matrix of each tree's probability for the true class.
Matrix confidence_matrix(std::span<const DecisionTree> trees, const Matrix& X, std::span<const int> y);

/// Row-normalized G o C. Rows whose product mass is below 1e-12 fall back to
/// the G row.
Matrix expectation(const Matrix& G, const Matrix& C);

/// Fits one weighted tree per expert and computes G and E.
EStepResult e_step(const Matrix& Xg, const Matrix& X, std::span<const int> y, const Matrix& theta, int max_depth,
                   int n_classes, unsigned threads = 1);

/// Minimizer of sum_i ||t_i - Xg_i beta||^2 through ridge-stabilized normal
/// equations.
Matrix least_squares(const Matrix& Xg, const Matrix& T);

/// theta + gamma * least_squares(Xg, E - G).
Matrix m_step(const Matrix& Xg, const Matrix& E, const Matrix& G, const Matrix& theta, double gamma);

MoDTModel train(const Dataset& data, const TrainConfig& config, TrainingTrace* trace = nullptr);

}  // namespace modt
