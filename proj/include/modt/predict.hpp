#pragma once

#include "modt/data.hpp"
#include "modt/gating.hpp"
#include "modt/tree.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace modt {

enum class ModelSelection { LastIteration, BestTrainingAccuracy };

const char* to_string(ModelSelection selection) noexcept;
ModelSelection parse_model_selection(std::string_view text);

/// Hyperparameters of one training run.
struct TrainConfig {
  std::size_t experts = 3;
  int max_depth = 2;
  GateMode::Kind gate = GateMode::Kind::TwoD;
  std::optional<FeaturePair> features;  // 2D gate; chosen by `selection` when unset
  SelectionMethod selection = SelectionMethod::TreeImportance;
  double gamma = 1.0;
  int iterations = 40;
  std::uint64_t seed = 0;
  ModelSelection model_selection = ModelSelection::BestTrainingAccuracy;
  bool early_stop = false;  // stop once max |theta_new - theta| < 1e-6
  unsigned threads = 1;     // tree fits per E-step; never affects results

  void validate() const;
};

struct TrainMeta {
  TrainConfig config;
  int iterations_run = 0;
  int selected_iteration = 0;  // 1-based
  double training_accuracy = 0.0;
  int reseeded_experts = 0;
};

struct MoDTModel {
  GatingModel gating;
  std::vector<DecisionTree> trees;
  std::vector<std::string> class_names;
  std::vector<std::string> feature_names;
  std::optional<FeatureEncoding> encoding;  // present when trained from a CSV
  TrainMeta meta;

  std::size_t experts() const { return trees.size(); }
  std::size_t features() const { return feature_names.size(); }
};

struct Prediction {
  int label = 0;
  std::size_t expert = 0;
};

/// Hard-gated prediction: only the expert with the highest gate value answers.
std::vector<Prediction> predict_detailed(const MoDTModel& model, const Matrix& X);
std::vector<int> predict(const MoDTModel& model, const Matrix& X);

double accuracy(std::span<const int> predicted, std::span<const int> truth);
double evaluate(const MoDTModel& model, const Dataset& data);

struct RandomForest {
  std::vector<DecisionTree> trees;
  std::optional<int> max_depth;
  int n_classes = 0;

  std::size_t n_trees() const { return trees.size(); }
};

/// Bagged trees with ceil(sqrt(p)) candidate features per node.
RandomForest fit_random_forest(const Matrix& X, std::span<const int> y, int n_classes, std::size_t n_trees,
                               std::optional<int> max_depth, std::uint64_t seed);
/// Majority vote; the lowest class index wins ties.
std::vector<int> rf_predict(const RandomForest& forest, const Matrix& X);

inline constexpr int kModelFormatVersion = 1;

std::string model_to_json(const MoDTModel& model);
MoDTModel model_from_json(std::string_view text);
void save_model(const MoDTModel& model, const std::filesystem::path& path);
MoDTModel load_model(const std::filesystem::path& path);

}  // namespace modt
