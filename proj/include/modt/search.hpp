#pragma once

#include "modt/data.hpp"
#include "modt/predict.hpp"
#include "modt/rng.hpp"

#include <cstddef>
#include <cstdint>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace modt {

/// Region sampled by the random search. e, d and the gate kind stay fixed.
struct SearchSpace {
  double gamma_min = 1e-2;  // log-uniform
  double gamma_max = 1e1;
  int iterations_min = 10;  // uniform integer, inclusive
  int iterations_max = 100;
  std::uint64_t seed_min = 0;
  std::uint64_t seed_max = 1'000'000;
  std::vector<ModelSelection> model_selections{ModelSelection::LastIteration, ModelSelection::BestTrainingAccuracy};
  std::vector<SelectionMethod> feature_methods{SelectionMethod::TreeImportance, SelectionMethod::LinearImportance,
                                               SelectionMethod::Pca};
  std::size_t experts = 3;
  int max_depth = 2;
  GateMode::Kind gate = GateMode::Kind::TwoD;

  void validate() const;
  bool contains(const TrainConfig& config) const;
  TrainConfig sample(Rng& rng) const;
};

struct TrialResult {
  std::size_t trial = 0;
  TrainConfig config;
  double score = 0.0;  // validation accuracy
  std::size_t rank = 0;  // 1-based; 0 for failed trials
  bool ok = true;
  std::string error;
};

struct SearchResult {
  std::vector<TrialResult> best;  // rank order
  std::vector<TrialResult> log;   // trial order
};

/// Each trial trains on 80% of `train` and is scored on the remaining 20%.
/// A failing trial is logged and skipped. Ties rank the earlier trial first.
SearchResult random_search(const Dataset& train, const SearchSpace& space, std::size_t n_trials, std::size_t k_best,
                           std::uint64_t seed, unsigned threads = 1);

void write_trial_log_csv(std::ostream& out, const std::vector<TrialResult>& log);

enum class Method { MoDT2D, MoDTFull, Tree2, Tree3, Tree4, ForestSmall, ForestFull };

const char* to_string(Method method) noexcept;
Method parse_method(std::string_view text);
std::vector<Method> all_methods();

struct Protocol {
  double test_fraction = 0.25;
  std::size_t trials = 100;
  std::size_t top_k = 10;
  std::size_t repetitions = 20;
  std::uint64_t seed = 0;
  std::size_t experts = 3;
  int max_depth = 2;
  unsigned threads = 1;
  std::vector<Method> methods = all_methods();
  SearchSpace space;  // experts, depth and gate are overridden per method
};

struct ReportRow {
  std::string dataset;
  Method method = Method::MoDT2D;
  double train_mean = 0.0;
  double train_std = 0.0;
  double test_mean = 0.0;
  double test_std = 0.0;
  std::size_t runs = 0;
};

struct TrialLog {
  std::string dataset;
  Method method = Method::MoDT2D;
  std::vector<TrialResult> trials;
};

struct BenchmarkReport {
  std::vector<ReportRow> rows;
  std::vector<TrialLog> searches;

  const ReportRow* find(std::string_view dataset, Method method) const;
  void append(const BenchmarkReport& other);
  void write_csv(std::ostream& out) const;
  /// One row per dataset, one train/test column pair per method.
  void write_markdown(std::ostream& out) const;
  void write_trial_log_csv(std::ostream& out) const;
};

/// Repetition r splits the data with seed `protocol.seed + r`. The search
/// runs once on the training part of repetition 0; each of the top-k
/// configurations is then retrained and tested on every repetition.
BenchmarkReport benchmark(const std::string& name, const Dataset& data, const Protocol& protocol);

}  // namespace modt
