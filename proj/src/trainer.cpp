#include "modt/trainer.hpp"

#include "modt/error.hpp"
#include "modt/parallel.hpp"
#include "modt/rng.hpp"

#include <cmath>
#include <string>

namespace modt {
namespace {

constexpr double kZeroRowMass = 1e-12;
constexpr double kDeadExpertMass = 1e-9;
constexpr int kMaxReseedRounds = 10;
constexpr std::uint64_t kReseedStream = 0x9E3779B97F4A7C15ULL;

std::vector<double> column(const Matrix& M, Eigen::Index c) {
  std::vector<double> out(static_cast<std::size_t>(M.rows()));
  for (Eigen::Index i = 0; i < M.rows(); ++i) out[static_cast<std::size_t>(i)] = M(i, c);
  return out;
}

std::span<const double> row_of(const Matrix& M, Eigen::Index i) {
  return {M.data() + i * M.cols(), static_cast<std::size_t>(M.cols())};
}

double hard_gate_accuracy(const std::vector<DecisionTree>& trees, const Matrix& G, const Matrix& X,
                          std::span<const int> y) {
  std::size_t correct = 0;
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    const std::size_t j = select_expert(row_of(G, i));
    correct += trees[j].predict_class(row_of(X, i)) == y[static_cast<std::size_t>(i)];
  }
  return static_cast<double>(correct) / static_cast<double>(X.rows());
}

std::vector<DecisionTree> fit_experts(const Matrix& X, std::span<const int> y, const Matrix& G, int max_depth,
                                      int n_classes, unsigned threads) {
  std::vector<DecisionTree> trees(static_cast<std::size_t>(G.cols()));
  parallel_for(trees.size(), threads, [&](std::size_t j) {
    const auto w = column(G, static_cast<Eigen::Index>(j));
    trees[j] = fit_tree(X, y, w, max_depth, n_classes);
  });
  return trees;
}

}  // namespace

void TrainingTrace::write_csv(std::ostream& out) const {
  const std::size_t e = iterations.empty() ? 0 : iterations.front().expert_mass.size();
  out << "iteration,training_accuracy";
  for (std::size_t j = 0; j < e; ++j) out << ",mass_" << j;
  out << ",reseeded\n";
  const auto old_precision = out.precision(17);
  for (const auto& rec : iterations) {
    out << rec.iteration << ',' << rec.training_accuracy;
    for (double m : rec.expert_mass) out << ',' << m;
    out << ',' << rec.reseeded.size() << '\n';
  }
  out.precision(old_precision);
}

Matrix confidence_matrix(std::span<const DecisionTree> trees, const Matrix& X, std::span<const int> y) {
  if (y.size() != static_cast<std::size_t>(X.rows()))
    throw Error(ErrorKind::WidthMismatch, "one label per row required");
  Matrix C(X.rows(), static_cast<Eigen::Index>(trees.size()));
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    const auto x = row_of(X, i);
    const auto label = static_cast<std::size_t>(y[static_cast<std::size_t>(i)]);
    for (std::size_t j = 0; j < trees.size(); ++j) C(i, static_cast<Eigen::Index>(j)) = trees[j].predict_proba(x)[label];
  }
  return C;
}

Matrix expectation(const Matrix& G, const Matrix& C) {
  if (G.rows() != C.rows() || G.cols() != C.cols())
    throw Error(ErrorKind::WidthMismatch, "gating and confidence matrices differ in shape");
  Matrix E = G.cwiseProduct(C);
  for (Eigen::Index i = 0; i < E.rows(); ++i) {
    const double mass = E.row(i).sum();
    if (mass < kZeroRowMass)
      E.row(i) = G.row(i);
    else
      E.row(i) /= mass;
  }
  return E;
}

EStepResult e_step(const Matrix& Xg, const Matrix& X, std::span<const int> y, const Matrix& theta, int max_depth,
                   int n_classes, unsigned threads) {
  EStepResult out;
  out.G = gating_values(Xg, theta);
  for (Eigen::Index j = 0; j < out.G.cols(); ++j) {
    if (out.G.col(j).sum() < kDeadExpertMass)
      throw Error(ErrorKind::DegenerateExpert, "expert " + std::to_string(j) + " receives no gating mass");
  }
  out.trees = fit_experts(X, y, out.G, max_depth, n_classes, threads);
  const Matrix C = confidence_matrix(out.trees, X, y);
  out.E = expectation(out.G, C);
  return out;
}

Matrix least_squares(const Matrix& Xg, const Matrix& T) {
  if (Xg.rows() != T.rows()) throw Error(ErrorKind::WidthMismatch, "regression inputs differ in row count");
  if (!Xg.allFinite() || !T.allFinite()) throw Error(ErrorKind::NonFiniteInput, "regression input is not finite");
  Eigen::MatrixXd gram = Xg.transpose() * Xg;
  gram.diagonal().array() += kRidge;
  const Eigen::MatrixXd rhs = Xg.transpose() * T;
  Matrix beta = gram.ldlt().solve(rhs);
  if (!beta.allFinite()) throw Error(ErrorKind::NonFiniteInput, "normal equations produced a non-finite solution");
  return beta;
}

Matrix m_step(const Matrix& Xg, const Matrix& E, const Matrix& G, const Matrix& theta, double gamma) {
  const Matrix beta = least_squares(Xg, E - G);
  if (beta.rows() != theta.rows() || beta.cols() != theta.cols())
    throw Error(ErrorKind::WidthMismatch, "regression coefficients do not match theta");
  return theta + gamma * beta;
}

MoDTModel train(const Dataset& data, const TrainConfig& config, TrainingTrace* trace) {
  config.validate();
  const Matrix& X = data.X;
  const std::span<const int> y = data.y;
  const auto n = static_cast<std::size_t>(X.rows());
  if (n == 0 || X.cols() == 0) throw Error(ErrorKind::EmptyInput, "training data is empty");
  if (y.size() != n) throw Error(ErrorKind::WidthMismatch, "training data needs one label per row");
  const int k = static_cast<int>(data.classes());
  if (k < 1) throw Error(ErrorKind::EmptyInput, "training data has no class names");

  GateMode mode = GateMode::full();
  if (config.gate == GateMode::Kind::TwoD) {
    const FeaturePair pair = config.features ? *config.features
                                             : select_gating_features(X, y, k, config.selection);
    mode = GateMode::two_d(pair.first, pair.second);
  }
  const Matrix Xg = gate_input(X, mode);
  const std::size_t q = static_cast<std::size_t>(Xg.cols()) - 1;

  Matrix theta = init_theta(q, config.experts, config.seed);
  Rng reseed_rng(config.seed ^ kReseedStream);

  TrainingTrace local;
  TrainingTrace& log = trace != nullptr ? *trace : local;
  log.iterations.clear();

  double best_accuracy = -1.0;
  int best_iteration = 0;
  Matrix best_theta = theta;
  std::vector<DecisionTree> best_trees;
  int reseeds = 0;

  for (int it = 1; it <= config.iterations; ++it) {
    IterationRecord rec;
    rec.iteration = it;
    // Revive experts whose gate column carries (almost) no mass.
    for (int round = 0; round < kMaxReseedRounds; ++round) {
      const Matrix G = gating_values(Xg, theta);
      bool dead = false;
      for (Eigen::Index j = 0; j < G.cols(); ++j) {
        if (G.col(j).sum() < kDeadExpertMass * static_cast<double>(n)) {
          dead = true;
          rec.reseeded.push_back(static_cast<std::size_t>(j));
          for (Eigen::Index r = 0; r < theta.rows(); ++r) theta(r, j) = reseed_rng.uniform(-1.0, 1.0);
        }
      }
      if (!dead) break;
    }
    reseeds += static_cast<int>(rec.reseeded.size());

    EStepResult step = e_step(Xg, X, y, theta, config.max_depth, k, config.threads);
    rec.theta = theta;
    rec.training_accuracy = hard_gate_accuracy(step.trees, step.G, X, y);
    rec.expert_mass.resize(static_cast<std::size_t>(step.G.cols()));
    for (Eigen::Index j = 0; j < step.G.cols(); ++j) rec.expert_mass[static_cast<std::size_t>(j)] = step.G.col(j).sum();

    if (rec.training_accuracy > best_accuracy) {
      best_accuracy = rec.training_accuracy;
      best_iteration = it;
      best_theta = theta;
      best_trees = step.trees;
    }
    log.iterations.push_back(std::move(rec));

    const Matrix next = m_step(Xg, step.E, step.G, theta, config.gamma);
    const double delta = (next - theta).cwiseAbs().maxCoeff();
    theta = next;
    if (config.early_stop && delta < 1e-6) break;
  }

  MoDTModel model;
  model.gating.mode = mode;
  model.class_names = data.class_names;
  model.feature_names = data.feature_names;
  if (model.feature_names.size() != static_cast<std::size_t>(X.cols())) {
    model.feature_names.clear();
    for (Eigen::Index f = 0; f < X.cols(); ++f) model.feature_names.push_back("x" + std::to_string(f));
  }
  model.meta.config = config;
  model.meta.config.features = mode.is_two_d() ? std::optional(mode.features) : std::nullopt;
  model.meta.iterations_run = static_cast<int>(log.iterations.size());
  model.meta.reseeded_experts = reseeds;

  if (config.model_selection == ModelSelection::BestTrainingAccuracy) {
    // Refitting with the stored theta reproduces these trees exactly.
    model.gating.theta = best_theta;
    model.trees = std::move(best_trees);
    model.meta.selected_iteration = best_iteration;
    model.meta.training_accuracy = best_accuracy;
  } else {
    model.gating.theta = theta;
    const Matrix G = gating_values(Xg, theta);
    Matrix weights = G;
    for (Eigen::Index j = 0; j < G.cols(); ++j) {
      // An expert without mass is never selected; give it a usable tree anyway.
      if (G.col(j).sum() < kDeadExpertMass) weights.col(j).setOnes();
    }
    model.trees = fit_experts(X, y, weights, config.max_depth, k, config.threads);
    model.meta.selected_iteration = model.meta.iterations_run;
    model.meta.training_accuracy = hard_gate_accuracy(model.trees, G, X, y);
  }
  log.selected_iteration = model.meta.selected_iteration;
  return model;
}

}  // namespace modt
