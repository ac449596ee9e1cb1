#include "modt/predict.hpp"

#include "modt/error.hpp"
#include "modt/rng.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <sstream>

namespace modt {

using nlohmann::json;

const char* to_string(ModelSelection selection) noexcept {
  return selection == ModelSelection::LastIteration ? "last_iteration" : "best_training_accuracy";
}

ModelSelection parse_model_selection(std::string_view text) {
  if (text == "last_iteration" || text == "last") return ModelSelection::LastIteration;
  if (text == "best_training_accuracy" || text == "best") return ModelSelection::BestTrainingAccuracy;
  throw Error(ErrorKind::InvalidConfig, "unknown model selection '" + std::string(text) + "'");
}

void TrainConfig::validate() const {
  if (experts < 1) throw Error(ErrorKind::InvalidConfig, "expert count must be at least 1");
  if (max_depth < 1) throw Error(ErrorKind::InvalidConfig, "tree depth must be at least 1");
  if (!(gamma > 0.0) || !std::isfinite(gamma)) throw Error(ErrorKind::InvalidConfig, "learning rate must be > 0");
  if (iterations < 1) throw Error(ErrorKind::InvalidConfig, "iteration count must be at least 1");
  if (gate == GateMode::Kind::TwoD && selection == SelectionMethod::Manual && !features)
    throw Error(ErrorKind::BadManualPair, "manual selection needs an explicit feature pair");
  if (features && features->first == features->second)
    throw Error(ErrorKind::BadManualPair, "gate features must differ");
}

std::vector<Prediction> predict_detailed(const MoDTModel& model, const Matrix& X) {
  const std::size_t width = model.trees.empty() ? 0 : model.trees.front().n_features();
  if (static_cast<std::size_t>(X.cols()) != width) {
    throw Error(ErrorKind::WidthMismatch, "model expects " + std::to_string(width) + " features, data has " +
                                              std::to_string(X.cols()));
  }
  const Matrix G = model.gating.values(X);
  std::vector<Prediction> out(static_cast<std::size_t>(X.rows()));
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    const std::size_t j = select_expert({G.data() + i * G.cols(), static_cast<std::size_t>(G.cols())});
    out[static_cast<std::size_t>(i)] = {
        model.trees[j].predict_class({X.data() + i * X.cols(), static_cast<std::size_t>(X.cols())}), j};
  }
  return out;
}

std::vector<int> predict(const MoDTModel& model, const Matrix& X) {
  const auto detailed = predict_detailed(model, X);
  std::vector<int> out;
  out.reserve(detailed.size());
  for (const auto& p : detailed) out.push_back(p.label);
  return out;
}

double accuracy(std::span<const int> predicted, std::span<const int> truth) {
  if (predicted.size() != truth.size()) throw Error(ErrorKind::WidthMismatch, "prediction and label counts differ");
  if (truth.empty()) throw Error(ErrorKind::EmptyInput, "accuracy of an empty set");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) correct += predicted[i] == truth[i];
  return static_cast<double>(correct) / static_cast<double>(truth.size());
}

double evaluate(const MoDTModel& model, const Dataset& data) { return accuracy(predict(model, data.X), data.y); }

RandomForest fit_random_forest(const Matrix& X, std::span<const int> y, int n_classes, std::size_t n_trees,
                               std::optional<int> max_depth, std::uint64_t seed) {
  const auto n = static_cast<std::size_t>(X.rows());
  if (n == 0 || X.cols() == 0) throw Error(ErrorKind::EmptyInput, "cannot fit a forest on an empty matrix");
  if (n_trees < 1) throw Error(ErrorKind::InvalidConfig, "forest needs at least one tree");
  if (max_depth && *max_depth < 1) throw Error(ErrorKind::InvalidConfig, "forest depth must be at least 1");

  RandomForest forest;
  forest.max_depth = max_depth;
  forest.n_classes = n_classes;
  Rng rng(seed);
  const auto max_features =
      static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(X.cols()))));
  TreeOptions options{max_depth.value_or(0), max_features, &rng};
  std::vector<double> counts(n);
  for (std::size_t t = 0; t < n_trees; ++t) {
    std::fill(counts.begin(), counts.end(), 0.0);
    for (std::size_t draw = 0; draw < n; ++draw) counts[rng.index(n)] += 1.0;
    forest.trees.push_back(fit_tree(X, y, counts, n_classes, options));
  }
  return forest;
}

std::vector<int> rf_predict(const RandomForest& forest, const Matrix& X) {
  if (forest.trees.empty()) throw Error(ErrorKind::EmptyInput, "forest has no trees");
  if (static_cast<std::size_t>(X.cols()) != forest.trees.front().n_features())
    throw Error(ErrorKind::WidthMismatch, "forest and data widths differ");
  std::vector<int> out(static_cast<std::size_t>(X.rows()));
  std::vector<int> votes(static_cast<std::size_t>(forest.n_classes));
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    std::fill(votes.begin(), votes.end(), 0);
    const std::span<const double> x{X.data() + i * X.cols(), static_cast<std::size_t>(X.cols())};
    for (const auto& tree : forest.trees) ++votes[static_cast<std::size_t>(tree.predict_class(x))];
    int best = 0;
    for (std::size_t c = 1; c < votes.size(); ++c)
      if (votes[c] > votes[static_cast<std::size_t>(best)]) best = static_cast<int>(c);
    out[static_cast<std::size_t>(i)] = best;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Model file

namespace {

json tree_to_json(const DecisionTree& tree) {
  json nodes = json::array();
  for (const TreeNode& node : tree.nodes()) {
    json j = {{"distribution", node.distribution}, {"weight", node.weight}, {"impurity", node.impurity}};
    if (!node.is_leaf()) {
      j["feature"] = node.feature;
      j["threshold"] = node.threshold;
      j["left"] = node.left;
      j["right"] = node.right;
    }
    nodes.push_back(std::move(j));
  }
  return {{"max_depth", tree.max_depth()},
          {"n_classes", tree.n_classes()},
          {"n_features", tree.n_features()},
          {"nodes", std::move(nodes)}};
}

DecisionTree tree_from_json(const json& j) {
  const int k = j.at("n_classes").get<int>();
  const auto p = j.at("n_features").get<std::size_t>();
  std::vector<TreeNode> nodes;
  for (const json& jn : j.at("nodes")) {
    TreeNode node;
    node.distribution = jn.at("distribution").get<std::vector<double>>();
    node.weight = jn.at("weight").get<double>();
    node.impurity = jn.at("impurity").get<double>();
    if (jn.contains("feature")) {
      node.feature = jn.at("feature").get<int>();
      node.threshold = jn.at("threshold").get<double>();
      node.left = jn.at("left").get<int>();
      node.right = jn.at("right").get<int>();
    }
    if (node.distribution.size() != static_cast<std::size_t>(k))
      throw Error(ErrorKind::CorruptFile, "leaf distribution length does not match class count");
    node.majority = 0;
    for (std::size_t c = 1; c < node.distribution.size(); ++c)
      if (node.distribution[c] > node.distribution[static_cast<std::size_t>(node.majority)]) node.majority = static_cast<int>(c);
    nodes.push_back(std::move(node));
  }
  if (nodes.empty()) throw Error(ErrorKind::CorruptFile, "tree without nodes");
  const auto count = static_cast<int>(nodes.size());
  for (const TreeNode& node : nodes) {
    if (node.is_leaf()) continue;
    if (node.left <= 0 || node.left >= count || node.right <= 0 || node.right >= count ||
        node.feature >= static_cast<int>(p))
      throw Error(ErrorKind::CorruptFile, "tree node references are out of range");
  }
  return DecisionTree(std::move(nodes), j.at("max_depth").get<int>(), k, p);
}

json encoding_to_json(const FeatureEncoding& enc) {
  json columns = json::array();
  for (const auto& c : enc.columns) {
    json jc = {{"name", c.source}, {"kind", to_string(c.kind)}};
    if (c.kind == ColumnKind::Categorical) jc["categories"] = c.categories;
    columns.push_back(std::move(jc));
  }
  return {{"target", enc.target_column}, {"classes", enc.class_names}, {"columns", std::move(columns)}};
}

FeatureEncoding encoding_from_json(const json& j) {
  FeatureEncoding enc;
  enc.target_column = j.at("target").get<std::string>();
  enc.class_names = j.at("classes").get<std::vector<std::string>>();
  for (const json& jc : j.at("columns")) {
    EncodedColumn c;
    c.source = jc.at("name").get<std::string>();
    c.kind = parse_column_kind(jc.at("kind").get<std::string>());
    if (c.kind == ColumnKind::Categorical) c.categories = jc.at("categories").get<std::vector<std::string>>();
    enc.columns.push_back(std::move(c));
  }
  return enc;
}

MoDTModel model_from_parsed(const json& doc) {
  if (!doc.is_object() || doc.value("format", "") != "modt-model")
    throw Error(ErrorKind::CorruptFile, "not a model file");
  const int version = doc.at("format_version").get<int>();
  if (version > kModelFormatVersion || version < 1)
    throw Error(ErrorKind::VersionMismatch, "model format version " + std::to_string(version) +
                                                " is not supported (expected " +
                                                std::to_string(kModelFormatVersion) + ")");

  MoDTModel model;
  model.class_names = doc.at("classes").get<std::vector<std::string>>();
  model.feature_names = doc.at("features").get<std::vector<std::string>>();

  const json& gate = doc.at("gating");
  model.gating.mode.kind = parse_gate_kind(gate.at("mode").get<std::string>());
  if (model.gating.mode.is_two_d()) {
    const auto pair = gate.at("features").get<std::vector<std::size_t>>();
    if (pair.size() != 2) throw Error(ErrorKind::CorruptFile, "2D gate needs two features");
    model.gating.mode.features = {pair[0], pair[1]};
  }
  const auto rows = gate.at("theta").get<std::vector<std::vector<double>>>();
  if (rows.empty() || rows.front().empty()) throw Error(ErrorKind::CorruptFile, "empty theta");
  model.gating.theta.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != rows.front().size()) throw Error(ErrorKind::CorruptFile, "ragged theta");
    for (std::size_t c = 0; c < rows[r].size(); ++c)
      model.gating.theta(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
  }

  for (const json& jt : doc.at("trees")) model.trees.push_back(tree_from_json(jt));
  if (model.trees.size() != model.gating.experts())
    throw Error(ErrorKind::CorruptFile, "tree count does not match gate experts");
  const std::size_t q = model.gating.mode.width(model.feature_names.size());
  if (static_cast<std::size_t>(model.gating.theta.rows()) != q + 1)
    throw Error(ErrorKind::CorruptFile, "theta shape does not match the gate inputs");
  for (const auto& t : model.trees) {
    if (t.n_features() != model.feature_names.size() ||
        t.n_classes() != static_cast<int>(model.class_names.size()))
      throw Error(ErrorKind::CorruptFile, "tree shape does not match the model");
  }

  if (doc.contains("encoding")) model.encoding = encoding_from_json(doc.at("encoding"));

  const json& jm = doc.at("training");
  TrainConfig& cfg = model.meta.config;
  cfg.experts = jm.at("experts").get<std::size_t>();
  cfg.max_depth = jm.at("max_depth").get<int>();
  cfg.gate = model.gating.mode.kind;
  if (model.gating.mode.is_two_d()) cfg.features = model.gating.mode.features;
  cfg.selection = parse_selection_method(jm.at("selection").get<std::string>());
  cfg.gamma = jm.at("gamma").get<double>();
  cfg.iterations = jm.at("iterations").get<int>();
  cfg.seed = jm.at("seed").get<std::uint64_t>();
  cfg.model_selection = parse_model_selection(jm.at("model_selection").get<std::string>());
  cfg.early_stop = jm.at("early_stop").get<bool>();
  model.meta.iterations_run = jm.at("iterations_run").get<int>();
  model.meta.selected_iteration = jm.at("selected_iteration").get<int>();
  model.meta.training_accuracy = jm.at("training_accuracy").get<double>();
  model.meta.reseeded_experts = jm.at("reseeded_experts").get<int>();
  return model;
}

}  // namespace

std::string model_to_json(const MoDTModel& model) {
  json theta = json::array();
  for (Eigen::Index r = 0; r < model.gating.theta.rows(); ++r) {
    std::vector<double> row(static_cast<std::size_t>(model.gating.theta.cols()));
    for (Eigen::Index c = 0; c < model.gating.theta.cols(); ++c) row[static_cast<std::size_t>(c)] = model.gating.theta(r, c);
    theta.push_back(row);
  }
  json gate = {{"mode", to_string(model.gating.mode.kind)}, {"experts", model.gating.experts()}, {"theta", theta}};
  if (model.gating.mode.is_two_d())
    gate["features"] = {model.gating.mode.features.first, model.gating.mode.features.second};

  json trees = json::array();
  for (const auto& t : model.trees) trees.push_back(tree_to_json(t));

  const TrainConfig& cfg = model.meta.config;
  json training = {{"experts", cfg.experts},
                   {"max_depth", cfg.max_depth},
                   {"gate", to_string(cfg.gate)},
                   {"selection", to_string(cfg.selection)},
                   {"gamma", cfg.gamma},
                   {"iterations", cfg.iterations},
                   {"seed", cfg.seed},
                   {"model_selection", to_string(cfg.model_selection)},
                   {"early_stop", cfg.early_stop},
                   {"iterations_run", model.meta.iterations_run},
                   {"selected_iteration", model.meta.selected_iteration},
                   {"training_accuracy", model.meta.training_accuracy},
                   {"reseeded_experts", model.meta.reseeded_experts}};

  json doc = {{"format", "modt-model"},
              {"format_version", kModelFormatVersion},
              {"classes", model.class_names},
              {"features", model.feature_names},
              {"gating", std::move(gate)},
              {"trees", std::move(trees)},
              {"training", std::move(training)}};
  if (model.encoding) doc["encoding"] = encoding_to_json(*model.encoding);
  return doc.dump(2) + "\n";
}

MoDTModel model_from_json(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::CorruptFile, std::string("unreadable model file: ") + e.what());
  }
  try {
    return model_from_parsed(doc);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::CorruptFile, std::string("malformed model file: ") + e.what());
  } catch (const Error& e) {
    if (error_class(e.kind()) == ErrorClass::Io) throw;
    throw Error(ErrorKind::CorruptFile, e.what());
  }
}

void save_model(const MoDTModel& model, const std::filesystem::path& path) {
  const std::string text = model_to_json(model);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::IoError, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorKind::IoError, "failed writing " + path.string());
}

MoDTModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoError, "cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return model_from_json(buffer.str());
}

}  // namespace modt
