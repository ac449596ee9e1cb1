#include "modt/cli.hpp"

#include "modt/data.hpp"
#include "modt/error.hpp"
#include "modt/gating.hpp"
#include "modt/predict.hpp"
#include "modt/search.hpp"
#include "modt/trainer.hpp"
#include "modt/viz.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>

namespace modt {
namespace {

namespace fs = std::filesystem;

[[noreturn]] void usage(const std::string& message) { throw Error(ErrorKind::InvalidConfig, message); }

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T value{};
  const char* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc{} || ptr != end) usage("invalid value '" + text + "' for " + key);
  return value;
}

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1" || text == "yes" || text == "on") return true;
  if (text == "false" || text == "0" || text == "no" || text == "off") return false;
  usage("invalid value '" + text + "' for " + key);
}

FeaturePair parse_pair(const std::string& text) {
  const auto comma = text.find(',');
  if (comma == std::string::npos) usage("--features expects two indices as i,j");
  return {parse_number<std::size_t>("features", text.substr(0, comma)),
          parse_number<std::size_t>("features", text.substr(comma + 1))};
}

std::ofstream open_output(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::IoError, "cannot write '" + path.string() + "'");
  return out;
}

void finish_output(std::ofstream& out, const fs::path& path) {
  out.close();
  if (!out) throw Error(ErrorKind::IoError, "failed writing '" + path.string() + "'");
}

// Training settings as strings keyed by config-file name; flags overwrite
// entries loaded from --config.
using Settings = std::map<std::string, std::string>;

const std::vector<std::string>& setting_keys() {
  static const std::vector<std::string> keys{"experts", "max_experts", "depth", "gate", "gamma",
                                             "iterations", "seed", "features", "selection",
                                             "model_selection", "early_stop", "threads"};
  return keys;
}

Settings load_settings(const fs::path& path) {
  Settings out;
  for (auto [key, value] : load_key_values(path)) {
    std::replace(key.begin(), key.end(), '-', '_');
    if (std::find(setting_keys().begin(), setting_keys().end(), key) == setting_keys().end())
      usage("unknown key '" + key + "' in config file '" + path.string() + "'");
    out[key] = value;
  }
  return out;
}

struct ResolvedConfig {
  TrainConfig config;
  bool auto_experts = false;
  std::size_t max_experts = 6;
};

ResolvedConfig resolve(const Settings& s) {
  ResolvedConfig r;
  TrainConfig& c = r.config;
  for (const auto& [key, value] : s) {
    if (key == "experts") {
      if (value == "auto") r.auto_experts = true;
      else c.experts = parse_number<std::size_t>(key, value);
    } else if (key == "max_experts") {
      r.max_experts = parse_number<std::size_t>(key, value);
    } else if (key == "depth") {
      c.max_depth = parse_number<int>(key, value);
    } else if (key == "gate") {
      c.gate = parse_gate_kind(value);
    } else if (key == "gamma") {
      c.gamma = parse_number<double>(key, value);
    } else if (key == "iterations") {
      c.iterations = parse_number<int>(key, value);
    } else if (key == "seed") {
      c.seed = parse_number<std::uint64_t>(key, value);
    } else if (key == "features") {
      c.features = parse_pair(value);
    } else if (key == "selection") {
      c.selection = parse_selection_method(value);
    } else if (key == "model_selection") {
      c.model_selection = parse_model_selection(value);
    } else if (key == "early_stop") {
      c.early_stop = parse_bool(key, value);
    } else if (key == "threads") {
      c.threads = parse_number<unsigned>(key, value);
    }
  }
  if (c.features && c.gate == GateMode::Kind::TwoD) c.selection = SelectionMethod::Manual;
  return r;
}

std::size_t raw_width(const RawDataset& raw) {
  std::size_t width = 0;
  for (const auto& col : raw.columns) {
    if (col.kind == ColumnKind::Numeric) {
      ++width;
      continue;
    }
    auto levels = col.domain.empty() ? col.levels : col.domain;
    std::sort(levels.begin(), levels.end());
    width += static_cast<std::size_t>(std::unique(levels.begin(), levels.end()) - levels.begin());
  }
  return width;
}

bool same_columns(const RawDataset& raw, const FeatureEncoding& enc) {
  if (raw.columns.size() != enc.columns.size()) return false;
  for (std::size_t i = 0; i < raw.columns.size(); ++i)
    if (raw.columns[i].name != enc.columns[i].source || raw.columns[i].kind != enc.columns[i].kind) return false;
  return true;
}

// Encodes a file for an already trained model with the model's own layout.
Dataset load_for_model(const MoDTModel& model, const std::string& dataset, const std::string& schema_path,
                       TargetPolicy policy) {
  if (schema_path.empty() && !model.encoding)
    usage("model has no stored column layout; pass --schema");
  const Schema schema = schema_path.empty() ? model.encoding->schema() : Schema::load(schema_path);
  const RawDataset raw = load_csv(dataset, schema, policy);
  if (model.encoding) {
    if (!same_columns(raw, *model.encoding))
      throw Error(ErrorKind::WidthMismatch, "dataset encodes to " + std::to_string(raw_width(raw)) +
                                                " features with columns that differ from the " +
                                                std::to_string(model.features()) + " the model expects");
    return model.encoding->apply(raw);
  }
  const std::size_t width = raw_width(raw);
  if (width != model.features())
    throw Error(ErrorKind::WidthMismatch, "dataset encodes to " + std::to_string(width) + " features, model expects " +
                                              std::to_string(model.features()));
  FeatureEncoding enc;
  for (const auto& col : raw.columns) {
    EncodedColumn ec{col.name, col.kind, col.domain.empty() ? col.levels : col.domain};
    std::sort(ec.categories.begin(), ec.categories.end());
    ec.categories.erase(std::unique(ec.categories.begin(), ec.categories.end()), ec.categories.end());
    enc.columns.push_back(std::move(ec));
  }
  enc.class_names = model.class_names;
  return enc.apply(raw);
}

struct TrainArgs {
  std::string dataset, schema, config, out, trace;
  Settings flags;
};

int cmd_train(const TrainArgs& a, std::ostream& out) {
  Settings settings = a.config.empty() ? Settings{} : load_settings(a.config);
  for (const auto& [key, value] : a.flags) settings[key] = value;
  ResolvedConfig resolved = resolve(settings);
  if (!resolved.auto_experts) resolved.config.validate();

  const RawDataset raw = load_csv(a.dataset, Schema::load(a.schema));
  const FeatureEncoding encoding = FeatureEncoding::fit(raw);
  const Dataset data = encoding.apply(raw);

  if (resolved.auto_experts) {
    const std::size_t cap = std::min(resolved.max_experts, data.rows() - 1);
    resolved.config.experts = estimate_expert_count(data.X, cap, resolved.config.seed);
    out << "estimated experts: " << resolved.config.experts << '\n';
  }
  resolved.config.validate();

  TrainingTrace trace;
  MoDTModel model = train(data, resolved.config, &trace);
  model.encoding = encoding;
  save_model(model, a.out);
  if (!a.trace.empty()) {
    auto file = open_output(a.trace);
    trace.write_csv(file);
    finish_output(file, a.trace);
  }

  for (const auto& record : trace.iterations)
    out << "iteration " << record.iteration << " training_accuracy " << std::fixed << std::setprecision(4)
        << record.training_accuracy << (record.reseeded.empty() ? "" : " reseeded") << '\n';
  out << std::defaultfloat;
  out << "selected iteration " << model.meta.selected_iteration << " of " << model.meta.iterations_run
      << ", training accuracy " << std::fixed << std::setprecision(4) << model.meta.training_accuracy << '\n'
      << std::defaultfloat;
  if (model.gating.mode.is_two_d()) {
    const auto [i, j] = model.gating.mode.features;
    out << "gate features: " << model.feature_names[i] << ", " << model.feature_names[j] << '\n';
  }
  out << "model written to " << a.out << '\n';
  return 0;
}

std::string csv_field(const std::string& text) {
  if (text.find_first_of(",\"\n\r") == std::string::npos) return text;
  std::string out = "\"";
  for (char c : text) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

int cmd_predict(const std::string& model_path, const std::string& dataset, const std::string& schema,
                const std::string& out_path, std::ostream& out) {
  const MoDTModel model = load_model(model_path);
  const Dataset data = load_for_model(model, dataset, schema, TargetPolicy::Optional);
  const auto predictions = predict_detailed(model, data.X);

  std::ostringstream csv;
  csv << "row,predicted_class,expert\n";
  for (std::size_t i = 0; i < predictions.size(); ++i)
    csv << i << ',' << csv_field(model.class_names[static_cast<std::size_t>(predictions[i].label)]) << ','
        << predictions[i].expert << '\n';
  if (out_path.empty()) {
    out << csv.str();
    return 0;
  }
  auto file = open_output(out_path);
  file << csv.str();
  finish_output(file, out_path);
  out << predictions.size() << " predictions written to " << out_path << '\n';
  return 0;
}

int cmd_eval(const std::string& model_path, const std::string& dataset, const std::string& schema,
             std::ostream& out) {
  const MoDTModel model = load_model(model_path);
  const Dataset data = load_for_model(model, dataset, schema, TargetPolicy::Required);
  out << "accuracy " << std::fixed << std::setprecision(6) << evaluate(model, data) << '\n' << std::defaultfloat;
  return 0;
}

struct BenchArgs {
  std::vector<std::string> datasets, schemas;
  std::string methods, csv, md, trial_log;
  Protocol protocol;
};

int cmd_bench(const BenchArgs& a, std::ostream& out) {
  if (a.datasets.size() != a.schemas.size()) usage("each --dataset needs a matching --schema");
  Protocol protocol = a.protocol;
  if (!a.methods.empty()) {
    protocol.methods.clear();
    std::stringstream list(a.methods);
    for (std::string name; std::getline(list, name, ',');) protocol.methods.push_back(parse_method(name));
  }
  BenchmarkReport report;
  for (std::size_t i = 0; i < a.datasets.size(); ++i) {
    const Dataset data = one_hot_encode(load_csv(a.datasets[i], Schema::load(a.schemas[i])));
    const std::string name = fs::path(a.datasets[i]).stem().string();
    out << "benchmarking " << name << " (" << data.rows() << " rows, " << data.features() << " features, "
        << data.classes() << " classes)\n";
    report.append(benchmark(name, data, protocol));
  }
  report.write_markdown(out);
  const auto write = [](const std::string& path, auto&& fn) {
    if (path.empty()) return;
    auto file = open_output(path);
    fn(file);
    finish_output(file, path);
  };
  write(a.csv, [&](std::ostream& f) { report.write_csv(f); });
  write(a.md, [&](std::ostream& f) { report.write_markdown(f); });
  write(a.trial_log, [&](std::ostream& f) { report.write_trial_log_csv(f); });
  return 0;
}

int cmd_plot(const std::string& model_path, const std::string& dataset, const std::string& schema,
             const std::string& out_dir, std::size_t resolution, std::ostream& out) {
  const MoDTModel model = load_model(model_path);
  if (!model.gating.mode.is_two_d())
    throw Error(ErrorKind::NotTwoDGate, "gate regions can only be plotted for 2D gates; retrain with --gate 2d");
  const Dataset data = load_for_model(model, dataset, schema, TargetPolicy::Required);

  const std::string stem = fs::path(model_path).stem().string();
  std::vector<std::pair<fs::path, std::string>> files;
  files.emplace_back(fs::path(out_dir) / (stem + "_gate.svg"),
                     render_gating_plot(GatePlotSpec{model, data, resolution, {}, {}}));
  for (std::size_t j = 0; j < model.experts(); ++j) {
    TreePlotSpec spec{model.trees[j], model.feature_names, model.class_names, {}, "Expert " + std::to_string(j)};
    files.emplace_back(fs::path(out_dir) / (stem + "_tree" + std::to_string(j) + ".svg"), render_tree(spec));
  }
  std::error_code ec;
  if (!out_dir.empty() && !fs::is_directory(out_dir, ec))
    throw Error(ErrorKind::IoError, "output directory '" + out_dir + "' does not exist");
  for (const auto& [path, svg] : files) {
    auto file = open_output(path);
    file << svg;
    finish_output(file, path);
    out << "wrote " << path.string() << '\n';
  }
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Mixture of decision trees: train, predict, evaluate, benchmark and plot", "modt"};
  app.require_subcommand(1);

  TrainArgs train_args;
  std::map<std::string, std::string> flag_values;
  auto* train_cmd = app.add_subcommand("train", "Train a model and write it as JSON");
  train_cmd->add_option("--dataset", train_args.dataset, "CSV file with a header row")->required();
  train_cmd->add_option("--schema", train_args.schema, "Column roles as key=value lines")->required();
  train_cmd->add_option("--out", train_args.out, "Model JSON output path")->required();
  train_cmd->add_option("--trace", train_args.trace, "Per-iteration trace CSV output path");
  train_cmd->add_option("--config", train_args.config, "Training settings as key=value lines");
  const std::vector<std::pair<std::string, std::string>> train_flags{
      {"experts", "Number of experts, or 'auto' for a mixture BIC estimate"},
      {"max-experts", "Upper bound for --experts auto"},
      {"depth", "Maximum tree depth"},
      {"gate", "Gate kind: 2d or full"},
      {"gamma", "Gate step size"},
      {"iterations", "EM iterations"},
      {"seed", "Random seed"},
      {"features", "Manual 2D gate features as i,j"},
      {"selection", "tree_importance, linear_importance or pca"},
      {"model-selection", "best_training_accuracy or last_iteration"},
      {"threads", "Worker threads"}};
  for (const auto& [flag, help] : train_flags) train_cmd->add_option("--" + flag, flag_values[flag], help);
  bool early_stop = false;
  train_cmd->add_flag("--early-stop", early_stop, "Stop once the gate parameters settle");

  std::string model_path, dataset, schema, out_path;
  auto* predict_cmd = app.add_subcommand("predict", "Write the predicted class and expert per row");
  predict_cmd->add_option("--model", model_path, "Model JSON")->required();
  predict_cmd->add_option("--dataset", dataset, "CSV file to predict")->required();
  predict_cmd->add_option("--schema", schema, "Column roles; defaults to the model's stored layout");
  predict_cmd->add_option("--out", out_path, "Predictions CSV output path; stdout when omitted");

  auto* eval_cmd = app.add_subcommand("eval", "Print accuracy on a labeled CSV file");
  eval_cmd->add_option("--model", model_path, "Model JSON")->required();
  eval_cmd->add_option("--dataset", dataset, "Labeled CSV file")->required();
  eval_cmd->add_option("--schema", schema, "Column roles; defaults to the model's stored layout");

  BenchArgs bench_args;
  auto* bench_cmd = app.add_subcommand("bench", "Compare MoDT against tree and forest baselines");
  bench_cmd->add_option("--dataset", bench_args.datasets, "CSV file; repeat for several datasets")->required();
  bench_cmd->add_option("--schema", bench_args.schemas, "Schema for each --dataset, in the same order")->required();
  bench_cmd->add_option("--trials", bench_args.protocol.trials, "Random search trials per MoDT variant");
  bench_cmd->add_option("--reps", bench_args.protocol.repetitions, "Train/test repetitions");
  bench_cmd->add_option("--top-k", bench_args.protocol.top_k, "Search configurations kept for testing");
  bench_cmd->add_option("--test-fraction", bench_args.protocol.test_fraction, "Held-out share per repetition");
  bench_cmd->add_option("--seed", bench_args.protocol.seed, "Base seed");
  bench_cmd->add_option("--experts", bench_args.protocol.experts, "Experts for the MoDT variants");
  bench_cmd->add_option("--depth", bench_args.protocol.max_depth, "Tree depth for the MoDT variants");
  bench_cmd->add_option("--threads", bench_args.protocol.threads, "Worker threads");
  bench_cmd->add_option("--methods", bench_args.methods, "Comma separated subset of methods");
  bench_cmd->add_option("--csv", bench_args.csv, "Report CSV output path");
  bench_cmd->add_option("--md", bench_args.md, "Report markdown output path");
  bench_cmd->add_option("--trial-log", bench_args.trial_log, "Search trial log CSV output path");

  std::string out_dir = ".";
  std::size_t resolution = 300;
  auto* plot_cmd = app.add_subcommand("plot", "Write SVGs of the gate regions and each expert tree");
  plot_cmd->add_option("--model", model_path, "Model JSON")->required();
  plot_cmd->add_option("--dataset", dataset, "Labeled CSV file drawn on the gate plot")->required();
  plot_cmd->add_option("--schema", schema, "Column roles; defaults to the model's stored layout");
  plot_cmd->add_option("--out-dir", out_dir, "Existing output directory");
  plot_cmd->add_option("--resolution", resolution, "Grid cells per axis")->check(CLI::PositiveNumber);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? 0 : static_cast<int>(ErrorClass::Usage);
  }

  try {
    if (train_cmd->parsed()) {
      for (const auto& [flag, help] : train_flags) {
        if (train_cmd->count("--" + flag) == 0) continue;
        std::string key = flag;
        std::replace(key.begin(), key.end(), '-', '_');
        train_args.flags[key] = flag_values[flag];
      }
      if (early_stop) train_args.flags["early_stop"] = "true";
      return cmd_train(train_args, out);
    }
    if (predict_cmd->parsed()) return cmd_predict(model_path, dataset, schema, out_path, out);
    if (eval_cmd->parsed()) return cmd_eval(model_path, dataset, schema, out);
    if (bench_cmd->parsed()) return cmd_bench(bench_args, out);
    if (plot_cmd->parsed()) return cmd_plot(model_path, dataset, schema, out_dir, resolution, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return static_cast<int>(error_class(e.kind()));
  } catch (const fs::filesystem_error& e) {
    err << "error: IoError: " << e.what() << '\n';
    return static_cast<int>(ErrorClass::Io);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return static_cast<int>(ErrorClass::Usage);
}

}  // namespace modt
