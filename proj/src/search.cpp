#include "modt/search.hpp"

#include "modt/error.hpp"
#include "modt/parallel.hpp"
#include "modt/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <sstream>

namespace modt {
namespace {

constexpr double kValidationFraction = 0.2;

struct Moments {
  double mean = 0.0;
  double std = 0.0;
};

// Sample standard deviation; zero for a single observation.
Moments moments(std::span<const double> values) {
  Moments m;
  if (values.empty()) return m;
  m.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - m.mean) * (v - m.mean);
    m.std = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return m;
}

bool is_modt(Method m) { return m == Method::MoDT2D || m == Method::MoDTFull; }

std::string format_pm(double mean, double sd) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(2) << mean << " ± " << sd;
  return s.str();
}

}  // namespace

void SearchSpace::validate() const {
  if (!(gamma_min > 0.0) || !(gamma_max >= gamma_min))
    throw Error(ErrorKind::InvalidConfig, "gamma range must be positive and nonempty");
  if (iterations_min < 1 || iterations_max < iterations_min)
    throw Error(ErrorKind::InvalidConfig, "iteration range must be nonempty and >= 1");
  if (seed_max < seed_min) throw Error(ErrorKind::InvalidConfig, "seed range is empty");
  if (model_selections.empty()) throw Error(ErrorKind::InvalidConfig, "no model selection policy to sample");
  if (gate == GateMode::Kind::TwoD && feature_methods.empty())
    throw Error(ErrorKind::InvalidConfig, "no feature selection method to sample");
  for (auto m : feature_methods)
    if (m == SelectionMethod::Manual) throw Error(ErrorKind::InvalidConfig, "manual selection cannot be searched");
  if (experts < 1 || max_depth < 1) throw Error(ErrorKind::InvalidConfig, "experts and depth must be positive");
}

bool SearchSpace::contains(const TrainConfig& c) const {
  const auto in = [](const auto& list, auto v) { return std::find(list.begin(), list.end(), v) != list.end(); };
  return c.gamma >= gamma_min && c.gamma <= gamma_max && c.iterations >= iterations_min &&
         c.iterations <= iterations_max && c.seed >= seed_min && c.seed <= seed_max &&
         in(model_selections, c.model_selection) && (gate != GateMode::Kind::TwoD || in(feature_methods, c.selection)) &&
         c.experts == experts && c.max_depth == max_depth && c.gate == gate;
}

TrainConfig SearchSpace::sample(Rng& rng) const {
  TrainConfig c;
  c.experts = experts;
  c.max_depth = max_depth;
  c.gate = gate;
  const double lo = std::log(gamma_min);
  const double hi = std::log(gamma_max);
  c.gamma = std::clamp(std::exp(lo + (hi - lo) * rng.uniform()), gamma_min, gamma_max);
  c.iterations = iterations_min + static_cast<int>(rng.index(static_cast<std::size_t>(iterations_max - iterations_min) + 1));
  const std::uint64_t span = seed_max - seed_min;
  c.seed = seed_min + (span == UINT64_MAX ? rng.next() : static_cast<std::uint64_t>(rng.index(span + 1)));
  c.model_selection = model_selections[rng.index(model_selections.size())];
  if (!feature_methods.empty()) c.selection = feature_methods[rng.index(feature_methods.size())];
  return c;
}

SearchResult random_search(const Dataset& train_set, const SearchSpace& space, std::size_t n_trials,
                           std::size_t k_best, std::uint64_t seed, unsigned threads) {
  space.validate();
  if (k_best < 1 || n_trials < k_best) throw Error(ErrorKind::InvalidConfig, "need n_trials >= k_best >= 1");

  const auto split = split_indices(train_set.rows(), kValidationFraction, seed);
  const Dataset fit_part = train_set.subset(split.train);
  const Dataset val_part = train_set.subset(split.test);

  Rng rng(seed);
  SearchResult result;
  result.log.resize(n_trials);
  for (std::size_t t = 0; t < n_trials; ++t) {
    result.log[t].trial = t;
    result.log[t].config = space.sample(rng);
  }

  parallel_for(n_trials, threads, [&](std::size_t t) {
    TrialResult& trial = result.log[t];
    try {
      const MoDTModel model = train(fit_part, trial.config);
      trial.score = evaluate(model, val_part);
    } catch (const Error& e) {
      trial.ok = false;
      trial.error = e.what();
    }
  });

  std::vector<std::size_t> order;
  for (std::size_t t = 0; t < n_trials; ++t)
    if (result.log[t].ok) order.push_back(t);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return result.log[a].score > result.log[b].score; });
  for (std::size_t r = 0; r < order.size(); ++r) result.log[order[r]].rank = r + 1;
  for (std::size_t r = 0; r < std::min(k_best, order.size()); ++r) result.best.push_back(result.log[order[r]]);
  return result;
}

void write_trial_log_csv(std::ostream& out, const std::vector<TrialResult>& log) {
  out << "trial,rank,score,gamma,iterations,seed,model_selection,selection,experts,max_depth,gate,status\n";
  const auto precision = out.precision(17);
  for (const auto& t : log) {
    out << t.trial << ',' << t.rank << ',' << t.score << ',' << t.config.gamma << ',' << t.config.iterations << ','
        << t.config.seed << ',' << to_string(t.config.model_selection) << ',' << to_string(t.config.selection) << ','
        << t.config.experts << ',' << t.config.max_depth << ',' << to_string(t.config.gate) << ','
        << (t.ok ? "ok" : "failed") << '\n';
  }
  out.precision(precision);
}

const char* to_string(Method method) noexcept {
  switch (method) {
    case Method::MoDT2D: return "modt-2d";
    case Method::MoDTFull: return "modt-fg";
    case Method::Tree2: return "dt-d2";
    case Method::Tree3: return "dt-d3";
    case Method::Tree4: return "dt-d4";
    case Method::ForestSmall: return "rf-small";
    case Method::ForestFull: return "rf-100";
  }
  return "modt-2d";
}

Method parse_method(std::string_view text) {
  for (Method m : all_methods())
    if (text == to_string(m)) return m;
  throw Error(ErrorKind::InvalidConfig, "unknown method '" + std::string(text) + "'");
}

std::vector<Method> all_methods() {
  return {Method::MoDT2D, Method::MoDTFull, Method::Tree2,      Method::Tree3,
          Method::Tree4,  Method::ForestSmall, Method::ForestFull};
}

const ReportRow* BenchmarkReport::find(std::string_view dataset, Method method) const {
  for (const auto& row : rows)
    if (row.dataset == dataset && row.method == method) return &row;
  return nullptr;
}

void BenchmarkReport::append(const BenchmarkReport& other) {
  rows.insert(rows.end(), other.rows.begin(), other.rows.end());
  searches.insert(searches.end(), other.searches.begin(), other.searches.end());
}

void BenchmarkReport::write_csv(std::ostream& out) const {
  out << "dataset,method,train_mean,train_std,test_mean,test_std,runs\n";
  const auto precision = out.precision(6);
  for (const auto& r : rows) {
    out << r.dataset << ',' << to_string(r.method) << ',' << r.train_mean << ',' << r.train_std << ','
        << r.test_mean << ',' << r.test_std << ',' << r.runs << '\n';
  }
  out.precision(precision);
}

void BenchmarkReport::write_markdown(std::ostream& out) const {
  std::vector<std::string> datasets;
  std::vector<Method> methods;
  for (const auto& r : rows) {
    if (std::find(datasets.begin(), datasets.end(), r.dataset) == datasets.end()) datasets.push_back(r.dataset);
    if (std::find(methods.begin(), methods.end(), r.method) == methods.end()) methods.push_back(r.method);
  }
  out << "| dataset |";
  std::string rule = "|---|";
  for (Method m : methods) {
    if (is_modt(m)) {
      out << ' ' << to_string(m) << " train |";
      rule += "---|";
    }
    out << ' ' << to_string(m) << " test |";
    rule += "---|";
  }
  out << '\n' << rule << '\n';
  for (const auto& d : datasets) {
    out << "| " << d << " |";
    for (Method m : methods) {
      const ReportRow* r = find(d, m);
      if (is_modt(m)) out << ' ' << (r ? format_pm(r->train_mean, r->train_std) : "-") << " |";
      out << ' ' << (r ? format_pm(r->test_mean, r->test_std) : "-") << " |";
    }
    out << '\n';
  }
}

void BenchmarkReport::write_trial_log_csv(std::ostream& out) const {
  bool header = true;
  for (const auto& s : searches) {
    std::ostringstream block;
    modt::write_trial_log_csv(block, s.trials);
    std::string text = block.str();
    const auto first_nl = text.find('\n');
    if (header) {
      out << "dataset,method," << text.substr(0, first_nl + 1);
      header = false;
    }
    std::istringstream lines(text.substr(first_nl + 1));
    for (std::string line; std::getline(lines, line);) out << s.dataset << ',' << to_string(s.method) << ',' << line << '\n';
  }
}

BenchmarkReport benchmark(const std::string& name, const Dataset& data, const Protocol& protocol) {
  if (protocol.repetitions < 1) throw Error(ErrorKind::InvalidConfig, "benchmark needs at least one repetition");
  if (data.y.size() != data.rows()) throw Error(ErrorKind::EmptyInput, "benchmark data must be labeled");
  const int k = static_cast<int>(data.classes());

  std::vector<Dataset> train_parts;
  std::vector<Dataset> test_parts;
  for (std::size_t r = 0; r < protocol.repetitions; ++r) {
    const auto split = split_indices(data.rows(), protocol.test_fraction, protocol.seed + r);
    train_parts.push_back(data.subset(split.train));
    test_parts.push_back(data.subset(split.test));
  }

  BenchmarkReport report;
  for (Method method : protocol.methods) {
    std::vector<double> train_acc;
    std::vector<double> test_acc;

    if (is_modt(method)) {
      SearchSpace space = protocol.space;
      space.experts = protocol.experts;
      space.max_depth = protocol.max_depth;
      space.gate = method == Method::MoDT2D ? GateMode::Kind::TwoD : GateMode::Kind::Full;
      const SearchResult search =
          random_search(train_parts.front(), space, protocol.trials, protocol.top_k, protocol.seed, protocol.threads);
      report.searches.push_back({name, method, search.log});

      const std::size_t runs = search.best.size() * protocol.repetitions;
      train_acc.assign(runs, 0.0);
      test_acc.assign(runs, 0.0);
      parallel_for(runs, protocol.threads, [&](std::size_t i) {
        const TrainConfig& config = search.best[i / protocol.repetitions].config;
        const std::size_t rep = i % protocol.repetitions;
        const MoDTModel model = train(train_parts[rep], config);
        train_acc[i] = evaluate(model, train_parts[rep]);
        test_acc[i] = evaluate(model, test_parts[rep]);
      });
    } else {
      train_acc.assign(protocol.repetitions, 0.0);
      test_acc.assign(protocol.repetitions, 0.0);
      parallel_for(protocol.repetitions, protocol.threads, [&](std::size_t rep) {
        const Dataset& tr = train_parts[rep];
        const Dataset& te = test_parts[rep];
        std::vector<int> fit_pred;
        std::vector<int> test_pred;
        if (method == Method::Tree2 || method == Method::Tree3 || method == Method::Tree4) {
          const int depth = method == Method::Tree2 ? 2 : method == Method::Tree3 ? 3 : 4;
          const std::vector<double> w(tr.rows(), 1.0);
          const DecisionTree tree = fit_tree(tr.X, tr.y, w, depth, k);
          fit_pred = tree.predict(tr.X);
          test_pred = tree.predict(te.X);
        } else {
          const bool small = method == Method::ForestSmall;
          const RandomForest forest =
              fit_random_forest(tr.X, tr.y, k, small ? protocol.experts : 100,
                                small ? std::optional<int>(protocol.max_depth) : std::nullopt, protocol.seed + rep);
          fit_pred = rf_predict(forest, tr.X);
          test_pred = rf_predict(forest, te.X);
        }
        train_acc[rep] = accuracy(fit_pred, tr.y);
        test_acc[rep] = accuracy(test_pred, te.y);
      });
    }

    const Moments tr = moments(train_acc);
    const Moments te = moments(test_acc);
    report.rows.push_back({name, method, tr.mean, tr.std, te.mean, te.std, test_acc.size()});
  }
  return report;
}

}  // namespace modt
