// Acceptance suite: one PASS/FAIL line per criterion, detail lines indented.
// Exit status is nonzero when any criterion fails.

#include "fixtures.hpp"
#include "gate_checks.hpp"
#include "oracles.hpp"
#include "modt/cli.hpp"
#include "modt/gating.hpp"
#include "modt/predict.hpp"
#include "modt/search.hpp"
#include "modt/trainer.hpp"
#include "modt/viz.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

using namespace modt;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::vector<std::string> details;

  void expect(bool ok, const std::string& what) {
    pass = pass && ok;
    details.push_back(std::string(ok ? "ok    " : "FAILED") + "  " + what);
  }
  void note(const std::string& what) { details.push_back("        " + what); }
};

std::string fmt(const char* format, auto... args) {
  char buf[256];
  std::snprintf(buf, sizeof buf, format, args...);
  return buf;
}

unsigned worker_count() { return std::max(1u, std::min(8u, std::thread::hardware_concurrency())); }

Matrix uniform_points(Rng& rng, const Matrix& like, std::size_t n) {
  Matrix X(static_cast<Eigen::Index>(n), like.cols());
  for (Eigen::Index f = 0; f < like.cols(); ++f) {
    const double lo = like.col(f).minCoeff(), hi = like.col(f).maxCoeff();
    const double pad = 0.1 * (hi - lo) + 0.1;
    for (Eigen::Index i = 0; i < X.rows(); ++i) X(i, f) = rng.uniform(lo - pad, hi + pad);
  }
  return X;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_csv(const Dataset& d, const fs::path& csv, const fs::path& schema) {
  std::ofstream out(csv);
  for (const auto& name : d.feature_names) out << name << ',';
  out << "label\n";
  out.precision(17);
  for (std::size_t i = 0; i < d.rows(); ++i) {
    for (Eigen::Index f = 0; f < d.X.cols(); ++f) out << d.X(static_cast<Eigen::Index>(i), f) << ',';
    out << d.class_names[static_cast<std::size_t>(d.y[i])] << '\n';
  }
  std::ofstream s(schema);
  for (const auto& name : d.feature_names) s << name << "=numeric\n";
  s << "label=target\n";
}

Outcome worked_example() {
  Outcome o;
  Matrix G(1, 3), C(1, 3);
  G << 0.7, 0.2, 0.1;
  C << 1.0, 0.9, 0.5;
  const Matrix E = expectation(G, C);
  const double expected[3] = {0.753, 0.194, 0.054};
  for (Eigen::Index j = 0; j < 3; ++j)
    o.expect(std::abs(E(0, j) - expected[j]) <= 5e-4, fmt("E[%d] = %.6f, expected %.3f +- 5e-4", static_cast<int>(j), E(0, j), expected[j]));
  return o;
}

Outcome single_expert_collapse() {
  Outcome o;
  Rng rng(101);
  std::size_t mismatches = 0, points = 0;
  for (int t = 0; t < 25; ++t) {
    const std::size_t n = 10 + rng.index(191);
    const std::size_t p = 1 + rng.index(6);
    const int k = 2 + static_cast<int>(rng.index(2));
    const auto d = fixtures::random_dataset(rng, n, p, k);
    TrainConfig c;
    c.experts = 1;
    c.max_depth = 2;
    c.gate = t % 2 ? GateMode::Kind::Full : GateMode::Kind::TwoD;
    if (p < 2) c.gate = GateMode::Kind::Full;
    c.iterations = 5;
    c.seed = static_cast<std::uint64_t>(t);
    const auto model = train(d, c);
    const std::vector<double> w(n, 1.0);
    const auto tree = fit_tree(d.X, d.y, w, 2, k);
    const Matrix probe = uniform_points(rng, d.X, 100);
    for (const Matrix* X : {&d.X, &probe}) {
      const auto a = predict(model, *X);
      const auto b = tree.predict(*X);
      for (std::size_t i = 0; i < a.size(); ++i) mismatches += a[i] != b[i];
      points += a.size();
    }
  }
  o.expect(mismatches == 0, fmt("25 datasets, %zu points, %zu disagreements with a direct depth-2 tree", points, mismatches));
  return o;
}

Outcome hard_gate_oracle() {
  Outcome o;
  std::vector<std::pair<std::string, MoDTModel>> models;
  const auto iris = fixtures::load("iris");
  for (auto gate : {GateMode::Kind::TwoD, GateMode::Kind::Full}) {
    TrainConfig c;
    c.gate = gate;
    c.seed = 4;
    models.emplace_back(std::string("iris ") + to_string(gate), train(iris, c));
  }
  const auto bands = fixtures::three_bands();
  {
    TrainConfig c;
    c.experts = 3;
    c.max_depth = 1;
    c.gamma = 10.0;
    c.iterations = 60;
    models.emplace_back("three bands", train(bands, c));
  }
  Rng rng(7);
  const auto random = fixtures::random_dataset(rng, 150, 5, 3);
  {
    TrainConfig c;
    c.experts = 4;
    c.gate = GateMode::Kind::Full;
    models.emplace_back("random 5-feature", train(random, c));
  }
  for (const auto& [name, m] : models) {
    const Matrix& like = name.starts_with("iris") ? iris.X : name == "three bands" ? bands.X : random.X;
    const Matrix X = uniform_points(rng, like, 100);
    const auto got = predict(m, X);
    const Matrix Xg = gate_input(X, m.gating.mode);
    std::size_t mismatches = 0;
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
      std::vector<double> z(m.experts());
      std::vector<int> votes(m.experts());
      for (std::size_t j = 0; j < m.experts(); ++j) {
        z[j] = 0.0;
        for (Eigen::Index q = 0; q < Xg.cols(); ++q) z[j] += Xg(i, q) * m.gating.theta(q, static_cast<Eigen::Index>(j));
        votes[j] = m.trees[j].predict_class({X.data() + i * X.cols(), static_cast<std::size_t>(X.cols())});
      }
      mismatches += got[static_cast<std::size_t>(i)] != oracle::hard_gate_sum(oracle::naive_softmax(z), votes);
    }
    o.expect(mismatches == 0, fmt("%s: %zu of 100 points differ from the indicator sum", name.c_str(), mismatches));
  }
  return o;
}

Outcome row_stochasticity() {
  Outcome o;
  Rng rng(404);
  std::size_t rows = 0, compared = 0, bad_g = 0, bad_e = 0, bad_naive = 0;
  double worst_naive = 0.0;
  for (int t = 0; t < 1000; ++t) {
    const auto n = static_cast<Eigen::Index>(1 + rng.index(8));
    const auto q = static_cast<Eigen::Index>(1 + rng.index(4));
    const auto e = static_cast<Eigen::Index>(1 + rng.index(5));
    const double scale = std::pow(10.0, rng.uniform(-2.0, 6.0));
    Matrix X(n, q);
    for (Eigen::Index i = 0; i < X.size(); ++i) X.data()[i] = rng.uniform(-1.0, 1.0);
    const Matrix Xg = append_bias(X);
    Matrix theta(q + 1, e);
    for (Eigen::Index i = 0; i < theta.size(); ++i) theta.data()[i] = rng.uniform(-scale, scale);
    Matrix C(n, e);
    for (Eigen::Index i = 0; i < C.size(); ++i) C.data()[i] = rng.uniform() < 0.2 ? 0.0 : rng.uniform();
    const Matrix G = gating_values(Xg, theta);
    const Matrix E = expectation(G, C);
    for (Eigen::Index i = 0; i < n; ++i) {
      ++rows;
      bad_g += std::abs(G.row(i).sum() - 1.0) > 1e-9 || G.row(i).minCoeff() < 0.0 || !G.row(i).allFinite();
      bad_e += std::abs(E.row(i).sum() - 1.0) > 1e-9 || E.row(i).minCoeff() < 0.0 || !E.row(i).allFinite();
      std::vector<double> z(static_cast<std::size_t>(e));
      for (Eigen::Index j = 0; j < e; ++j) z[static_cast<std::size_t>(j)] = Xg.row(i).dot(theta.col(j));
      const auto naive = oracle::naive_softmax(z);
      bool finite = true;
      for (double v : naive) finite = finite && std::isfinite(v);
      if (!finite) continue;
      ++compared;
      for (Eigen::Index j = 0; j < e; ++j) {
        const double diff = std::abs(naive[static_cast<std::size_t>(j)] - G(i, j));
        worst_naive = std::max(worst_naive, diff);
        bad_naive += diff > 1e-9;
      }
    }
  }
  o.expect(bad_g == 0, fmt("G: %zu of %zu rows off the simplex", bad_g, rows));
  o.expect(bad_e == 0, fmt("E: %zu of %zu rows off the simplex", bad_e, rows));
  o.expect(bad_naive == 0, fmt("naive softmax finite on %zu rows, max difference %.3g", compared, worst_naive));
  return o;
}

Outcome cart_oracle() {
  Outcome o;
  Rng rng(505);
  std::size_t violations = 0, nodes = 0;
  for (int t = 0; t < 50; ++t) {
    const std::size_t n = 2 + rng.index(49);
    const std::size_t p = 1 + rng.index(3);
    const int k = 2 + static_cast<int>(rng.index(2));
    const int depth = 1 + static_cast<int>(rng.index(2));
    const auto d = fixtures::random_dataset(rng, n, p, k);
    std::vector<double> w(n);
    for (double& v : w) v = rng.uniform() < 0.1 ? 0.0 : rng.uniform(0.05, 3.0);
    w[0] = 1.0;
    // Zero-weight rows take no part in split selection; the oracle sees the
    // positive-weight rows only.
    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < n; ++i)
      if (w[i] > 0.0) keep.push_back(i);
    const Dataset kept = d.subset(keep);
    std::vector<double> kept_w;
    for (std::size_t i : keep) kept_w.push_back(w[i]);
    const auto tree = fit_tree(d.X, d.y, w, depth, k);
    nodes += tree.node_count();
    violations += oracle::greedy_level_violations(tree, kept.X, kept.y, kept_w, k, depth);
  }
  o.expect(violations == 0, fmt("50 datasets, %zu nodes, %zu disagreements with exhaustive split search", nodes, violations));
  return o;
}

Outcome least_squares_optimality() {
  Outcome o;
  Rng rng(606);
  double worst = 0.0;
  for (int t = 0; t < 20; ++t) {
    const auto n = static_cast<Eigen::Index>(30 + rng.index(70));
    const auto q = static_cast<Eigen::Index>(1 + rng.index(5));
    const auto e = static_cast<Eigen::Index>(1 + rng.index(4));
    Matrix X(n, q), beta0(q + 1, e);
    for (Eigen::Index i = 0; i < X.size(); ++i) X.data()[i] = rng.uniform(-2.0, 2.0);
    for (Eigen::Index i = 0; i < beta0.size(); ++i) beta0.data()[i] = rng.uniform(-3.0, 3.0);
    const Matrix Xg = append_bias(X);
    worst = std::max(worst, (least_squares(Xg, Xg * beta0) - beta0).cwiseAbs().maxCoeff());
  }
  o.expect(worst <= 1e-6, fmt("planted beta recovered on 20 systems, max error %.3g", worst));

  Matrix X(50, 3), T(50, 3);
  for (Eigen::Index i = 0; i < X.size(); ++i) X.data()[i] = rng.uniform(-1.0, 1.0);
  for (Eigen::Index i = 0; i < T.size(); ++i) T.data()[i] = rng.uniform(-1.0, 1.0);
  const Matrix Xg = append_bias(X);
  const Matrix beta = least_squares(Xg, T);
  const double best = oracle::rss(Xg, T, beta);
  std::size_t worse = 0;
  for (int t = 0; t < 1000; ++t) {
    const double scale = std::pow(10.0, rng.uniform(-4.0, 0.0));
    Matrix delta(4, 3);
    for (Eigen::Index i = 0; i < delta.size(); ++i) delta.data()[i] = rng.uniform(-scale, scale);
    worse += oracle::rss(Xg, T, beta + delta) < best;
  }
  o.expect(worse == 0, fmt("RSS %.6f; %zu of 1000 perturbations did better", best, worse));
  return o;
}

Outcome diagonal_boundary() {
  Outcome o;
  const auto data = fixtures::diagonal(600, 42);
  const auto [train_set, test_set] = train_test_split(data, 0.25, 1);
  const std::vector<double> w(train_set.rows(), 1.0);
  const auto tree = fit_tree(train_set.X, train_set.y, w, 2, 2);
  const double tree_test = accuracy(tree.predict(test_set.X), test_set.y);
  const double ceiling = oracle::best_depth2_accuracy(data.X, data.y, 2);

  double best_train = -1.0, modt_test = 0.0;
  std::uint64_t best_seed = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    TrainConfig c;
    c.experts = 2;
    c.max_depth = 2;
    c.gate = GateMode::Kind::Full;
    c.iterations = 40;
    c.gamma = 10.0;
    c.seed = seed;
    const auto m = train(train_set, c);
    if (m.meta.training_accuracy > best_train) {
      best_train = m.meta.training_accuracy;
      modt_test = evaluate(m, test_set);
      best_seed = seed;
    }
  }
  o.note(fmt("best depth-2 tree on all 600 points (exhaustive search): %.4f", ceiling));
  o.expect(modt_test >= 0.95, fmt("MoDT e=2 d=2 full gate, gamma 10, best of 10 seeds (seed %llu): test %.4f >= 0.95",
                                  static_cast<unsigned long long>(best_seed), modt_test));
  o.expect(tree_test <= 0.85, fmt("depth-2 tree: test %.4f <= 0.85", tree_test));
  return o;
}

const ReportRow* row_of(const BenchmarkReport& r, const std::string& name, Method m) { return r.find(name, m); }

Outcome table_spot_checks() {
  Outcome o;
  const auto dir = fixtures::data_dir();
  const unsigned threads = worker_count();

  const auto iris = fixtures::load("iris");
  Protocol p;
  p.trials = 100;
  p.repetitions = 20;
  p.top_k = 10;
  p.threads = threads;
  p.methods = {Method::MoDT2D, Method::ForestFull};
  const auto iris_report = benchmark("iris", iris, p);
  const auto* modt_2d = row_of(iris_report, "iris", Method::MoDT2D);
  const auto* forest = row_of(iris_report, "iris", Method::ForestFull);
  o.expect(modt_2d && modt_2d->test_mean >= 0.90,
           fmt("iris MoDT-2D (100 trials, 20 reps): test %.4f +- %.4f >= 0.90", modt_2d->test_mean, modt_2d->test_std));
  o.expect(forest && forest->test_mean >= 0.90,
           fmt("iris RF 100 unrestricted trees: test %.4f +- %.4f >= 0.90", forest->test_mean, forest->test_std));

  if (!fs::exists(dir / "banknote.csv") || !fs::exists(dir / "banknote.schema")) {
    o.expect(false, "banknote checks: " + (dir / "banknote.csv").string() +
                        " not found; set MODT_DATA_DIR to a directory with banknote.csv and banknote.schema");
  } else {
    const auto banknote = fixtures::load("banknote");
    p.methods = {Method::MoDT2D, Method::MoDTFull, Method::Tree2};
    const auto report = benchmark("banknote", banknote, p);
    const auto* fg = row_of(report, "banknote", Method::MoDTFull);
    const auto* two_d = row_of(report, "banknote", Method::MoDT2D);
    const auto* dt2 = row_of(report, "banknote", Method::Tree2);
    o.expect(fg->test_mean >= 0.97, fmt("banknote MoDT-FG: test %.4f +- %.4f >= 0.97", fg->test_mean, fg->test_std));
    o.expect(dt2->test_mean >= 0.85 && dt2->test_mean <= 0.97,
             fmt("banknote DT d=2: test %.4f +- %.4f in [0.85, 0.97]", dt2->test_mean, dt2->test_std));
    o.expect(std::max(fg->test_mean, two_d->test_mean) > dt2->test_mean,
             fmt("banknote MoDT (2D %.4f, FG %.4f) beats DT d=2 %.4f", two_d->test_mean, fg->test_mean, dt2->test_mean));
  }

  // Full method grid through the command line on two datasets.
  const fs::path tmp = fs::temp_directory_path() / "modt_acceptance_bench";
  fs::remove_all(tmp);
  fs::create_directories(tmp);
  write_csv(fixtures::diagonal(400, 9), tmp / "diagonal.csv", tmp / "diagonal.schema");
  std::vector<std::string> args{"bench",   "--dataset", (dir / "iris.csv").string(),  "--schema",
                                (dir / "iris.schema").string(), "--dataset", (tmp / "diagonal.csv").string(),
                                "--schema", (tmp / "diagonal.schema").string(), "--trials", "20", "--reps", "5",
                                "--top-k", "3", "--threads", std::to_string(threads), "--csv", (tmp / "report.csv").string()};
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  const std::string csv = slurp(tmp / "report.csv");
  const auto lines = std::count(csv.begin(), csv.end(), '\n');
  o.expect(code == 0 && lines == 1 + 2 * 7,
           fmt("bench CLI, 7 methods x 2 datasets: exit %d, %ld report rows", code, static_cast<long>(lines - 1)));
  if (code != 0) o.note(err.str());
  fs::remove_all(tmp);
  return o;
}

Outcome visualization() {
  Outcome o;
  const auto bands = fixtures::three_bands();
  MoDTModel best;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    TrainConfig c;
    c.experts = 3;
    c.max_depth = 1;
    c.gamma = 10.0;
    c.iterations = 60;
    c.seed = seed;
    auto m = train(bands, c);
    if (seed == 0 || m.meta.training_accuracy > best.meta.training_accuracy) best = std::move(m);
  }
  const auto text = render_gating_plot({best, bands, 150, {}, {}});
  const auto range = gate_check::padded_range(bands.X, 0, 1);
  const auto r = gate_check::check(text, best.gating.theta, range);
  o.expect(r.well_formed, "gate SVG parses as XML with an svg root");
  o.expect(r.fills.size() == best.experts(),
           fmt("three-band model: %zu distinct region fills for e=%zu", r.fills.size(), best.experts()));
  o.expect(r.far_mismatches == 0, fmt("%zu cells, %zu differ from the analytic argmax, %zu of them more than one cell away",
                                      r.cells, r.mismatched, r.far_mismatches));
  o.expect(render_gating_plot({best, bands, 150, {}, {}}) == text, "re-rendering is byte-identical");
  return o;
}

Outcome reproducibility() {
  Outcome o;
  const auto dir = fixtures::data_dir();
  const fs::path tmp = fs::temp_directory_path() / "modt_acceptance_repro";
  fs::remove_all(tmp);
  fs::create_directories(tmp);
  std::vector<std::string> contents;
  for (const char* name : {"a", "b"}) {
    std::ostringstream out, err;
    const int code = run_cli({"train", "--dataset", (dir / "iris.csv").string(), "--schema", (dir / "iris.schema").string(),
                              "--experts", "3", "--depth", "2", "--gate", "2d", "--seed", "7", "--out",
                              (tmp / (std::string(name) + ".json")).string()},
                             out, err);
    o.expect(code == 0, fmt("train run %s exits %d", name, code));
    contents.push_back(slurp(tmp / (std::string(name) + ".json")));
  }
  o.expect(!contents[0].empty() && contents[0] == contents[1],
           fmt("model files byte-identical (%zu bytes)", contents[0].size()));
  fs::remove_all(tmp);
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"1 worked-example expectation", worked_example},
      {"2 single-expert collapse", single_expert_collapse},
      {"3 hard-gate indicator-sum oracle", hard_gate_oracle},
      {"4 row-stochasticity", row_stochasticity},
      {"5 CART exhaustive-split oracle", cart_oracle},
      {"6 least-squares optimality", least_squares_optimality},
      {"7 diagonal-boundary advantage", diagonal_boundary},
      {"8 benchmark spot checks", table_spot_checks},
      {"9 visualization contract", visualization},
      {"10 reproducibility", reproducibility},
  };
  int failed = 0;
  for (const auto& [name, run] : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome outcome;
    try {
      outcome = run();
    } catch (const std::exception& e) {
      outcome.expect(false, std::string("threw: ") + e.what());
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::cout << (outcome.pass ? "PASS " : "FAIL ") << name << fmt(" (%.1fs)", seconds) << '\n';
    for (const auto& line : outcome.details) std::cout << "    " << line << '\n';
    std::cout.flush();
    failed += !outcome.pass;
  }
  std::cout << (failed == 0 ? "all criteria passed" : fmt("%d of %zu criteria failed", failed, criteria.size())) << '\n';
  return failed == 0 ? 0 : 1;
}
