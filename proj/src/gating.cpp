#include "modt/gating.hpp"

#include "modt/error.hpp"
#include "modt/rng.hpp"
#include "modt/tree.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <string>

namespace modt {
namespace {

FeaturePair top_two(std::span<const double> scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return {order[0], order[1]};
}

// Columns scaled to zero mean and unit variance; constant columns become 0.
Matrix standardized(const Matrix& X) {
  Matrix Z = X;
  const double n = static_cast<double>(X.rows());
  for (Eigen::Index c = 0; c < X.cols(); ++c) {
    const double mean = X.col(c).mean();
    Z.col(c).array() -= mean;
    const double sd = std::sqrt(Z.col(c).squaredNorm() / n);
    if (sd > 0.0)
      Z.col(c) /= sd;
    else
      Z.col(c).setZero();
  }
  return Z;
}

std::vector<double> linear_importance(const Matrix& X, std::span<const int> y, int n_classes) {
  const Matrix Zb = append_bias(standardized(X));
  Matrix T = Matrix::Zero(Zb.rows(), n_classes);
  for (std::size_t i = 0; i < y.size(); ++i) T(static_cast<Eigen::Index>(i), y[i]) = 1.0;
  Eigen::MatrixXd gram = Zb.transpose() * Zb;
  gram.diagonal().array() += 1e-8;
  const Eigen::MatrixXd beta = gram.ldlt().solve(Zb.transpose() * T);
  std::vector<double> scores(static_cast<std::size_t>(X.cols()));
  for (Eigen::Index f = 0; f < X.cols(); ++f) scores[static_cast<std::size_t>(f)] = beta.row(f).cwiseAbs().sum();
  return scores;
}

std::vector<double> pca_loadings(const Matrix& X) {
  const Matrix Z = standardized(X);
  const Eigen::MatrixXd cov = Z.transpose() * Z;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  const Eigen::VectorXd first = solver.eigenvectors().col(cov.cols() - 1);  // eigenvalues ascend
  std::vector<double> scores(static_cast<std::size_t>(X.cols()));
  for (Eigen::Index f = 0; f < X.cols(); ++f) scores[static_cast<std::size_t>(f)] = std::abs(first(f));
  return scores;
}

double log_sum_exp(std::span<const double> v) {
  double mx = -std::numeric_limits<double>::infinity();
  for (double x : v) mx = std::max(mx, x);
  if (!std::isfinite(mx)) return mx;
  double s = 0.0;
  for (double x : v) s += std::exp(x - mx);
  return mx + std::log(s);
}

struct SphericalMixture {
  std::vector<double> weights;
  Matrix means;
  std::vector<double> variances;
};

constexpr double kVarianceFloor = 1e-6;

SphericalMixture seed_mixture(const Matrix& X, std::size_t K, Rng& rng) {
  const auto n = static_cast<std::size_t>(X.rows());
  const Eigen::Index p = X.cols();
  Matrix centers(static_cast<Eigen::Index>(K), p);
  centers.row(0) = X.row(static_cast<Eigen::Index>(rng.index(n)));
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  for (std::size_t k = 1; k < K; ++k) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const auto ii = static_cast<Eigen::Index>(i);
      d2[i] = std::min(d2[i], (X.row(ii) - centers.row(static_cast<Eigen::Index>(k - 1))).squaredNorm());
      total += d2[i];
    }
    std::size_t pick = rng.index(n);
    if (total > 0.0) {
      double target = rng.uniform() * total;
      for (std::size_t i = 0; i < n; ++i) {
        target -= d2[i];
        if (target < 0.0 || i + 1 == n) {
          pick = i;
          break;
        }
      }
    }
    centers.row(static_cast<Eigen::Index>(k)) = X.row(static_cast<Eigen::Index>(pick));
  }

  // Hard assignment to the nearest seed gives the initial parameters.
  SphericalMixture mix{std::vector<double>(K, 0.0), Matrix::Zero(static_cast<Eigen::Index>(K), p),
                       std::vector<double>(K, 0.0)};
  std::vector<std::size_t> owner(n);
  for (std::size_t i = 0; i < n; ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < K; ++k) {
      const double d = (X.row(static_cast<Eigen::Index>(i)) - centers.row(static_cast<Eigen::Index>(k))).squaredNorm();
      if (d < best) {
        best = d;
        owner[i] = k;
      }
    }
    mix.weights[owner[i]] += 1.0;
    mix.means.row(static_cast<Eigen::Index>(owner[i])) += X.row(static_cast<Eigen::Index>(i));
  }
  for (std::size_t k = 0; k < K; ++k) {
    if (mix.weights[k] > 0.0)
      mix.means.row(static_cast<Eigen::Index>(k)) /= mix.weights[k];
    else
      mix.means.row(static_cast<Eigen::Index>(k)) = centers.row(static_cast<Eigen::Index>(k));
  }
  for (std::size_t i = 0; i < n; ++i)
    mix.variances[owner[i]] +=
        (X.row(static_cast<Eigen::Index>(i)) - mix.means.row(static_cast<Eigen::Index>(owner[i]))).squaredNorm();
  for (std::size_t k = 0; k < K; ++k) {
    const double count = std::max(mix.weights[k], 1.0);
    mix.variances[k] = mix.variances[k] / (count * static_cast<double>(p)) + kVarianceFloor;
    mix.weights[k] = std::max(mix.weights[k], 1.0) / static_cast<double>(n);
  }
  return mix;
}

// Per-row log joint densities log(pi_k) + log N(x | mu_k, s_k I).
Matrix log_joint(const Matrix& X, const SphericalMixture& mix) {
  const auto K = mix.weights.size();
  const double p = static_cast<double>(X.cols());
  Matrix L(X.rows(), static_cast<Eigen::Index>(K));
  for (std::size_t k = 0; k < K; ++k) {
    const double var = mix.variances[k];
    const double log_norm = -0.5 * p * std::log(2.0 * std::numbers::pi * var);
    const double log_w = mix.weights[k] > 0.0 ? std::log(mix.weights[k]) : -std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
      const double d2 = (X.row(i) - mix.means.row(static_cast<Eigen::Index>(k))).squaredNorm();
      L(i, static_cast<Eigen::Index>(k)) = log_w + log_norm - 0.5 * d2 / var;
    }
  }
  return L;
}

}  // namespace

const char* to_string(GateMode::Kind kind) noexcept { return kind == GateMode::Kind::TwoD ? "2d" : "full"; }

GateMode::Kind parse_gate_kind(std::string_view text) {
  if (text == "2d" || text == "2D" || text == "two_d") return GateMode::Kind::TwoD;
  if (text == "full" || text == "fg") return GateMode::Kind::Full;
  throw Error(ErrorKind::InvalidConfig, "unknown gate mode '" + std::string(text) + "' (expected 2d or full)");
}

const char* to_string(SelectionMethod method) noexcept {
  switch (method) {
    case SelectionMethod::TreeImportance: return "tree_importance";
    case SelectionMethod::LinearImportance: return "linear_importance";
    case SelectionMethod::Pca: return "pca";
    case SelectionMethod::Manual: return "manual";
  }
  return "tree_importance";
}

SelectionMethod parse_selection_method(std::string_view text) {
  if (text == "tree_importance") return SelectionMethod::TreeImportance;
  if (text == "linear_importance") return SelectionMethod::LinearImportance;
  if (text == "pca") return SelectionMethod::Pca;
  if (text == "manual") return SelectionMethod::Manual;
  throw Error(ErrorKind::InvalidConfig, "unknown feature selection method '" + std::string(text) + "'");
}

Matrix gate_input(const Matrix& X, const GateMode& mode) {
  if (!mode.is_two_d()) return append_bias(X);
  const auto [i, j] = mode.features;
  const auto p = static_cast<std::size_t>(X.cols());
  if (i == j || i >= p || j >= p) {
    throw Error(ErrorKind::BadFeatureIndex, "gate features (" + std::to_string(i) + ", " + std::to_string(j) +
                                                ") invalid for " + std::to_string(p) + " columns");
  }
  Matrix out(X.rows(), 3);
  out.col(0) = X.col(static_cast<Eigen::Index>(i));
  out.col(1) = X.col(static_cast<Eigen::Index>(j));
  out.col(2).setOnes();
  return out;
}

Matrix gating_values(const Matrix& Xg, const Matrix& theta) {
  if (Xg.cols() != theta.rows()) {
    throw Error(ErrorKind::WidthMismatch, "gate input has " + std::to_string(Xg.cols()) + " columns, theta has " +
                                              std::to_string(theta.rows()) + " rows");
  }
  if (theta.cols() < 1) throw Error(ErrorKind::InvalidConfig, "gate needs at least one expert");
  Matrix G = Xg * theta;
  if (!G.allFinite()) throw Error(ErrorKind::NonFiniteInput, "gate logits are not finite");
  for (Eigen::Index i = 0; i < G.rows(); ++i) {
    auto row = G.row(i);
    row = (row.array() - row.maxCoeff()).exp();
    row /= row.sum();
  }
  return G;
}

std::size_t select_expert(std::span<const double> gate_row) {
  std::size_t best = 0;
  for (std::size_t j = 1; j < gate_row.size(); ++j)
    if (gate_row[j] > gate_row[best]) best = j;
  return best;
}

Matrix init_theta(std::size_t q, std::size_t experts, std::uint64_t seed) {
  if (experts < 1) throw Error(ErrorKind::InvalidConfig, "expert count must be at least 1");
  Rng rng(seed);
  Matrix theta(static_cast<Eigen::Index>(q + 1), static_cast<Eigen::Index>(experts));
  for (Eigen::Index r = 0; r < theta.rows(); ++r)
    for (Eigen::Index c = 0; c < theta.cols(); ++c) theta(r, c) = rng.uniform(-1.0, 1.0);
  return theta;
}

FeaturePair select_gating_features(const Matrix& X, std::span<const int> y, int n_classes, SelectionMethod method,
                                   std::optional<FeaturePair> manual) {
  const auto p = static_cast<std::size_t>(X.cols());
  if (p < 2) throw Error(ErrorKind::TooFewFeatures, "a 2D gate needs at least two features");
  if (method == SelectionMethod::Manual) {
    if (!manual || manual->first == manual->second || manual->first >= p || manual->second >= p)
      throw Error(ErrorKind::BadManualPair, "manual gate features must be two distinct valid column indices");
    return *manual;
  }
  if (p == 2) return {0, 1};
  if (X.rows() == 0 || y.size() != static_cast<std::size_t>(X.rows()))
    throw Error(ErrorKind::EmptyInput, "feature selection needs labeled rows");

  switch (method) {
    case SelectionMethod::TreeImportance: {
      const std::vector<double> ones(y.size(), 1.0);
      const auto tree = fit_tree(X, y, ones, 5, n_classes);
      return top_two(tree.feature_importance());
    }
    case SelectionMethod::LinearImportance:
      return top_two(linear_importance(X, y, n_classes));
    case SelectionMethod::Pca:
      return top_two(pca_loadings(X));
    case SelectionMethod::Manual:
      break;
  }
  return {0, 1};
}

double gmm_bic(const Matrix& X, std::size_t K, std::uint64_t seed) {
  const auto n = static_cast<std::size_t>(X.rows());
  if (K < 1 || n < K) throw Error(ErrorKind::InvalidConfig, "mixture needs 1 <= components <= rows");
  const double p = static_cast<double>(X.cols());
  Rng rng(seed);
  SphericalMixture mix = seed_mixture(X, K, rng);

  Matrix R(X.rows(), static_cast<Eigen::Index>(K));
  double log_likelihood = 0.0;
  for (int iter = 0; iter <= 100; ++iter) {
    const Matrix L = log_joint(X, mix);
    log_likelihood = 0.0;
    for (Eigen::Index i = 0; i < L.rows(); ++i) {
      const double lse = log_sum_exp({L.data() + i * L.cols(), K});
      log_likelihood += lse;
      R.row(i) = (L.row(i).array() - lse).exp();
    }
    if (iter == 100) break;
    for (std::size_t k = 0; k < K; ++k) {
      const auto kk = static_cast<Eigen::Index>(k);
      const double nk = R.col(kk).sum();
      if (nk < 1e-12) {
        mix.weights[k] = 0.0;
        continue;
      }
      mix.weights[k] = nk / static_cast<double>(n);
      mix.means.row(kk) = (R.col(kk).transpose() * X) / nk;
      double spread = 0.0;
      for (Eigen::Index i = 0; i < X.rows(); ++i) spread += R(i, kk) * (X.row(i) - mix.means.row(kk)).squaredNorm();
      mix.variances[k] = spread / (nk * p) + kVarianceFloor;
    }
  }
  const double params = static_cast<double>(K) * p + static_cast<double>(K) + static_cast<double>(K - 1);
  return -2.0 * log_likelihood + params * std::log(static_cast<double>(n));
}

std::size_t estimate_expert_count(const Matrix& X, std::size_t e_max, std::uint64_t seed) {
  if (e_max < 1) throw Error(ErrorKind::InvalidConfig, "e_max must be at least 1");
  if (e_max == 1) return 1;
  if (static_cast<std::size_t>(X.rows()) <= e_max)
    throw Error(ErrorKind::InvalidConfig, "expert estimation needs more rows than e_max");
  std::size_t best = 1;
  double best_bic = std::numeric_limits<double>::infinity();
  for (std::size_t e = 1; e <= e_max; ++e) {
    const double bic = gmm_bic(X, e, seed);
    if (std::isfinite(bic) && bic < best_bic) {
      best_bic = bic;
      best = e;
    }
  }
  return best;
}

}  // namespace modt
