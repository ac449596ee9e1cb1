#pragma once

#include "modt/data.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace modt {

struct FeaturePair {
  std::size_t first = 0;
  std::size_t second = 1;

  friend bool operator==(const FeaturePair&, const FeaturePair&) = default;
};

/// Which inputs the gate sees: every feature, or a selected pair.
struct GateMode {
  enum class Kind { Full, TwoD };

  Kind kind = Kind::Full;
  FeaturePair features;  // TwoD only

  static GateMode full() { return {}; }
  static GateMode two_d(std::size_t i, std::size_t j) { return {Kind::TwoD, {i, j}}; }

  bool is_two_d() const { return kind == Kind::TwoD; }
  // Number of gate inputs excluding the bias.
  std::size_t width(std::size_t n_features) const { return is_two_d() ? 2 : n_features; }
};

const char* to_string(GateMode::Kind kind) noexcept;
GateMode::Kind parse_gate_kind(std::string_view text);

/// Selected columns (or all of X) with the ones column appended.
Matrix gate_input(const Matrix& X, const GateMode& mode);

/// Row-wise softmax of Xg * theta with the row maximum subtracted first.
Matrix gating_values(const Matrix& Xg, const Matrix& theta);

/// Index of the largest entry; the lowest index wins ties.
std::size_t select_expert(std::span<const double> gate_row);

/// (q+1) x e matrix, entries uniform on [-1, 1].
Matrix init_theta(std::size_t q, std::size_t experts, std::uint64_t seed);

struct GatingModel {
  Matrix theta;  // (q+1) x e, last row multiplies the bias
  GateMode mode;

  std::size_t experts() const { return static_cast<std::size_t>(theta.cols()); }
  Matrix values(const Matrix& X) const { return gating_values(gate_input(X, mode), theta); }
};

enum class SelectionMethod { TreeImportance, LinearImportance, Pca, Manual };

const char* to_string(SelectionMethod method) noexcept;
SelectionMethod parse_selection_method(std::string_view text);

/// Picks the two gate features for the 2D mode. Returned in rank order.
FeaturePair select_gating_features(const Matrix& X, std::span<const int> y, int n_classes,
                                   SelectionMethod method, std::optional<FeaturePair> manual = std::nullopt);

/// BIC of a spherical Gaussian mixture with the given component count,
/// fitted by EM from k-means++ seeds.
double gmm_bic(const Matrix& X, std::size_t components, std::uint64_t seed = 0);

/// Component count in [1, e_max] with the lowest mixture BIC.
std::size_t estimate_expert_count(const Matrix& X, std::size_t e_max, std::uint64_t seed = 0);

}  // namespace modt
