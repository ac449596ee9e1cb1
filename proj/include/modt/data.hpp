#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace modt {

// Row-major so a sample is a contiguous span.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using KeyValues = std::vector<std::pair<std::string, std::string>>;

/// Parses `key=value` lines. Blank lines and lines starting with '#' are
/// skipped; surrounding whitespace is trimmed from keys and values.
KeyValues parse_key_values(std::string_view text);
KeyValues load_key_values(const std::filesystem::path& path);

enum class ColumnKind { Numeric, Categorical, Target, Ignore };

ColumnKind parse_column_kind(std::string_view text);
const char* to_string(ColumnKind kind) noexcept;

/// Column roles for a CSV file. Exactly one column is the target. Header
/// columns the schema does not mention are ignored.
struct Schema {
  std::vector<std::pair<std::string, ColumnKind>> columns;
  // Categories declared as `name=categorical:a|b|c`. Columns without an entry
  // take their categories from the data.
  std::map<std::string, std::vector<std::string>> domains;

  const std::string& target() const;
  static Schema parse(std::string_view text);
  static Schema load(const std::filesystem::path& path);
};

struct RawColumn {
  std::string name;
  ColumnKind kind = ColumnKind::Numeric;
  std::vector<double> numbers;       // Numeric columns
  std::vector<std::string> levels;   // Categorical columns
  std::vector<std::string> domain;   // declared categories, may be empty
};

/// Parsed but unencoded table. Feature columns keep header order.
struct RawDataset {
  std::vector<RawColumn> columns;
  std::string target_column;
  std::vector<std::string> target;  // empty when the file has no target column

  std::size_t rows() const;
  bool has_target() const { return !target.empty(); }
};

enum class TargetPolicy { Required, Optional };

RawDataset parse_csv(std::string_view text, const Schema& schema,
                     TargetPolicy policy = TargetPolicy::Required);
RawDataset load_csv(const std::filesystem::path& path, const Schema& schema,
                    TargetPolicy policy = TargetPolicy::Required);

struct Dataset {
  Matrix X;
  std::vector<int> y;  // may be empty for unlabeled data
  std::vector<std::string> class_names;
  std::vector<std::string> feature_names;

  std::size_t rows() const { return static_cast<std::size_t>(X.rows()); }
  std::size_t features() const { return static_cast<std::size_t>(X.cols()); }
  std::size_t classes() const { return class_names.size(); }
  std::span<const double> row(std::size_t i) const {
    return {X.data() + i * X.cols(), static_cast<std::size_t>(X.cols())};
  }

  Dataset subset(std::span<const std::size_t> indices) const;
};

struct EncodedColumn {
  std::string source;
  ColumnKind kind = ColumnKind::Numeric;
  std::vector<std::string> categories;  // sorted, Categorical only
};

/// Layout of the one-hot encoded feature space, fitted on training data and
/// reapplied to later files so column positions stay fixed.
struct FeatureEncoding {
  std::vector<EncodedColumn> columns;
  std::string target_column;
  std::vector<std::string> class_names;

  std::size_t width() const;
  std::vector<std::string> feature_names() const;
  // Schema that reloads files with the same columns this encoding expects.
  Schema schema() const;

  static FeatureEncoding fit(const RawDataset& raw);
  // Unseen categories encode to an all-zero group; unseen labels throw.
  Dataset apply(const RawDataset& raw) const;
};

Dataset one_hot_encode(const RawDataset& raw);

Matrix append_bias(const Matrix& X);

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// Test size is floor(n * test_fraction) with a minimum of one row.
SplitIndices split_indices(std::size_t n, double test_fraction, std::uint64_t seed);
std::pair<Dataset, Dataset> train_test_split(const Dataset& data, double test_fraction,
                                             std::uint64_t seed);

}  // namespace modt
