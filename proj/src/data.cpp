#include "modt/data.hpp"

#include "modt/error.hpp"
#include "modt/rng.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_map>

namespace modt {
namespace {

std::string_view trim(std::string_view s) {
  const auto is_space = [](char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; };
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoError, "cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

// RFC-4180 records: quoted fields may contain separators, doubled quotes and
// line breaks. Lines that are completely empty are dropped.
std::vector<std::vector<std::string>> split_records(std::string_view text) {
  if (text.starts_with("\xEF\xBB\xBF")) text.remove_prefix(3);
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  bool quoted = false;
  bool field_started = false;

  auto end_record = [&] {
    if (field_started || !record.empty()) {
      record.push_back(std::move(field));
      records.push_back(std::move(record));
    }
    record.clear();
    field.clear();
    field_started = false;
  };

  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field.push_back(c);
      }
      continue;
    }
    switch (c) {
      case '"':
        quoted = true;
        field_started = true;
        break;
      case ',':
        record.push_back(std::move(field));
        field.clear();
        field_started = true;
        break;
      case '\r':
        break;
      case '\n':
        end_record();
        break;
      default:
        field.push_back(c);
        field_started = true;
    }
  }
  end_record();
  return records;
}

double parse_number(std::string_view cell, std::size_t row, const std::string& column) {
  cell = trim(cell);
  if (!cell.empty() && cell.front() == '+') cell.remove_prefix(1);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
  if (cell.empty() || ec != std::errc() || ptr != cell.data() + cell.size() || !std::isfinite(value)) {
    throw Error(ErrorKind::UnparsableNumeric,
                "row " + std::to_string(row) + ", column '" + column + "': '" + std::string(cell) + "'");
  }
  return value;
}

}  // namespace

KeyValues parse_key_values(std::string_view text) {
  KeyValues out;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    line = trim(line);
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw Error(ErrorKind::InvalidSchema,
                  "line " + std::to_string(line_no) + " is not key=value: '" + std::string(line) + "'");
    }
    out.emplace_back(std::string(trim(line.substr(0, eq))), std::string(trim(line.substr(eq + 1))));
  }
  return out;
}

KeyValues load_key_values(const std::filesystem::path& path) {
  return parse_key_values(read_file(path));
}

ColumnKind parse_column_kind(std::string_view text) {
  if (text == "numeric") return ColumnKind::Numeric;
  if (text == "categorical") return ColumnKind::Categorical;
  if (text == "target") return ColumnKind::Target;
  if (text == "ignore") return ColumnKind::Ignore;
  throw Error(ErrorKind::InvalidSchema, "unknown column kind '" + std::string(text) + "'");
}

const char* to_string(ColumnKind kind) noexcept {
  switch (kind) {
    case ColumnKind::Numeric: return "numeric";
    case ColumnKind::Categorical: return "categorical";
    case ColumnKind::Target: return "target";
    case ColumnKind::Ignore: return "ignore";
  }
  return "ignore";
}

const std::string& Schema::target() const {
  for (const auto& [name, kind] : columns)
    if (kind == ColumnKind::Target) return name;
  throw Error(ErrorKind::InvalidSchema, "schema declares no target column");
}

Schema Schema::parse(std::string_view text) {
  Schema schema;
  std::size_t targets = 0;
  for (auto& [name, kind] : parse_key_values(text)) {
    if (name.empty()) throw Error(ErrorKind::InvalidSchema, "empty column name");
    for (const auto& existing : schema.columns)
      if (existing.first == name) throw Error(ErrorKind::InvalidSchema, "duplicate column '" + name + "'");
    constexpr std::string_view kDeclared = "categorical:";
    if (kind.starts_with(kDeclared)) {
      std::vector<std::string> domain;
      std::string_view rest = std::string_view(kind).substr(kDeclared.size());
      while (true) {
        const auto bar = rest.find('|');
        const std::string value(trim(rest.substr(0, bar)));
        if (value.empty()) throw Error(ErrorKind::InvalidSchema, "empty category declared for '" + name + "'");
        if (std::find(domain.begin(), domain.end(), value) != domain.end())
          throw Error(ErrorKind::InvalidSchema, "category '" + value + "' declared twice for '" + name + "'");
        domain.push_back(value);
        if (bar == std::string_view::npos) break;
        rest = rest.substr(bar + 1);
      }
      schema.domains.emplace(name, std::move(domain));
      kind = "categorical";
    }
    const ColumnKind parsed = parse_column_kind(kind);
    targets += parsed == ColumnKind::Target;
    schema.columns.emplace_back(std::move(name), parsed);
  }
  if (targets != 1) throw Error(ErrorKind::InvalidSchema, "schema must declare exactly one target column");
  return schema;
}

Schema Schema::load(const std::filesystem::path& path) { return parse(read_file(path)); }

std::size_t RawDataset::rows() const {
  if (!columns.empty()) {
    const auto& c = columns.front();
    return c.kind == ColumnKind::Numeric ? c.numbers.size() : c.levels.size();
  }
  return target.size();
}

RawDataset parse_csv(std::string_view text, const Schema& schema, TargetPolicy policy) {
  const auto records = split_records(text);
  if (records.empty()) throw Error(ErrorKind::EmptyFile, "no header row");
  const auto& header = records.front();

  std::unordered_map<std::string, std::size_t> position;
  for (std::size_t i = 0; i < header.size(); ++i) position.emplace(std::string(trim(header[i])), i);

  struct Binding {
    std::size_t source;
    std::size_t slot;  // index into raw.columns, or npos for the target
  };
  constexpr std::size_t kTargetSlot = static_cast<std::size_t>(-1);

  RawDataset raw;
  raw.target_column = schema.target();
  std::vector<Binding> bindings;
  for (const auto& [name, kind] : schema.columns) {
    if (kind == ColumnKind::Ignore) continue;
    const auto it = position.find(name);
    if (it == position.end()) {
      if (kind == ColumnKind::Target && policy == TargetPolicy::Optional) continue;
      throw Error(ErrorKind::MissingColumn, "column '" + name + "' not found in header");
    }
    if (kind == ColumnKind::Target) {
      bindings.push_back({it->second, kTargetSlot});
    } else {
      bindings.push_back({it->second, raw.columns.size()});
      const auto domain = schema.domains.find(name);
      raw.columns.push_back({name, kind, {}, {}, domain == schema.domains.end() ? std::vector<std::string>{} : domain->second});
    }
  }
  // Keep feature columns in header order for a stable encoded layout.
  std::vector<std::size_t> order(raw.columns.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::vector<std::size_t> header_pos(raw.columns.size());
  for (const auto& b : bindings)
    if (b.slot != kTargetSlot) header_pos[b.slot] = b.source;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return header_pos[a] < header_pos[b]; });
  std::vector<std::size_t> remap(order.size());
  std::vector<RawColumn> sorted;
  for (std::size_t i = 0; i < order.size(); ++i) {
    remap[order[i]] = i;
    sorted.push_back(std::move(raw.columns[order[i]]));
  }
  raw.columns = std::move(sorted);
  for (auto& b : bindings)
    if (b.slot != kTargetSlot) b.slot = remap[b.slot];

  if (records.size() < 2) throw Error(ErrorKind::EmptyFile, "header present but no data rows");

  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& record = records[r];
    for (const auto& b : bindings) {
      if (b.source >= record.size()) {
        throw Error(ErrorKind::MissingColumn, "row " + std::to_string(r) + " has " +
                                                  std::to_string(record.size()) + " fields, expected " +
                                                  std::to_string(header.size()));
      }
      const std::string& cell = record[b.source];
      if (b.slot == kTargetSlot) {
        raw.target.emplace_back(trim(cell));
        continue;
      }
      RawColumn& column = raw.columns[b.slot];
      if (column.kind == ColumnKind::Numeric)
        column.numbers.push_back(parse_number(cell, r, column.name));
      else if (column.domain.empty() ||
               std::find(column.domain.begin(), column.domain.end(), trim(cell)) != column.domain.end())
        column.levels.emplace_back(trim(cell));
      else
        throw Error(ErrorKind::InvalidSchema, "row " + std::to_string(r) + ": value '" + std::string(trim(cell)) +
                                                  "' is not a declared category of '" + column.name + "'");
    }
  }
  return raw;
}

RawDataset load_csv(const std::filesystem::path& path, const Schema& schema, TargetPolicy policy) {
  return parse_csv(read_file(path), schema, policy);
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  Dataset out;
  out.X.resize(static_cast<Eigen::Index>(indices.size()), X.cols());
  for (std::size_t i = 0; i < indices.size(); ++i) out.X.row(static_cast<Eigen::Index>(i)) = X.row(indices[i]);
  if (!y.empty()) {
    out.y.reserve(indices.size());
    for (std::size_t idx : indices) out.y.push_back(y[idx]);
  }
  out.class_names = class_names;
  out.feature_names = feature_names;
  return out;
}

std::size_t FeatureEncoding::width() const {
  std::size_t w = 0;
  for (const auto& c : columns) w += c.kind == ColumnKind::Numeric ? 1 : c.categories.size();
  return w;
}

std::vector<std::string> FeatureEncoding::feature_names() const {
  std::vector<std::string> names;
  for (const auto& c : columns) {
    if (c.kind == ColumnKind::Numeric) {
      names.push_back(c.source);
    } else {
      for (const auto& cat : c.categories) names.push_back(c.source + "=" + cat);
    }
  }
  return names;
}

Schema FeatureEncoding::schema() const {
  Schema out;
  for (const auto& c : columns) out.columns.emplace_back(c.source, c.kind);
  out.columns.emplace_back(target_column, ColumnKind::Target);
  return out;
}

FeatureEncoding FeatureEncoding::fit(const RawDataset& raw) {
  if (raw.rows() == 0) throw Error(ErrorKind::EmptyInput, "dataset has no rows");
  if (raw.columns.empty()) throw Error(ErrorKind::EmptyInput, "dataset has no feature columns");
  FeatureEncoding enc;
  enc.target_column = raw.target_column;
  for (const auto& col : raw.columns) {
    EncodedColumn ec{col.name, col.kind, {}};
    if (col.kind == ColumnKind::Categorical) {
      ec.categories = col.domain.empty() ? col.levels : col.domain;
      std::sort(ec.categories.begin(), ec.categories.end());
      ec.categories.erase(std::unique(ec.categories.begin(), ec.categories.end()), ec.categories.end());
    }
    enc.columns.push_back(std::move(ec));
  }
  enc.class_names = raw.target;
  std::sort(enc.class_names.begin(), enc.class_names.end());
  enc.class_names.erase(std::unique(enc.class_names.begin(), enc.class_names.end()), enc.class_names.end());
  if (enc.class_names.size() < 2)
    throw Error(ErrorKind::InvalidSchema, "target column '" + raw.target_column + "' needs at least two classes");
  return enc;
}

Dataset FeatureEncoding::apply(const RawDataset& raw) const {
  const std::size_t n = raw.rows();
  std::map<std::string, const RawColumn*> by_name;
  for (const auto& c : raw.columns) by_name.emplace(c.name, &c);

  Dataset out;
  out.X = Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(width()));
  out.class_names = class_names;
  out.feature_names = feature_names();

  Eigen::Index offset = 0;
  for (const auto& ec : columns) {
    const auto it = by_name.find(ec.source);
    if (it == by_name.end() || it->second->kind != ec.kind)
      throw Error(ErrorKind::MissingColumn, "column '" + ec.source + "' missing or of a different kind");
    const RawColumn& col = *it->second;
    if (ec.kind == ColumnKind::Numeric) {
      for (std::size_t i = 0; i < n; ++i) out.X(static_cast<Eigen::Index>(i), offset) = col.numbers[i];
      ++offset;
      continue;
    }
    for (std::size_t i = 0; i < n; ++i) {
      const auto pos = std::lower_bound(ec.categories.begin(), ec.categories.end(), col.levels[i]);
      if (pos != ec.categories.end() && *pos == col.levels[i])
        out.X(static_cast<Eigen::Index>(i), offset + (pos - ec.categories.begin())) = 1.0;
    }
    offset += static_cast<Eigen::Index>(ec.categories.size());
  }

  if (raw.has_target()) {
    out.y.reserve(n);
    for (const auto& label : raw.target) {
      const auto pos = std::lower_bound(class_names.begin(), class_names.end(), label);
      if (pos == class_names.end() || *pos != label)
        throw Error(ErrorKind::UnknownLabel, "label '" + label + "' was not seen during training");
      out.y.push_back(static_cast<int>(pos - class_names.begin()));
    }
  }
  return out;
}

Dataset one_hot_encode(const RawDataset& raw) { return FeatureEncoding::fit(raw).apply(raw); }

Matrix append_bias(const Matrix& X) {
  Matrix out(X.rows(), X.cols() + 1);
  out.leftCols(X.cols()) = X;
  out.col(X.cols()).setOnes();
  return out;
}

SplitIndices split_indices(std::size_t n, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0))
    throw Error(ErrorKind::DegenerateSplit, "test fraction must lie in (0, 1)");
  const auto test_size =
      std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(static_cast<double>(n) * test_fraction)));
  if (n < 2 || test_size >= n)
    throw Error(ErrorKind::DegenerateSplit,
                "cannot split " + std::to_string(n) + " rows with test fraction " + std::to_string(test_fraction));

  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  Rng rng(seed);
  rng.shuffle(std::span(perm));

  SplitIndices out;
  out.test.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(test_size));
  out.train.assign(perm.begin() + static_cast<std::ptrdiff_t>(test_size), perm.end());
  std::sort(out.test.begin(), out.test.end());
  std::sort(out.train.begin(), out.train.end());
  return out;
}

std::pair<Dataset, Dataset> train_test_split(const Dataset& data, double test_fraction, std::uint64_t seed) {
  const auto idx = split_indices(data.rows(), test_fraction, seed);
  return {data.subset(idx.train), data.subset(idx.test)};
}

}  // namespace modt
