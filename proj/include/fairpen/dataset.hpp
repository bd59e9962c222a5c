#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "fairpen/csv.hpp"
#include "fairpen/error.hpp"
#include "fairpen/random.hpp"

namespace fairpen {

/// One individual: encoded features, protected group a and label y.
struct LabeledPoint {
  std::vector<double> features;
  int group = 0;
  int label = 0;

  bool operator==(const LabeledPoint&) const = default;
};

/// Sizes of the four (group, label) cells, indexed [a][y].
struct GroupCounts {
  std::array<std::array<std::size_t, 2>, 2> cells{};

  std::size_t operator()(int group, int label) const { return cells[group][label]; }
  std::size_t total() const { return cells[0][0] + cells[0][1] + cells[1][0] + cells[1][1]; }

  bool operator==(const GroupCounts&) const = default;
};

/// Immutable labeled dataset with a binary protected attribute.
///
/// `protected_index`, when set, is the feature coordinate that mirrors the
/// protected attribute; it is checked against every point on construction.
class Dataset {
public:
  Dataset() = default;

  Dataset(std::vector<LabeledPoint> points, std::size_t dim, std::optional<std::size_t> protected_index = std::nullopt)
      : points_(std::move(points)), dim_(dim), protected_index_(protected_index) {
    if (protected_index_ && *protected_index_ >= dim_)
      throw DataError("dataset: protected index " + std::to_string(*protected_index_) + " out of range");
    for (std::size_t i = 0; i < points_.size(); ++i) {
      const auto& p = points_[i];
      if (p.features.size() != dim_)
        throw DimensionError("dataset: point " + std::to_string(i) + " has dimension " +
                             std::to_string(p.features.size()) + ", expected " + std::to_string(dim_));
      if ((p.group != 0 && p.group != 1) || (p.label != 0 && p.label != 1))
        throw DataError("dataset: point " + std::to_string(i) + " has non-binary group or label");
      for (double v : p.features)
        if (!std::isfinite(v)) throw DataError("dataset: point " + std::to_string(i) + " has a non-finite feature");
      if (protected_index_ && p.features[*protected_index_] != static_cast<double>(p.group))
        throw DataError("dataset: point " + std::to_string(i) + " protected coordinate disagrees with its group");
      ++counts_.cells[p.group][p.label];
    }
  }

  const std::vector<LabeledPoint>& points() const noexcept { return points_; }
  const LabeledPoint& operator[](std::size_t i) const { return points_[i]; }
  std::size_t size() const noexcept { return points_.size(); }
  bool empty() const noexcept { return points_.empty(); }
  std::size_t dim() const noexcept { return dim_; }
  const GroupCounts& group_counts() const noexcept { return counts_; }
  std::optional<std::size_t> protected_index() const noexcept { return protected_index_; }

  std::size_t label_count(int label) const { return counts_(0, label) + counts_(1, label); }

  Dataset subset(const std::vector<std::size_t>& indices) const {
    std::vector<LabeledPoint> pts;
    pts.reserve(indices.size());
    for (auto i : indices) pts.push_back(points_.at(i));
    return Dataset(std::move(pts), dim_, protected_index_);
  }

  /// Same points with every feature vector replaced.
  Dataset with_points(std::vector<LabeledPoint> points) const { return Dataset(std::move(points), dim_, protected_index_); }

  bool operator==(const Dataset& other) const {
    return dim_ == other.dim_ && protected_index_ == other.protected_index_ && points_ == other.points_;
  }

private:
  std::vector<LabeledPoint> points_;
  std::size_t dim_ = 0;
  std::optional<std::size_t> protected_index_;
  GroupCounts counts_;
};

/// Index sets of S_00, S_01, S_10, S_11, indexed [a][y].
using GroupPartition = std::array<std::array<std::vector<std::size_t>, 2>, 2>;

inline GroupPartition partition_groups(const Dataset& ds) {
  GroupPartition out;
  for (std::size_t i = 0; i < ds.size(); ++i) out[ds[i].group][ds[i].label].push_back(i);
  return out;
}

// ---------------------------------------------------------------------------
// Loading

/// How raw CSV columns map onto the label, the protected attribute and the
/// feature vector.
struct DataSchema {
  std::string label_column;
  std::string protected_column;
  std::string positive_label = "1";
  std::string protected_one = "1";
  std::vector<std::string> categorical_columns;
  bool include_protected_as_feature = true;

  bool is_categorical(const std::string& name) const {
    return std::find(categorical_columns.begin(), categorical_columns.end(), name) != categorical_columns.end();
  }
};

/// Reads a key=value schema file. Blank lines and lines starting with '#'
/// are ignored; `categoricals` is a comma-separated list.
inline DataSchema parse_schema_config(std::istream& in) {
  DataSchema schema;
  std::string line;
  int lineno = 0;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
  };
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw DataError("schema config line " + std::to_string(lineno) + ": expected key=value");
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    if (key == "label") {
      schema.label_column = value;
    } else if (key == "protected") {
      schema.protected_column = value;
    } else if (key == "positive_label") {
      schema.positive_label = value;
    } else if (key == "protected_one") {
      schema.protected_one = value;
    } else if (key == "categoricals") {
      std::stringstream ss(value);
      std::string item;
      while (std::getline(ss, item, ','))
        if (!trim(item).empty()) schema.categorical_columns.push_back(trim(item));
    } else if (key == "include_protected") {
      if (value == "true" || value == "1" || value == "yes") schema.include_protected_as_feature = true;
      else if (value == "false" || value == "0" || value == "no") schema.include_protected_as_feature = false;
      else throw DataError("schema config: include_protected must be true or false");
    } else {
      throw DataError("schema config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    }
  }
  return schema;
}

/// One source column's contribution to the feature vector. Numeric columns
/// have no levels; categorical columns expand to one indicator per level.
struct FeatureColumn {
  std::string name;
  std::vector<std::string> levels;

  bool operator==(const FeatureColumn&) const = default;
};

/// The column-to-coordinate map fixed at training time so that other files
/// can be encoded identically.
struct Encoding {
  bool protected_included = true;
  std::vector<FeatureColumn> columns;

  std::vector<std::string> feature_names(const std::string& protected_name) const {
    std::vector<std::string> names;
    if (protected_included) names.push_back(protected_name);
    for (const auto& col : columns) {
      if (col.levels.empty()) names.push_back(col.name);
      else
        for (const auto& lvl : col.levels) names.push_back(col.name + "=" + lvl);
    }
    return names;
  }

  std::size_t dim() const {
    std::size_t d = protected_included ? 1 : 0;
    for (const auto& col : columns) d += col.levels.empty() ? 1 : col.levels.size();
    return d;
  }

  bool operator==(const Encoding&) const = default;
};

struct LoadResult {
  Dataset data;
  Encoding encoding;
  std::size_t dropped_rows = 0;
};

namespace detail {

inline bool is_missing(const std::string& v) { return v.empty() || v == "NA" || v == "?" || v == "nan" || v == "NaN"; }

inline std::optional<double> parse_number(const std::string& v) {
  double out = 0.0;
  const char* first = v.data();
  const char* last = v.data() + v.size();
  while (first < last && *first == ' ') ++first;
  while (last > first && last[-1] == ' ') --last;
  if (first < last && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, out);
  if (ec != std::errc{} || ptr != last || !std::isfinite(out)) return std::nullopt;
  return out;
}

/// Maps a two-valued raw column to {0,1}: `one` becomes 1, the single other
/// value observed becomes 0.
class BinaryColumn {
public:
  BinaryColumn(std::string column, std::string one) : column_(std::move(column)), one_(std::move(one)) {}

  int map(const std::string& raw) {
    if (raw == one_) return 1;
    if (!zero_) zero_ = raw;
    else if (*zero_ != raw)
      throw DataError("column '" + column_ + "' has values other than '" + one_ + "' and '" + *zero_ + "' (found '" +
                      raw + "')");
    return 0;
  }

private:
  std::string column_;
  std::string one_;
  std::optional<std::string> zero_;
};

inline LoadResult load_rows(std::istream& in, const DataSchema& schema, const Encoding* fixed) {
  if (schema.label_column.empty() || schema.protected_column.empty())
    throw DataError("schema: label and protected columns must be named");
  if (schema.label_column == schema.protected_column)
    throw DataError("schema: label column and protected column must differ");

  csv::Row header;
  if (!csv::read_row(in, header)) throw DataError("csv: missing header row");
  std::map<std::string, std::size_t> col_index;
  for (std::size_t i = 0; i < header.size(); ++i) col_index.emplace(header[i], i);
  auto require = [&](const std::string& name) {
    auto it = col_index.find(name);
    if (it == col_index.end()) throw DataError("csv: column '" + name + "' not found in header");
    return it->second;
  };
  const auto label_col = require(schema.label_column);
  const auto protected_col = require(schema.protected_column);
  for (const auto& c : schema.categorical_columns) {
    require(c);
    if (c == schema.label_column || c == schema.protected_column)
      throw DataError("schema: '" + c + "' cannot be both categorical and label/protected");
  }

  std::vector<csv::Row> rows;
  std::size_t dropped = 0;
  csv::Row row;
  std::size_t lineno = 1;
  while (csv::read_row(in, row)) {
    ++lineno;
    if (row.size() == 1 && row[0].empty()) continue;
    if (row.size() != header.size())
      throw DataError("csv: row " + std::to_string(lineno) + " has " + std::to_string(row.size()) +
                      " fields, header has " + std::to_string(header.size()));
    if (std::any_of(row.begin(), row.end(), is_missing)) {
      ++dropped;
      continue;
    }
    rows.push_back(row);
  }
  if (rows.empty()) throw DataError("csv: no usable rows");

  Encoding enc;
  if (fixed) {
    enc = *fixed;
    for (const auto& fc : enc.columns) {
      require(fc.name);
      if (fc.levels.empty() == schema.is_categorical(fc.name))
        throw DataError("encoding: column '" + fc.name + "' categorical status differs from schema");
    }
  } else {
    enc.protected_included = schema.include_protected_as_feature;
    for (std::size_t c = 0; c < header.size(); ++c) {
      if (c == label_col || c == protected_col) continue;
      FeatureColumn fc{header[c], {}};
      if (schema.is_categorical(header[c])) {
        std::set<std::string> levels;
        for (const auto& r : rows) levels.insert(r[c]);
        fc.levels.assign(levels.begin(), levels.end());
      }
      enc.columns.push_back(std::move(fc));
    }
  }

  std::vector<std::size_t> source(enc.columns.size());
  for (std::size_t j = 0; j < enc.columns.size(); ++j) source[j] = require(enc.columns[j].name);

  BinaryColumn label_map(schema.label_column, schema.positive_label);
  BinaryColumn group_map(schema.protected_column, schema.protected_one);
  std::vector<LabeledPoint> points;
  points.reserve(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto& raw = rows[r];
    LabeledPoint p;
    p.label = label_map.map(raw[label_col]);
    p.group = group_map.map(raw[protected_col]);
    p.features.reserve(enc.dim());
    if (enc.protected_included) p.features.push_back(static_cast<double>(p.group));
    for (std::size_t j = 0; j < enc.columns.size(); ++j) {
      const auto& fc = enc.columns[j];
      const auto& v = raw[source[j]];
      if (fc.levels.empty()) {
        const auto num = parse_number(v);
        if (!num)
          throw DataError("csv: non-numeric value '" + v + "' in column '" + fc.name +
                          "' (declare it categorical to one-hot encode)");
        p.features.push_back(*num);
      } else {
        const auto it = std::find(fc.levels.begin(), fc.levels.end(), v);
        if (it == fc.levels.end()) throw DataError("csv: unseen category '" + v + "' in column '" + fc.name + "'");
        for (const auto& lvl : fc.levels) p.features.push_back(lvl == v ? 1.0 : 0.0);
      }
    }
    points.push_back(std::move(p));
  }
  const auto dim = enc.dim();
  std::optional<std::size_t> pidx;
  if (enc.protected_included) pidx = 0;
  return LoadResult{Dataset(std::move(points), dim, pidx), std::move(enc), dropped};
}

}  // namespace detail

/// Parses CSV text. Categorical columns are one-hot encoded over the
/// observed levels in sorted order; rows with any missing field are dropped.
inline LoadResult read_csv(std::istream& in, const DataSchema& schema) { return detail::load_rows(in, schema, nullptr); }

/// Parses CSV text with an encoding fixed in advance (e.g. from a saved model).
inline LoadResult read_csv(std::istream& in, const DataSchema& schema, const Encoding& encoding) {
  return detail::load_rows(in, schema, &encoding);
}

inline LoadResult load_csv(const std::string& path, const DataSchema& schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  return read_csv(in, schema);
}

inline LoadResult load_csv(const std::string& path, const DataSchema& schema, const Encoding& encoding) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  return read_csv(in, schema, encoding);
}

/// Shortest text that parses back to exactly `v`.
inline std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

/// Schema under which write_csv output reloads to an equal Dataset.
inline DataSchema encoded_schema(const DataSchema& schema) {
  DataSchema out;
  out.label_column = schema.label_column;
  out.protected_column = schema.protected_column;
  out.include_protected_as_feature = schema.include_protected_as_feature;
  return out;
}

/// Writes the encoded dataset: protected column, one column per non-protected
/// feature coordinate, then the label, all as numbers.
inline void write_csv(std::ostream& out, const Dataset& ds, const std::vector<std::string>& feature_names,
                      const DataSchema& schema) {
  if (feature_names.size() != ds.dim()) throw DimensionError("write_csv: feature name count differs from dimension");
  const auto pidx = ds.protected_index();
  csv::Row row{schema.protected_column};
  for (std::size_t j = 0; j < ds.dim(); ++j)
    if (!pidx || j != *pidx) row.push_back(feature_names[j]);
  row.push_back(schema.label_column);
  csv::write_row(out, row);
  for (const auto& p : ds.points()) {
    row.assign(1, std::to_string(p.group));
    for (std::size_t j = 0; j < ds.dim(); ++j)
      if (!pidx || j != *pidx) row.push_back(format_double(p.features[j]));
    row.push_back(std::to_string(p.label));
    csv::write_row(out, row);
  }
}

// ---------------------------------------------------------------------------
// Splitting

struct TrainTest {
  Dataset train;
  Dataset test;
};

/// Uniformly random train/test partition, deterministic in `seed`.
/// The test side gets round(n * test_fraction) points. With `stratify`, the
/// fraction is applied within each label separately.
inline TrainTest split(const Dataset& ds, double test_fraction, std::uint64_t seed, bool stratify = false) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw DataError("split: test fraction must lie in (0,1)");
  Rng rng(seed);
  std::vector<std::size_t> train_idx;
  std::vector<std::size_t> test_idx;
  auto take = [&](const std::vector<std::size_t>& pool) {
    const auto perm = rng.permutation(pool.size());
    const auto n_test = static_cast<std::size_t>(std::llround(static_cast<double>(pool.size()) * test_fraction));
    for (std::size_t i = 0; i < perm.size(); ++i) (i < n_test ? test_idx : train_idx).push_back(pool[perm[i]]);
  };
  if (stratify) {
    std::array<std::vector<std::size_t>, 2> by_label;
    for (std::size_t i = 0; i < ds.size(); ++i) by_label[ds[i].label].push_back(i);
    take(by_label[0]);
    take(by_label[1]);
  } else {
    std::vector<std::size_t> all(ds.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    take(all);
  }
  if (train_idx.empty() || test_idx.empty()) throw DataError("split: fraction leaves one side empty");
  std::sort(train_idx.begin(), train_idx.end());
  std::sort(test_idx.begin(), test_idx.end());
  TrainTest out{ds.subset(train_idx), ds.subset(test_idx)};
  for (int y = 0; y < 2; ++y)
    if (out.train.label_count(y) == 0 || out.test.label_count(y) == 0)
      throw DataError("split: label " + std::to_string(y) + " missing from one side");
  return out;
}

struct FoldIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
};

/// k-fold partition of 0..n-1: fold i validates on positions
/// [i*n/k, (i+1)*n/k) of a seeded permutation.
inline std::vector<FoldIndices> kfold_indices(std::size_t n, std::size_t k, std::uint64_t seed) {
  if (k < 2 || k > n) throw DataError("kfold: k must satisfy 2 <= k <= n");
  Rng rng(seed);
  const auto perm = rng.permutation(n);
  std::vector<FoldIndices> folds(k);
  for (std::size_t f = 0; f < k; ++f) {
    const auto lo = f * n / k;
    const auto hi = (f + 1) * n / k;
    for (std::size_t i = 0; i < n; ++i) (i >= lo && i < hi ? folds[f].validation : folds[f].train).push_back(perm[i]);
    std::sort(folds[f].train.begin(), folds[f].train.end());
    std::sort(folds[f].validation.begin(), folds[f].validation.end());
  }
  return folds;
}

inline std::vector<TrainTest> kfold(const Dataset& ds, std::size_t k, std::uint64_t seed) {
  std::vector<TrainTest> out;
  for (const auto& f : kfold_indices(ds.size(), k, seed)) out.push_back({ds.subset(f.train), ds.subset(f.validation)});
  return out;
}

// ---------------------------------------------------------------------------
// Standardization

/// Per-coordinate affine map x -> (x - mean) / stddev. Exempt and constant
/// coordinates carry mean 0 and stddev 1, which is an exact identity.
struct Standardization {
  std::vector<double> means;
  std::vector<double> stddevs;

  static Standardization identity(std::size_t dim) { return {std::vector<double>(dim, 0.0), std::vector<double>(dim, 1.0)}; }

  Dataset apply(const Dataset& ds) const {
    if (means.size() != ds.dim()) throw DimensionError("standardization: dimension mismatch");
    std::vector<LabeledPoint> pts = ds.points();
    for (auto& p : pts) apply_in_place(p.features);
    return ds.with_points(std::move(pts));
  }

  void apply_in_place(std::vector<double>& x) const {
    for (std::size_t j = 0; j < x.size(); ++j) x[j] = (x[j] - means[j]) / stddevs[j];
  }

  bool operator==(const Standardization&) const = default;
};

/// Fits z-scoring on the training set (population stddev), leaving the
/// protected coordinate and zero-variance coordinates unchanged.
inline Standardization fit_standardization(const Dataset& train) {
  const auto d = train.dim();
  auto out = Standardization::identity(d);
  if (train.empty()) return out;
  const auto n = static_cast<double>(train.size());
  for (std::size_t j = 0; j < d; ++j) {
    if (train.protected_index() && *train.protected_index() == j) continue;
    double mean = 0.0;
    for (const auto& p : train.points()) mean += p.features[j];
    mean /= n;
    double var = 0.0;
    for (const auto& p : train.points()) var += (p.features[j] - mean) * (p.features[j] - mean);
    const double sd = std::sqrt(var / n);
    if (sd <= 1e-12 * (1.0 + std::abs(mean))) continue;
    out.means[j] = mean;
    out.stddevs[j] = sd;
  }
  return out;
}

struct StandardizedPair {
  Dataset train;
  Dataset test;
  Standardization transform;
};

inline StandardizedPair standardize(const Dataset& train, const Dataset& test) {
  auto t = fit_standardization(train);
  return {t.apply(train), t.apply(test), std::move(t)};
}

}  // namespace fairpen
