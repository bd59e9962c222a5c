#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "fairpen/dataset.hpp"
#include "fairpen/error.hpp"
#include "fairpen/model.hpp"
#include "fairpen/penalty.hpp"
#include "fairpen/trainer.hpp"

namespace fairpen {

/// Writes `contents` to a sibling temporary file and renames it over `path`,
/// so readers never observe a partially written file.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write '" + tmp.string() + "'");
    out << contents;
    out.flush();
    if (!out) throw Error("write failed for '" + tmp.string() + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error("cannot rename '" + tmp.string() + "' to '" + path.string() + "': " + ec.message());
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline nlohmann::json to_json(const DataSchema& s) {
  return {{"label", s.label_column},
          {"protected", s.protected_column},
          {"positive_label", s.positive_label},
          {"protected_one", s.protected_one},
          {"categoricals", s.categorical_columns},
          {"include_protected", s.include_protected_as_feature}};
}

inline DataSchema schema_from_json(const nlohmann::json& j) {
  DataSchema s;
  s.label_column = j.at("label").get<std::string>();
  s.protected_column = j.at("protected").get<std::string>();
  s.positive_label = j.at("positive_label").get<std::string>();
  s.protected_one = j.at("protected_one").get<std::string>();
  s.categorical_columns = j.at("categoricals").get<std::vector<std::string>>();
  s.include_protected_as_feature = j.at("include_protected").get<bool>();
  return s;
}

inline nlohmann::json to_json(const Encoding& e) {
  nlohmann::json cols = nlohmann::json::array();
  for (const auto& c : e.columns) cols.push_back({{"name", c.name}, {"levels", c.levels}});
  return {{"protected_included", e.protected_included}, {"columns", cols}};
}

inline Encoding encoding_from_json(const nlohmann::json& j) {
  Encoding e;
  e.protected_included = j.at("protected_included").get<bool>();
  for (const auto& c : j.at("columns"))
    e.columns.push_back({c.at("name").get<std::string>(), c.at("levels").get<std::vector<std::string>>()});
  return e;
}

/// 64-bit FNV-1a, hex encoded.
inline std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

/// Fingerprint of the schema and the encoding it produced.
inline std::string schema_hash(const DataSchema& s, const Encoding& e) {
  return fnv1a_hex(nlohmann::json{{"schema", to_json(s)}, {"encoding", to_json(e)}}.dump());
}

/// A trained model together with everything needed to preprocess new data
/// exactly as the training data was.
struct SavedModel {
  ModelParams params;
  Standardization standardization;
  DataSchema schema;
  Encoding encoding;
  double c1 = 0.0, c2 = 0.0, q = 0.0;
  PenaltyKind kind = PenaltyKind::SD;

  /// Loads a CSV with the stored schema and encoding, then standardizes it.
  Dataset prepare(const std::string& csv_path) const {
    auto loaded = load_csv(csv_path, schema, encoding);
    return standardization.apply(loaded.data);
  }
};

inline nlohmann::json to_json(const SavedModel& m) {
  return {{"theta", m.params.theta},
          {"standardization", {{"means", m.standardization.means}, {"stddevs", m.standardization.stddevs}}},
          {"schema_hash", schema_hash(m.schema, m.encoding)},
          {"schema", to_json(m.schema)},
          {"encoding", to_json(m.encoding)},
          {"feature_names", m.encoding.feature_names(m.schema.protected_column)},
          {"hyperparameters", {{"c1", m.c1}, {"c2", m.c2}, {"q", m.q}, {"kind", to_string(m.kind)}}}};
}

inline SavedModel saved_model_from_json(const nlohmann::json& j) {
  try {
    SavedModel m;
    m.params = ModelParams(j.at("theta").get<Vector>());
    m.standardization.means = j.at("standardization").at("means").get<Vector>();
    m.standardization.stddevs = j.at("standardization").at("stddevs").get<Vector>();
    m.schema = schema_from_json(j.at("schema"));
    m.encoding = encoding_from_json(j.at("encoding"));
    if (j.at("schema_hash").get<std::string>() != schema_hash(m.schema, m.encoding))
      throw Error("model file: schema hash does not match its schema");
    const auto& h = j.at("hyperparameters");
    m.c1 = h.at("c1").get<double>();
    m.c2 = h.at("c2").get<double>();
    m.q = h.at("q").get<double>();
    m.kind = parse_penalty_kind(h.at("kind").get<std::string>());
    const auto d = m.encoding.dim();
    if (m.params.theta.size() != d + 1 || m.standardization.means.size() != d || m.standardization.stddevs.size() != d)
      throw DimensionError("model file: parameter and standardization lengths disagree with the encoding");
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("model file: ") + e.what());
  }
}

inline SavedModel load_model(const std::filesystem::path& path) {
  try {
    return saved_model_from_json(nlohmann::json::parse(read_file(path)));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error("model file '" + path.string() + "': " + e.what());
  }
}

}  // namespace fairpen
