#include "cardlab/memo.hpp"

#include <cmath>
#include <cstring>
#include <limits>

#include <json.hpp>

namespace cardlab {

namespace {

std::string quantized_key(const FeatureVector& x) {
  std::string key(x.size() * sizeof(int64_t), '\0');
  for (size_t i = 0; i < x.size(); ++i) {
    const int64_t q = static_cast<int64_t>(std::llround(x[i] * 1e9));
    std::memcpy(key.data() + i * sizeof(int64_t), &q, sizeof(int64_t));
  }
  return key;
}

void insert_entry(MemoTable& table, const FeatureVector& x, int64_t cardinality) {
  const std::string key = quantized_key(x);
  const auto it = table.index.find(key);
  if (it != table.index.end()) {
    table.values[it->second] = cardinality;
  } else {
    table.index.emplace(key, table.keys.size());
    table.keys.push_back(x);
    table.values.push_back(cardinality);
  }
}

}  // namespace

MemoTable build_memo(const std::vector<LabeledExample>& examples, const EncodingSpec& spec,
                     double p) {
  if (!(p > 0.0)) throw_data("E_DATA", "Minkowski order must be positive");
  MemoTable table;
  table.width = spec.width();
  table.p = p;
  for (const auto& ex : examples) {
    if (!ex.labeled()) throw_data("E_DATA", "memo table requires labeled examples");
    insert_entry(table, encode_flat(spec, ex.query), ex.cardinality);
    ++table.examples_seen;
  }
  return table;
}

MemoResult lookup(const MemoTable& table, const FeatureVector& x) {
  if (table.keys.empty()) throw_data("E_DATA", "lookup in an empty memo table");
  if (x.size() != table.width) {
    throw_data("E_DATA", "feature width " + std::to_string(x.size()) +
                             " does not match memo table width " + std::to_string(table.width));
  }
  const auto it = table.index.find(quantized_key(x));
  if (it != table.index.end()) {
    return {table.values[it->second], true};
  }
  // Minkowski distance is monotone in the p-th power sum; skip the root.
  double best = std::numeric_limits<double>::infinity();
  size_t best_pos = 0;
  for (size_t pos = 0; pos < table.keys.size(); ++pos) {
    double sum = 0.0;
    for (size_t i = 0; i < table.width; ++i) {
      sum += std::pow(std::abs(table.keys[pos][i] - x[i]), table.p);
    }
    if (sum < best) {
      best = sum;
      best_pos = pos;
    }
  }
  return {table.values[best_pos], false};
}

std::string memo_to_json_text(const MemoTable& table) {
  nlohmann::json doc;
  doc["format_version"] = 1;
  doc["kind"] = "memo";
  doc["width"] = table.width;
  doc["p"] = table.p;
  doc["examples_seen"] = table.examples_seen;
  doc["keys"] = table.keys;
  doc["values"] = table.values;
  return doc.dump(2) + "\n";
}

MemoTable memo_from_json_text(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw_data("E_PARSE", std::string("malformed model file: ") + e.what());
  }
  if (doc.value("format_version", 0) != 1) {
    throw_data("E_PARSE", "unsupported model format version");
  }
  if (doc.value("kind", "") != "memo") {
    throw_data("E_PARSE", "model kind is '" + doc.value("kind", std::string("?")) +
                              "', expected 'memo'");
  }
  try {
    MemoTable table;
    table.width = doc.at("width").get<size_t>();
    table.p = doc.at("p").get<double>();
    table.examples_seen = doc.at("examples_seen").get<size_t>();
    table.keys = doc.at("keys").get<std::vector<FeatureVector>>();
    table.values = doc.at("values").get<std::vector<int64_t>>();
    if (table.keys.size() != table.values.size()) {
      throw_data("E_PARSE", "memo keys and values differ in length");
    }
    for (size_t pos = 0; pos < table.keys.size(); ++pos) {
      if (table.keys[pos].size() != table.width) {
        throw_data("E_PARSE", "memo key width mismatch");
      }
      table.index.emplace(quantized_key(table.keys[pos]), pos);
    }
    return table;
  } catch (const nlohmann::json::exception& e) {
    throw_data("E_PARSE", std::string("malformed memo model: ") + e.what());
  }
}

}  // namespace cardlab
