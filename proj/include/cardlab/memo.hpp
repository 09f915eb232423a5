#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "cardlab/featurize.hpp"
#include "cardlab/query.hpp"

namespace cardlab {

struct MemoResult {
  int64_t cardinality = 0;
  bool matched_exactly = false;
};

/// Exact memorization of training queries keyed by their encoded features,
/// with a Minkowski nearest-neighbor fallback for unseen queries. Keys are
/// quantized to 9 decimal digits per coordinate so float equality is stated.
struct MemoTable {
  size_t width = 0;
  double p = 2.0;             // Minkowski distance order
  size_t examples_seen = 0;   // training examples consumed, duplicates included
  std::vector<FeatureVector> keys;  // insertion order of first occurrence
  std::vector<int64_t> values;
  std::unordered_map<std::string, size_t> index;  // quantized key -> position

  /// Space currency: every feature of every training example counts as one
  /// stored scalar.
  size_t size_metric() const { return examples_seen * width; }
};

/// Inserts one entry per distinct encoded query; later duplicates overwrite.
MemoTable build_memo(const std::vector<LabeledExample>& examples, const EncodingSpec& spec,
                     double p = 2.0);

/// Exact hit returns the stored cardinality; a miss returns the nearest
/// stored vector's value (ties broken by insertion order).
MemoResult lookup(const MemoTable& table, const FeatureVector& x);

std::string memo_to_json_text(const MemoTable& table);
MemoTable memo_from_json_text(const std::string& text);

}  // namespace cardlab
