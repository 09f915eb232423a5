#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "cardlab/database.hpp"
#include "cardlab/query.hpp"

namespace cardlab {

using FeatureVector = std::vector<double>;
using FeatureSequence = std::vector<FeatureVector>;

/// Fixed encoding layout for one database: a query becomes the concatenation
/// of a relation one-hot segment, a per-attribute selection segment, and a
/// join-predicate one-hot segment.
struct EncodingSpec {
  std::vector<std::string> relation_order;
  std::vector<ColumnRef> attribute_order;
  std::vector<JoinEdge> join_order;
  /// Sorted active domain per selection-eligible column, keyed by
  /// "relation.column"; used for percentile lookups.
  std::map<std::string, std::vector<int64_t>> domain_cdfs;

  size_t width() const {
    return relation_order.size() + attribute_order.size() + join_order.size();
  }
};

EncodingSpec build_spec(const Database& db);

/// Fraction of the column's distinct active-domain values that are <= value.
double percentile(const EncodingSpec& spec, const ColumnRef& column, int64_t value);

/// Whole-query encoding: referenced relations one-hot; per attribute the
/// threshold percentile if predicated, 1 if its relation is referenced but
/// the attribute is unpredicated, 0 if its relation is not referenced; used
/// join predicates one-hot.
FeatureVector encode_flat(const EncodingSpec& spec, const Query& q);

/// Per-step encoding of a left-deep sequence: each step carries only the
/// newly introduced relation (one-hot), that relation's attribute slots
/// (percentile if predicated, else 1), and the connecting join predicate
/// (absent at step 0). Everything else is 0.
FeatureSequence encode_sequence(const EncodingSpec& spec, const JoinSequence& seq);

/// Standardization of log-selectivities: apply(s) = (ln(max(s, floor)) -
/// mean) / std, with mean/std fitted on a training set.
struct LabelTransform {
  double mean = 0.0;
  double std = 1.0;
  double floor = 1e-9;

  double apply(double selectivity) const;
  /// Inverse of apply, clamped into [floor, 1].
  double invert(double transformed) const;
};

/// Fits mean and population standard deviation of the log-selectivities.
/// Throws E_DATA when the labels are constant (std would be 0).
LabelTransform fit_label_transform(const std::vector<double>& selectivities,
                                   double floor = 1e-9);

/// One encoded training example: flat features and a transformed label.
struct FlatExample {
  FeatureVector x;
  double y = 0.0;
};

/// One encoded training sequence with a transformed label per step.
struct SeqExample {
  FeatureSequence xs;
  std::vector<double> ys;
};

}  // namespace cardlab
