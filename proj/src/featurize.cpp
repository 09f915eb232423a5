#include "cardlab/featurize.hpp"

#include <algorithm>
#include <cmath>

namespace cardlab {

EncodingSpec build_spec(const Database& db) {
  EncodingSpec spec;
  for (const auto& rel : db.schema.relations) {
    spec.relation_order.push_back(rel.name);
    for (const auto& col : rel.columns) {
      if (col.kind == ColumnKind::attribute) {
        spec.attribute_order.push_back({rel.name, col.name});
      }
    }
  }
  spec.join_order = db.schema.join_edges;
  for (const auto& col : db.schema.selection_columns) {
    spec.domain_cdfs[col.str()] = active_domain(db, col);
  }
  return spec;
}

double percentile(const EncodingSpec& spec, const ColumnRef& column, int64_t value) {
  const auto it = spec.domain_cdfs.find(column.str());
  if (it == spec.domain_cdfs.end()) {
    throw_data("E_DATA", "no domain recorded for column " + column.str());
  }
  const auto& domain = it->second;
  if (domain.empty()) return 0.0;
  const auto pos = std::upper_bound(domain.begin(), domain.end(), value);
  return static_cast<double>(pos - domain.begin()) / static_cast<double>(domain.size());
}

namespace {

size_t index_of_relation(const EncodingSpec& spec, const std::string& name) {
  for (size_t i = 0; i < spec.relation_order.size(); ++i) {
    if (spec.relation_order[i] == name) return i;
  }
  throw_data("E_DATA", "relation '" + name + "' not in encoding spec");
}

size_t index_of_join(const EncodingSpec& spec, const JoinEdge& edge) {
  for (size_t i = 0; i < spec.join_order.size(); ++i) {
    if (spec.join_order[i] == edge) return i;
  }
  throw_data("E_DATA", "join predicate " + edge.str() + " not in encoding spec");
}

/// Fills the attribute slots of a single relation: threshold percentile for
/// predicated attributes, 1 for the rest.
void fill_relation_attributes(const EncodingSpec& spec, const std::string& relation,
                              const std::vector<Selection>& selections, FeatureVector& out) {
  const size_t attr_base = spec.relation_order.size();
  for (size_t a = 0; a < spec.attribute_order.size(); ++a) {
    const ColumnRef& col = spec.attribute_order[a];
    if (col.relation != relation) continue;
    double slot = 1.0;
    for (const auto& sel : selections) {
      if (sel.column == col) {
        slot = percentile(spec, col, sel.threshold);
        break;
      }
    }
    out[attr_base + a] = slot;
  }
}

}  // namespace

FeatureVector encode_flat(const EncodingSpec& spec, const Query& q) {
  FeatureVector out(spec.width(), 0.0);
  for (const auto& name : q.relations) {
    out[index_of_relation(spec, name)] = 1.0;
    fill_relation_attributes(spec, name, q.selections_on(name), out);
  }
  const size_t join_base = spec.relation_order.size() + spec.attribute_order.size();
  for (const auto& edge : q.join_predicates) {
    out[join_base + index_of_join(spec, edge)] = 1.0;
  }
  return out;
}

FeatureSequence encode_sequence(const EncodingSpec& spec, const JoinSequence& seq) {
  FeatureSequence out;
  out.reserve(seq.steps.size());
  const size_t join_base = spec.relation_order.size() + spec.attribute_order.size();
  for (const auto& step : seq.steps) {
    FeatureVector x(spec.width(), 0.0);
    x[index_of_relation(spec, step.relation)] = 1.0;
    fill_relation_attributes(spec, step.relation, step.selections, x);
    if (step.join.has_value()) x[join_base + index_of_join(spec, *step.join)] = 1.0;
    out.push_back(std::move(x));
  }
  return out;
}

double LabelTransform::apply(double selectivity) const {
  return (std::log(std::max(selectivity, floor)) - mean) / std;
}

double LabelTransform::invert(double transformed) const {
  const double s = std::exp(transformed * std + mean);
  return std::clamp(s, floor, 1.0);
}

LabelTransform fit_label_transform(const std::vector<double>& selectivities, double floor) {
  if (selectivities.size() < 2) {
    throw_data("E_DATA", "label transform needs at least two selectivities");
  }
  std::vector<double> logs(selectivities.size());
  for (size_t i = 0; i < selectivities.size(); ++i) {
    logs[i] = std::log(std::max(selectivities[i], floor));
  }
  LabelTransform t;
  t.floor = floor;
  t.mean = mean_of(logs);
  t.std = std::sqrt(population_variance(logs));
  if (!(t.std > 0.0)) throw_data("E_DATA", "cannot standardize constant labels");
  return t;
}

}  // namespace cardlab
