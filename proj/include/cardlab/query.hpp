#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cardlab/schema.hpp"

namespace cardlab {

/// Single-sided range predicate: column <= threshold.
struct Selection {
  ColumnRef column;
  int64_t threshold = 0;

  bool operator==(const Selection& other) const {
    return column == other.column && threshold == other.threshold;
  }
};

/// Select-project-join query over a database schema. Join predicates are a
/// subset of the schema's FK->PK edges and must connect the referenced
/// relations; the generator always emits spanning trees so that every query
/// admits a left-deep order with exactly one connecting predicate per step.
struct Query {
  std::vector<std::string> relations;
  std::vector<JoinEdge> join_predicates;
  std::vector<Selection> selections;

  bool references(const std::string& relation) const;
  std::vector<Selection> selections_on(const std::string& relation) const;

  /// Throws E_DATA unless the query satisfies all structural invariants
  /// against the schema (connectivity, eligible selection columns, at most
  /// one selection per column).
  void validate(const DatabaseSchema& schema) const;
};

/// One step of a left-deep join order: the relation introduced at this step,
/// its selections, and (for steps after the first) the predicate connecting
/// it to the relations already joined.
struct SequenceStep {
  std::string relation;
  std::vector<Selection> selections;
  std::optional<JoinEdge> join;
};

struct JoinSequence {
  std::vector<SequenceStep> steps;

  /// Reconstructs the underlying query (relations, tree predicates,
  /// selections) from the steps.
  Query to_query() const;
};

/// A workload entry: a query with one chosen left-deep order, plus labels
/// once the executor has run. cardinality < 0 marks an unlabeled entry.
struct LabeledExample {
  Query query;
  JoinSequence sequence;
  int64_t cardinality = -1;
  double selectivity = -1.0;
  std::vector<double> prefix_selectivities;

  bool labeled() const { return cardinality >= 0; }
};

/// JSON-lines serialization; one object per example with fields
/// {relations, joins, selections, order, cardinality, selectivity,
/// prefix_selectivities}. Label fields are omitted for unlabeled entries.
std::string workload_to_jsonl(const std::vector<LabeledExample>& examples);
std::vector<LabeledExample> workload_from_jsonl_text(const std::string& text,
                                                     const DatabaseSchema& schema);
std::vector<LabeledExample> load_workload(const std::string& path, const DatabaseSchema& schema);
void save_workload(const std::vector<LabeledExample>& examples, const std::string& path);

}  // namespace cardlab
