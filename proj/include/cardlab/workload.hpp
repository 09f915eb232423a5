#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "cardlab/database.hpp"
#include "cardlab/query.hpp"

namespace cardlab {

/// Generates n random queries that each join `complexity` relations chosen as
/// a random connected subgraph of the schema's join graph; the query's join
/// predicates are the spanning tree traced while growing the subgraph. Every
/// eligible column of a referenced relation receives a predicate with
/// probability 1/2, with the threshold drawn uniformly from the column's
/// active domain. Each query also gets a uniformly random left-deep order.
std::vector<LabeledExample> generate_workload(const Database& db, size_t complexity, size_t n,
                                              uint64_t seed);

/// Uniformly random valid left-deep order for q; deterministic per seed.
/// Requires the query's predicate set to form a tree (the generator's shape).
JoinSequence to_sequence(const Query& q, uint64_t seed);

/// Fills in cardinality, selectivity, and (optionally) per-prefix
/// selectivities by running the exact executor. Fans out across `jobs`
/// threads; results keep input order.
void label(const Database& db, std::vector<LabeledExample>& examples, bool with_prefixes,
           size_t jobs = 1);

/// Deterministic disjoint split; the test side receives exactly test_n
/// examples. Requires test_n < |examples|.
std::pair<std::vector<LabeledExample>, std::vector<LabeledExample>> split_workload(
    const std::vector<LabeledExample>& examples, size_t test_n, uint64_t seed);

/// Picks ceil(fraction * |active domain|) values of the column at random and
/// moves every example whose threshold on that column is one of them into
/// held_out. Returns (kept, held_out).
std::pair<std::vector<LabeledExample>, std::vector<LabeledExample>> remove_selection_values(
    const std::vector<LabeledExample>& examples, const Database& db, const ColumnRef& column,
    double fraction, uint64_t seed);

/// Moves every example whose relation set equals `relation_set` (exact set
/// equality) into held_out. Returns (kept, held_out).
std::pair<std::vector<LabeledExample>, std::vector<LabeledExample>> remove_join(
    const std::vector<LabeledExample>& examples, const std::vector<std::string>& relation_set);

}  // namespace cardlab
