#pragma once

#include <cstdint>
#include <vector>

#include "cardlab/database.hpp"
#include "cardlab/query.hpp"

namespace cardlab {

/// Exact SPJ cardinality: filters each referenced relation by its selections,
/// then hash-joins in a greedy connected order, carrying only the grouped
/// column values needed by the remaining predicates.
int64_t cardinality(const Database& db, const Query& q);

/// Independent oracle: nested-loop count over the full cartesian product of
/// the referenced relations. Guarded to products of at most 10^8 rows.
int64_t cardinality_naive(const Database& db, const Query& q);

/// Exact cardinality of every left-deep prefix of the sequence; element t
/// covers the first t+1 relations with their selections and connecting
/// predicates. The last element equals cardinality of the full query.
std::vector<int64_t> prefix_cardinalities(const Database& db, const JoinSequence& seq);

}  // namespace cardlab
