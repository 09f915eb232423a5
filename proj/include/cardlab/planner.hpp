#pragma once

#include <string>
#include <vector>

#include "cardlab/estimator.hpp"

namespace cardlab {

/// A left-deep join order plus the per-prefix estimates that justified it.
struct LeftDeepPlan {
  JoinSequence order;
  std::vector<double> prefix_estimates;  // estimated rows of prefixes 2..n
  double cost = 0.0;                     // sum of the prefix estimates (C_out)
};

/// Selinger-style dynamic program over connected relation subsets restricted
/// to left-deep extensions (no cross products). The cost of a plan is the sum
/// of the estimated cardinalities of its join prefixes of length >= 2. Among
/// equal-cost plans the lexicographically smallest relation order from the
/// front wins.
LeftDeepPlan best_plan(const Query& q, const Estimator& estimator);

struct ImpactRecord {
  size_t query_id = 0;
  double chosen_cost = 0.0;   // estimator's plan costed with true cardinalities
  double optimal_cost = 0.0;  // truth's plan under the same costing
  double ratio = 1.0;         // chosen / optimal, >= 1
  std::string estimator;
};

/// True C_out cost of one concrete order: executor cardinalities of the
/// prefixes of length >= 2, summed.
double true_cost(const Database& db, const JoinSequence& order);

/// Compares the estimator-chosen plan against the true-cardinality-optimal
/// plan under true costs. Both costs zero yields ratio 1; a zero optimal
/// cost with a nonzero chosen cost yields +infinity.
ImpactRecord impact(const Database& db, const Query& q, const Estimator& estimator,
                    size_t query_id = 0);

/// CSV: query_id, chosen_cost, optimal_cost, ratio, estimator.
std::string impact_csv(const std::vector<ImpactRecord>& records);

}  // namespace cardlab
