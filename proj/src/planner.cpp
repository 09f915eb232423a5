#include "cardlab/planner.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <sstream>

#include "cardlab/exec.hpp"

namespace cardlab {

namespace {

constexpr size_t kMaxPlanRelations = 20;  // the DP tables hold 2^n entries
constexpr double kInf = std::numeric_limits<double>::infinity();

struct PlanContext {
  const Query& q;
  const Estimator& est;
  std::vector<std::string> rels;                 // sorted by name
  std::vector<std::pair<size_t, size_t>> edges;  // (fk rel, pk rel) index pairs
  std::vector<double> est_memo;                  // per subset mask; NaN = unset
  std::vector<double> comp_memo;                 // min completion cost per mask
  std::vector<char> comp_done;
};

size_t rel_index(const std::vector<std::string>& rels, const std::string& name) {
  const auto it = std::lower_bound(rels.begin(), rels.end(), name);
  return static_cast<size_t>(it - rels.begin());
}

Query subquery(const PlanContext& ctx, uint32_t mask) {
  Query sub;
  for (size_t i = 0; i < ctx.rels.size(); ++i) {
    if ((mask & (1u << i)) != 0) sub.relations.push_back(ctx.rels[i]);
  }
  for (size_t e = 0; e < ctx.edges.size(); ++e) {
    const auto [a, b] = ctx.edges[e];
    if ((mask & (1u << a)) != 0 && (mask & (1u << b)) != 0) {
      sub.join_predicates.push_back(ctx.q.join_predicates[e]);
    }
  }
  for (const auto& sel : ctx.q.selections) {
    if ((mask & (1u << rel_index(ctx.rels, sel.column.relation))) != 0) {
      sub.selections.push_back(sel);
    }
  }
  return sub;
}

double estimate_mask(PlanContext& ctx, uint32_t mask) {
  double& slot = ctx.est_memo[mask];
  if (std::isnan(slot)) slot = ctx.est.estimate(subquery(ctx, mask));
  return slot;
}

bool connects(const PlanContext& ctx, uint32_t mask, size_t r) {
  for (const auto& [a, b] : ctx.edges) {
    if (a == r && (mask & (1u << b)) != 0) return true;
    if (b == r && (mask & (1u << a)) != 0) return true;
  }
  return false;
}

/// Minimal cost of extending the prefix set `mask` to the full set, where
/// adding relation r costs the estimate of the enlarged prefix.
double completion(PlanContext& ctx, uint32_t mask) {
  if (ctx.comp_done[mask] != 0) return ctx.comp_memo[mask];
  const uint32_t full = (1u << ctx.rels.size()) - 1;
  double best = mask == full ? 0.0 : kInf;
  for (size_t r = 0; mask != full && r < ctx.rels.size(); ++r) {
    if ((mask & (1u << r)) != 0 || !connects(ctx, mask, r)) continue;
    const uint32_t next = mask | (1u << r);
    best = std::min(best, estimate_mask(ctx, next) + completion(ctx, next));
  }
  ctx.comp_done[mask] = 1;
  ctx.comp_memo[mask] = best;
  return best;
}

const JoinEdge* connecting_edge(const PlanContext& ctx, uint32_t mask, size_t r) {
  for (size_t e = 0; e < ctx.edges.size(); ++e) {
    const auto [a, b] = ctx.edges[e];
    if ((a == r && (mask & (1u << b)) != 0) || (b == r && (mask & (1u << a)) != 0)) {
      return &ctx.q.join_predicates[e];
    }
  }
  return nullptr;
}

std::string fmt(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace

LeftDeepPlan best_plan(const Query& q, const Estimator& estimator) {
  if (q.relations.empty()) throw_data("E_DATA", "cannot plan an empty query");
  if (q.relations.size() > kMaxPlanRelations) {
    throw_data("E_DATA", "planning is limited to " + std::to_string(kMaxPlanRelations) +
                             " relations per query");
  }

  PlanContext ctx{q, estimator, {}, {}, {}, {}, {}};
  ctx.rels = q.relations;
  std::sort(ctx.rels.begin(), ctx.rels.end());
  for (const auto& edge : q.join_predicates) {
    ctx.edges.emplace_back(rel_index(ctx.rels, edge.fk.relation),
                           rel_index(ctx.rels, edge.pk.relation));
  }
  const size_t n = ctx.rels.size();
  ctx.est_memo.assign(1u << n, std::numeric_limits<double>::quiet_NaN());
  ctx.comp_memo.assign(1u << n, 0.0);
  ctx.comp_done.assign(1u << n, 0);

  // Starting relation: lowest total cost; rels is sorted, so scanning with a
  // strict comparison keeps the lexicographically smallest minimizer.
  size_t start = n;
  double best_total = kInf;
  for (size_t r = 0; r < n; ++r) {
    const double total = completion(ctx, 1u << r);
    if (total < best_total) {
      best_total = total;
      start = r;
    }
  }
  if (start == n || !std::isfinite(best_total)) {
    throw_data("E_DATA", "query join graph is not connected");
  }

  // Forward walk: each step takes the smallest-name relation among the
  // minimizers of est(prefix + r) + completion(prefix + r).
  LeftDeepPlan plan;
  uint32_t mask = 1u << start;
  plan.order.steps.push_back(
      {ctx.rels[start], q.selections_on(ctx.rels[start]), std::nullopt});
  while (mask != (1u << n) - 1) {
    size_t pick = n;
    double best_step = kInf;
    for (size_t r = 0; r < n; ++r) {
      if ((mask & (1u << r)) != 0 || !connects(ctx, mask, r)) continue;
      const uint32_t next = mask | (1u << r);
      const double cost = estimate_mask(ctx, next) + completion(ctx, next);
      if (cost < best_step) {
        best_step = cost;
        pick = r;
      }
    }
    const JoinEdge* via = connecting_edge(ctx, mask, pick);
    mask |= 1u << pick;
    plan.prefix_estimates.push_back(estimate_mask(ctx, mask));
    plan.cost += plan.prefix_estimates.back();
    plan.order.steps.push_back({ctx.rels[pick], q.selections_on(ctx.rels[pick]), *via});
  }
  return plan;
}

double true_cost(const Database& db, const JoinSequence& order) {
  const std::vector<int64_t> cards = prefix_cardinalities(db, order);
  double cost = 0.0;
  for (size_t i = 1; i < cards.size(); ++i) cost += static_cast<double>(cards[i]);
  return cost;
}

ImpactRecord impact(const Database& db, const Query& q, const Estimator& estimator,
                    size_t query_id) {
  const LeftDeepPlan chosen = best_plan(q, estimator);
  const auto truth = make_truth_estimator(db);
  const LeftDeepPlan optimal = best_plan(q, *truth);

  ImpactRecord rec;
  rec.query_id = query_id;
  rec.estimator = estimator.name();
  rec.chosen_cost = true_cost(db, chosen.order);
  rec.optimal_cost = true_cost(db, optimal.order);
  if (rec.optimal_cost == 0.0) {
    rec.ratio = rec.chosen_cost == 0.0 ? 1.0 : kInf;
  } else {
    rec.ratio = rec.chosen_cost / rec.optimal_cost;
  }
  return rec;
}

std::string impact_csv(const std::vector<ImpactRecord>& records) {
  std::ostringstream out;
  out << "# cost model: C_out, the sum of true prefix cardinalities (length >= 2)\n";
  out << "query_id,chosen_cost,optimal_cost,ratio,estimator\n";
  for (const auto& rec : records) {
    out << rec.query_id << ',' << fmt(rec.chosen_cost) << ',' << fmt(rec.optimal_cost) << ','
        << fmt(rec.ratio) << ',' << rec.estimator << '\n';
  }
  return out.str();
}

}  // namespace cardlab
