#include "cardlab/workload.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "cardlab/exec.hpp"

namespace cardlab {

namespace {

/// Grows a connected relation subset of the requested size by repeatedly
/// following a uniformly random frontier edge; the edges used form a random
/// spanning tree of the subset. Returns false if the walk gets stuck (only
/// possible when size exceeds the reachable component).
bool grow_subgraph(const DatabaseSchema& schema, size_t size, Rng& rng,
                   std::vector<std::string>& relations, std::vector<JoinEdge>& tree) {
  relations.clear();
  tree.clear();
  std::set<std::string> in;
  const std::string start = schema.relations[rng.next_index(schema.relations.size())].name;
  relations.push_back(start);
  in.insert(start);
  while (relations.size() < size) {
    std::vector<const JoinEdge*> frontier;
    for (const auto& edge : schema.join_edges) {
      const bool has_fk = in.count(edge.fk.relation) > 0;
      const bool has_pk = in.count(edge.pk.relation) > 0;
      if (has_fk != has_pk) frontier.push_back(&edge);
    }
    if (frontier.empty()) return false;
    const JoinEdge& pick = *frontier[rng.next_index(frontier.size())];
    const std::string& grown = in.count(pick.fk.relation) > 0 ? pick.pk.relation : pick.fk.relation;
    relations.push_back(grown);
    in.insert(grown);
    tree.push_back(pick);
  }
  return true;
}

}  // namespace

std::vector<LabeledExample> generate_workload(const Database& db, size_t complexity, size_t n,
                                              uint64_t seed) {
  const DatabaseSchema& schema = db.schema;
  if (complexity < 1 || complexity > schema.relations.size()) {
    throw_data("E_DATA", "complexity " + std::to_string(complexity) + " outside 1.." +
                             std::to_string(schema.relations.size()));
  }

  // Precompute active domains of the eligible columns once.
  std::map<std::string, std::vector<int64_t>> domains;
  for (const auto& col : schema.selection_columns) {
    domains[col.str()] = active_domain(db, col);
  }

  std::vector<LabeledExample> out;
  out.reserve(n);
  for (size_t i = 0; i < n; ++i) {
    Rng rng(derive_seed(seed, "query", i));
    LabeledExample ex;
    bool grown = false;
    for (int attempt = 0; attempt < 64 && !grown; ++attempt) {
      grown = grow_subgraph(schema, complexity, rng, ex.query.relations, ex.query.join_predicates);
    }
    if (!grown) {
      throw_data("E_DATA", "join graph admits no connected subgraph of size " +
                               std::to_string(complexity));
    }
    // Keep declaration order for stable serialization.
    std::sort(ex.query.relations.begin(), ex.query.relations.end(),
              [&](const std::string& a, const std::string& b) {
                return schema.relation_index(a) < schema.relation_index(b);
              });
    for (const auto& col : schema.selection_columns) {
      if (!ex.query.references(col.relation)) continue;
      if (rng.next_double() >= 0.5) continue;
      const auto& domain = domains[col.str()];
      if (domain.empty()) continue;
      ex.query.selections.push_back(Selection{col, domain[rng.next_index(domain.size())]});
    }
    ex.query.validate(schema);
    ex.sequence = to_sequence(ex.query, derive_seed(seed, "order", i));
    out.push_back(std::move(ex));
  }
  return out;
}

JoinSequence to_sequence(const Query& q, uint64_t seed) {
  if (q.join_predicates.size() + 1 != q.relations.size()) {
    throw_data("E_DATA", "left-deep sequences require tree-shaped join predicates");
  }
  Rng rng(seed);
  JoinSequence seq;
  std::set<std::string> placed;

  const std::string start = q.relations[rng.next_index(q.relations.size())];
  seq.steps.push_back(SequenceStep{start, q.selections_on(start), {}});
  placed.insert(start);

  while (placed.size() < q.relations.size()) {
    // Candidates: unplaced relations with a predicate into the placed set;
    // for a tree there is exactly one such predicate per candidate.
    std::vector<std::pair<std::string, JoinEdge>> candidates;
    for (const auto& name : q.relations) {
      if (placed.count(name) > 0) continue;
      for (const auto& edge : q.join_predicates) {
        const bool fk_new = edge.fk.relation == name && placed.count(edge.pk.relation) > 0;
        const bool pk_new = edge.pk.relation == name && placed.count(edge.fk.relation) > 0;
        if (fk_new || pk_new) candidates.emplace_back(name, edge);
      }
    }
    if (candidates.empty()) throw_data("E_DATA", "query join predicates are not connected");
    const auto& [name, edge] = candidates[rng.next_index(candidates.size())];
    seq.steps.push_back(SequenceStep{name, q.selections_on(name), edge});
    placed.insert(name);
  }
  return seq;
}

void label(const Database& db, std::vector<LabeledExample>& examples, bool with_prefixes,
           size_t jobs) {
  parallel_for(jobs, examples.size(), [&](size_t i) {
    LabeledExample& ex = examples[i];
    const std::vector<int64_t> prefixes = prefix_cardinalities(db, ex.sequence);
    ex.cardinality = prefixes.back();
    ex.selectivity = static_cast<double>(ex.cardinality) / db.cartesian_rows(ex.query.relations);
    ex.prefix_selectivities.clear();
    if (with_prefixes) {
      std::vector<std::string> prefix_relations;
      double rows = 1.0;
      for (size_t t = 0; t < ex.sequence.steps.size(); ++t) {
        rows *= static_cast<double>(db.relation(ex.sequence.steps[t].relation).row_count);
        ex.prefix_selectivities.push_back(static_cast<double>(prefixes[t]) / rows);
      }
    }
  });
}

std::pair<std::vector<LabeledExample>, std::vector<LabeledExample>> split_workload(
    const std::vector<LabeledExample>& examples, size_t test_n, uint64_t seed) {
  if (test_n >= examples.size()) {
    throw_data("E_DATA", "test size " + std::to_string(test_n) + " must be smaller than the workload");
  }
  std::vector<size_t> order(examples.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(derive_seed(seed, "split"));
  rng.shuffle(order);
  std::pair<std::vector<LabeledExample>, std::vector<LabeledExample>> out;
  for (size_t i = 0; i < order.size(); ++i) {
    (i < test_n ? out.second : out.first).push_back(examples[order[i]]);
  }
  return out;
}

std::pair<std::vector<LabeledExample>, std::vector<LabeledExample>> remove_selection_values(
    const std::vector<LabeledExample>& examples, const Database& db, const ColumnRef& column,
    double fraction, uint64_t seed) {
  const bool eligible =
      std::any_of(db.schema.selection_columns.begin(), db.schema.selection_columns.end(),
                  [&](const ColumnRef& c) { return c == column; });
  if (!eligible) throw_data("E_DATA", "column " + column.str() + " is not selection-eligible");
  if (fraction < 0.0 || fraction > 1.0) throw_data("E_DATA", "fraction must be in [0,1]");

  std::vector<int64_t> domain = active_domain(db, column);
  // Small epsilon so binary fractions like 0.1 * 20 do not ceil past the
  // intended integer.
  const size_t pick =
      static_cast<size_t>(std::ceil(fraction * static_cast<double>(domain.size()) - 1e-9));
  Rng rng(derive_seed(seed, "remove-values"));
  rng.shuffle(domain);
  const std::set<int64_t> chosen(domain.begin(), domain.begin() + std::min(pick, domain.size()));

  std::pair<std::vector<LabeledExample>, std::vector<LabeledExample>> out;
  for (const auto& ex : examples) {
    bool held = false;
    for (const auto& sel : ex.query.selections) {
      if (sel.column == column && chosen.count(sel.threshold) > 0) {
        held = true;
        break;
      }
    }
    (held ? out.second : out.first).push_back(ex);
  }
  return out;
}

std::pair<std::vector<LabeledExample>, std::vector<LabeledExample>> remove_join(
    const std::vector<LabeledExample>& examples, const std::vector<std::string>& relation_set) {
  if (relation_set.empty()) throw_data("E_DATA", "relation set must be nonempty");
  const std::set<std::string> target(relation_set.begin(), relation_set.end());
  std::pair<std::vector<LabeledExample>, std::vector<LabeledExample>> out;
  for (const auto& ex : examples) {
    const std::set<std::string> rels(ex.query.relations.begin(), ex.query.relations.end());
    (rels == target ? out.second : out.first).push_back(ex);
  }
  return out;
}

}  // namespace cardlab
