#include "cardlab/exec.hpp"

#include <algorithm>
#include <set>
#include <unordered_map>

namespace cardlab {

namespace {

struct VecHash {
  size_t operator()(const std::vector<int64_t>& v) const {
    size_t h = 0xcbf29ce484222325ull;
    for (int64_t x : v) {
      h ^= static_cast<size_t>(x);
      h *= 0x100000001b3ull;
    }
    return h;
  }
};

using Groups = std::unordered_map<std::vector<int64_t>, int64_t, VecHash>;

std::vector<size_t> filtered_rows(const Database& db, const std::string& relation,
                                  const std::vector<Selection>& selections) {
  const Relation& rel = db.relation(relation);
  std::vector<size_t> rows;
  rows.reserve(rel.row_count);
  for (size_t i = 0; i < rel.row_count; ++i) {
    bool keep = true;
    for (const auto& sel : selections) {
      if (rel.column(sel.column.column)[i] > sel.threshold) {
        keep = false;
        break;
      }
    }
    if (keep) rows.push_back(i);
  }
  return rows;
}

/// Column values a relation must expose for predicates joining it to
/// relations outside `joined`.
std::vector<std::string> needed_columns(const Query& q, const std::string& relation,
                                        const std::set<std::string>& joined) {
  std::vector<std::string> cols;
  auto add = [&cols](const std::string& name) {
    if (std::find(cols.begin(), cols.end(), name) == cols.end()) cols.push_back(name);
  };
  for (const auto& edge : q.join_predicates) {
    if (edge.fk.relation == relation && joined.count(edge.pk.relation) == 0) add(edge.fk.column);
    if (edge.pk.relation == relation && joined.count(edge.fk.relation) == 0) add(edge.pk.column);
  }
  return cols;
}

int64_t checked_add_product(int64_t acc, int64_t a, int64_t b) {
  const __int128 wide = static_cast<__int128>(acc) + static_cast<__int128>(a) * b;
  if (wide > INT64_MAX) throw_data("E_DATA", "cardinality overflows 64-bit count");
  return static_cast<int64_t>(wide);
}

}  // namespace

int64_t cardinality(const Database& db, const Query& q) {
  q.validate(db.schema);

  // Filter every referenced relation up front; the greedy order below adds
  // the smallest filtered relation that connects to the joined set.
  std::unordered_map<std::string, std::vector<size_t>> filtered;
  for (const auto& name : q.relations) {
    filtered[name] = filtered_rows(db, name, q.selections_on(name));
  }

  std::vector<std::string> order;
  std::set<std::string> joined;
  auto smallest = [&](auto&& eligible) {
    std::string best;
    for (const auto& name : q.relations) {
      if (joined.count(name) > 0 || !eligible(name)) continue;
      if (best.empty() || filtered[name].size() < filtered[best].size()) best = name;
    }
    return best;
  };
  order.push_back(smallest([](const std::string&) { return true; }));
  joined.insert(order.back());
  while (order.size() < q.relations.size()) {
    const std::string next = smallest([&](const std::string& name) {
      return std::any_of(q.join_predicates.begin(), q.join_predicates.end(), [&](const JoinEdge& e) {
        return (e.fk.relation == name && joined.count(e.pk.relation) > 0) ||
               (e.pk.relation == name && joined.count(e.fk.relation) > 0);
      });
    });
    order.push_back(next);
    joined.insert(next);
  }

  // Intermediate result as counts per signature of still-needed join columns.
  joined = {order.front()};
  std::vector<ColumnRef> sig_cols;
  for (const auto& col : needed_columns(q, order.front(), joined)) {
    sig_cols.push_back({order.front(), col});
  }
  Groups groups;
  {
    const Relation& rel = db.relation(order.front());
    for (size_t row : filtered[order.front()]) {
      std::vector<int64_t> sig(sig_cols.size());
      for (size_t c = 0; c < sig_cols.size(); ++c) sig[c] = rel.column(sig_cols[c].column)[row];
      groups[sig] += 1;
    }
  }

  for (size_t t = 1; t < order.size(); ++t) {
    const std::string& name = order[t];
    const Relation& rel = db.relation(name);

    // Predicates connecting the new relation to the joined set, as
    // (signature index on the joined side, column name on the new side).
    std::vector<std::pair<size_t, std::string>> conditions;
    for (const auto& edge : q.join_predicates) {
      ColumnRef old_side, new_side;
      if (edge.fk.relation == name && joined.count(edge.pk.relation) > 0) {
        old_side = edge.pk;
        new_side = edge.fk;
      } else if (edge.pk.relation == name && joined.count(edge.fk.relation) > 0) {
        old_side = edge.fk;
        new_side = edge.pk;
      } else {
        continue;
      }
      const auto it = std::find(sig_cols.begin(), sig_cols.end(), old_side);
      conditions.emplace_back(static_cast<size_t>(it - sig_cols.begin()), new_side.column);
    }

    joined.insert(name);
    std::vector<ColumnRef> next_sig_cols;
    for (const auto& col : sig_cols) {
      const auto still = needed_columns(q, col.relation, joined);
      if (std::find(still.begin(), still.end(), col.column) != still.end()) {
        next_sig_cols.push_back(col);
      }
    }
    std::vector<std::string> new_cols = needed_columns(q, name, joined);
    for (const auto& col : new_cols) next_sig_cols.push_back({name, col});

    // Group the new relation's rows by join key; each group maps the new
    // relation's contribution to the next signature to a row count.
    std::unordered_map<std::vector<int64_t>, Groups, VecHash> probe;
    for (size_t row : filtered[name]) {
      std::vector<int64_t> key(conditions.size());
      for (size_t c = 0; c < conditions.size(); ++c) {
        key[c] = rel.column(conditions[c].second)[row];
      }
      std::vector<int64_t> contrib(new_cols.size());
      for (size_t c = 0; c < new_cols.size(); ++c) contrib[c] = rel.column(new_cols[c])[row];
      probe[key][contrib] += 1;
    }

    std::vector<size_t> kept_indices;
    for (const auto& col : next_sig_cols) {
      const auto it = std::find(sig_cols.begin(), sig_cols.end(), col);
      if (it != sig_cols.end()) kept_indices.push_back(static_cast<size_t>(it - sig_cols.begin()));
    }

    Groups next;
    for (const auto& [sig, count] : groups) {
      std::vector<int64_t> key(conditions.size());
      for (size_t c = 0; c < conditions.size(); ++c) key[c] = sig[conditions[c].first];
      const auto hit = probe.find(key);
      if (hit == probe.end()) continue;
      for (const auto& [contrib, rows] : hit->second) {
        std::vector<int64_t> next_sig;
        next_sig.reserve(next_sig_cols.size());
        for (size_t idx : kept_indices) next_sig.push_back(sig[idx]);
        next_sig.insert(next_sig.end(), contrib.begin(), contrib.end());
        int64_t& slot = next[next_sig];
        slot = checked_add_product(slot, count, rows);
      }
    }
    groups = std::move(next);
    sig_cols = std::move(next_sig_cols);
  }

  int64_t total = 0;
  for (const auto& [sig, count] : groups) total = checked_add_product(total, count, 1);
  return total;
}

int64_t cardinality_naive(const Database& db, const Query& q) {
  q.validate(db.schema);
  double product = 1.0;
  for (const auto& name : q.relations) {
    product *= static_cast<double>(db.relation(name).row_count);
  }
  if (product > 1e8) throw_data("E_DATA", "cartesian product too large for naive evaluation");

  const size_t n = q.relations.size();
  std::vector<const Relation*> rels(n);
  for (size_t i = 0; i < n; ++i) rels[i] = &db.relation(q.relations[i]);

  // Per level: selections on that relation, and join predicates whose other
  // side is already bound at a shallower level.
  auto level_of = [&](const std::string& name) {
    for (size_t i = 0; i < n; ++i) {
      if (q.relations[i] == name) return i;
    }
    throw_data("E_DATA", "unreferenced relation in predicate");
  };
  struct BoundJoin {
    size_t other_level;
    int other_col;
    int own_col;
  };
  std::vector<std::vector<Selection>> selections(n);
  for (const auto& sel : q.selections) selections[level_of(sel.column.relation)].push_back(sel);
  std::vector<std::vector<BoundJoin>> joins(n);
  for (const auto& edge : q.join_predicates) {
    const size_t fk_level = level_of(edge.fk.relation);
    const size_t pk_level = level_of(edge.pk.relation);
    const size_t deep = std::max(fk_level, pk_level);
    const ColumnRef& deep_side = deep == fk_level ? edge.fk : edge.pk;
    const ColumnRef& shallow_side = deep == fk_level ? edge.pk : edge.fk;
    joins[deep].push_back(BoundJoin{
        std::min(fk_level, pk_level),
        rels[std::min(fk_level, pk_level)]->column_index(shallow_side.column),
        rels[deep]->column_index(deep_side.column)});
  }

  int64_t count = 0;
  std::vector<size_t> rows(n, 0);
  const auto descend = [&](auto&& self, size_t level) -> void {
    if (level == n) {
      ++count;
      return;
    }
    const Relation& rel = *rels[level];
    for (size_t i = 0; i < rel.row_count; ++i) {
      bool ok = true;
      for (const auto& sel : selections[level]) {
        if (rel.column(sel.column.column)[i] > sel.threshold) {
          ok = false;
          break;
        }
      }
      for (const auto& join : joins[level]) {
        if (!ok) break;
        const int64_t own = rel.columns[static_cast<size_t>(join.own_col)][i];
        const int64_t other =
            rels[join.other_level]->columns[static_cast<size_t>(join.other_col)][rows[join.other_level]];
        if (own != other) ok = false;
      }
      if (!ok) continue;
      rows[level] = i;
      self(self, level + 1);
    }
  };
  descend(descend, 0);
  return count;
}

std::vector<int64_t> prefix_cardinalities(const Database& db, const JoinSequence& seq) {
  if (seq.steps.empty()) throw_data("E_DATA", "empty join sequence");
  std::vector<int64_t> out;
  Query prefix;
  for (const auto& step : seq.steps) {
    prefix.relations.push_back(step.relation);
    for (const auto& sel : step.selections) prefix.selections.push_back(sel);
    if (step.join.has_value()) prefix.join_predicates.push_back(*step.join);
    out.push_back(cardinality(db, prefix));
  }
  return out;
}

}  // namespace cardlab
