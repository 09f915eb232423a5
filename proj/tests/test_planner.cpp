#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <set>
#include <string>
#include <vector>

#include "cardlab/exec.hpp"
#include "cardlab/planner.hpp"
#include "cardlab/workload.hpp"
#include "test_helpers.hpp"

using namespace cardlab;
using namespace cardlab::testing;

namespace {

/// Five-relation chain R0 -> R1 -> R2 -> R3 -> R4, one selection column each.
DatabaseSchema chain5_schema() {
  DatabaseSchema schema;
  for (int i = 0; i < 5; ++i) {
    RelationSchema rel;
    rel.name = "R" + std::to_string(i);
    if (i > 0) {
      rel.columns.push_back({"id", ColumnKind::primary_key, "", "", Generator::sequential()});
    }
    rel.columns.push_back({"x", ColumnKind::attribute, "", "", Generator::uniform(1, 30)});
    if (i < 4) {
      rel.columns.push_back({"fk", ColumnKind::foreign_key, "R" + std::to_string(i + 1), "id",
                             Generator::zipf(100000, 0.7)});
    }
    schema.relations.push_back(rel);
    schema.selection_columns.push_back({rel.name, "x"});
  }
  schema.finalize();
  return schema;
}

Database chain5_db(uint64_t seed) {
  return generate_synthetic(
      chain5_schema(), {{"R0", 80}, {"R1", 70}, {"R2", 60}, {"R3", 50}, {"R4", 40}}, seed);
}

/// Star with center "z"; the center's name sorts after every leaf.
DatabaseSchema star_schema() {
  DatabaseSchema schema;
  RelationSchema z;
  z.name = "z";
  z.columns = {{"id", ColumnKind::primary_key, "", "", Generator::sequential()},
               {"x", ColumnKind::attribute, "", "", Generator::uniform(1, 10)}};
  schema.relations.push_back(z);
  schema.selection_columns.push_back({"z", "x"});
  for (int i = 1; i <= 3; ++i) {
    RelationSchema leaf;
    leaf.name = "a" + std::to_string(i);
    leaf.columns = {{"x", ColumnKind::attribute, "", "", Generator::uniform(1, 10)},
                    {"fk", ColumnKind::foreign_key, "z", "id", Generator::uniform(1, 1000)}};
    schema.relations.push_back(leaf);
    schema.selection_columns.push_back({leaf.name, "x"});
  }
  schema.finalize();
  return schema;
}

Query star_query(const DatabaseSchema& schema) {
  Query q;
  q.relations = {"z", "a1", "a2", "a3"};
  q.join_predicates = schema.join_edges;
  return q;
}

/// Deterministic pseudo-random estimator; same query -> same value.
class WeirdEstimator final : public Estimator {
 public:
  std::string name() const override { return "weird"; }
  size_t parameter_count() const override { return 0; }
  double estimate(const Query& q) const override {
    uint64_t h = 1469598103934665603ull;
    auto mix = [&h](uint64_t v) {
      h ^= v;
      h *= 1099511628211ull;
    };
    for (const auto& rel : q.relations) {
      for (char c : rel) mix(static_cast<unsigned char>(c));
    }
    for (const auto& sel : q.selections) mix(static_cast<uint64_t>(sel.threshold));
    mix(q.join_predicates.size());
    return 1.0 + static_cast<double>(h % 100000) / 7.0;
  }
};

class ConstantEstimator final : public Estimator {
 public:
  std::string name() const override { return "constant"; }
  size_t parameter_count() const override { return 0; }
  double estimate(const Query&) const override { return 42.0; }
};

bool joins_used(const Query& q, const std::set<std::string>& used, const std::string& name) {
  for (const auto& edge : q.join_predicates) {
    if (edge.fk.relation == name && used.count(edge.pk.relation) != 0) return true;
    if (edge.pk.relation == name && used.count(edge.fk.relation) != 0) return true;
  }
  return false;
}

void enumerate_orders(const Query& q, const std::vector<std::string>& names,
                      std::vector<std::string>& current, std::set<std::string>& used,
                      std::vector<std::vector<std::string>>& out) {
  if (current.size() == names.size()) {
    out.push_back(current);
    return;
  }
  for (const auto& name : names) {
    if (used.count(name) != 0) continue;
    if (!current.empty() && !joins_used(q, used, name)) continue;
    current.push_back(name);
    used.insert(name);
    enumerate_orders(q, names, current, used, out);
    used.erase(name);
    current.pop_back();
  }
}

std::vector<std::vector<std::string>> all_left_deep_orders(const Query& q) {
  std::vector<std::string> names = q.relations;
  std::sort(names.begin(), names.end());
  std::vector<std::vector<std::string>> out;
  std::vector<std::string> current;
  std::set<std::string> used;
  enumerate_orders(q, names, current, used, out);
  return out;
}

Query oracle_subquery(const Query& q, const std::set<std::string>& rels) {
  Query sub;
  sub.relations.assign(rels.begin(), rels.end());  // set iteration is sorted
  for (const auto& edge : q.join_predicates) {
    if (rels.count(edge.fk.relation) != 0 && rels.count(edge.pk.relation) != 0) {
      sub.join_predicates.push_back(edge);
    }
  }
  for (const auto& sel : q.selections) {
    if (rels.count(sel.column.relation) != 0) sub.selections.push_back(sel);
  }
  return sub;
}

double oracle_cost(const Query& q, const Estimator& est,
                   const std::vector<std::string>& order) {
  double cost = 0.0;
  std::set<std::string> rels(order.begin(), order.begin() + 1);
  for (size_t len = 2; len <= order.size(); ++len) {
    rels.insert(order[len - 1]);
    cost += est.estimate(oracle_subquery(q, rels));
  }
  return cost;
}

std::vector<std::string> order_of(const LeftDeepPlan& plan) {
  std::vector<std::string> names;
  for (const auto& step : plan.order.steps) names.push_back(step.relation);
  return names;
}

std::string temp_path(const std::string& filename) {
  return (std::filesystem::temp_directory_path() / filename).string();
}

}  // namespace

TEST_CASE("canonical order starts at the smallest name and stays connected") {
  const Database db = chain5_db(3);
  const auto examples = generate_workload(db, 4, 10, 5);
  for (const auto& ex : examples) {
    const JoinSequence seq = canonical_sequence(ex.query);
    REQUIRE(seq.steps.size() == ex.query.relations.size());
    std::vector<std::string> sorted_rels = ex.query.relations;
    std::sort(sorted_rels.begin(), sorted_rels.end());
    CHECK(seq.steps[0].relation == sorted_rels[0]);
    CHECK_FALSE(seq.steps[0].join.has_value());
    std::set<std::string> joined{seq.steps[0].relation};
    for (size_t t = 1; t < seq.steps.size(); ++t) {
      REQUIRE(seq.steps[t].join.has_value());
      const JoinEdge& edge = *seq.steps[t].join;
      const std::string& rel = seq.steps[t].relation;
      const bool fk_new = edge.fk.relation == rel && joined.count(edge.pk.relation) != 0;
      const bool pk_new = edge.pk.relation == rel && joined.count(edge.fk.relation) != 0;
      CHECK((fk_new || pk_new));
      joined.insert(rel);
    }
    // The rebuilt query matches the original as sets.
    const Query rebuilt = seq.to_query();
    CHECK(std::set<std::string>(rebuilt.relations.begin(), rebuilt.relations.end()) ==
          std::set<std::string>(ex.query.relations.begin(), ex.query.relations.end()));
    CHECK(rebuilt.join_predicates.size() == ex.query.join_predicates.size());
    CHECK(rebuilt.selections.size() == ex.query.selections.size());
  }

  const DatabaseSchema star = star_schema();
  const JoinSequence seq = canonical_sequence(star_query(star));
  CHECK(seq.steps[0].relation == "a1");
  CHECK(seq.steps[1].relation == "z");
  CHECK(seq.steps[2].relation == "a2");
  CHECK(seq.steps[3].relation == "a3");
}

TEST_CASE("canonical order rejects disconnected queries") {
  Query q;
  q.relations = {"A", "C"};  // no predicate between them
  CHECK_THROWS_AS(canonical_sequence(q), Error);
  CHECK_THROWS_AS(canonical_sequence(Query{}), Error);
}

TEST_CASE("truth and histogram adapters match their underlying functions") {
  const Database db = chain_db(60, 30, 20, 42);
  const auto examples = generate_workload(db, 3, 10, 9);
  const auto truth = make_truth_estimator(db);
  const auto histo = make_histogram_estimator(db, 8);
  const StatsCatalog stats = build_stats(db, 8);
  CHECK(truth->name() == "truth");
  CHECK(truth->parameter_count() == 0);
  CHECK(histo->name() == "histogram");
  CHECK(histo->parameter_count() == stats.parameter_count());
  for (const auto& ex : examples) {
    CHECK(truth->estimate(ex.query) == static_cast<double>(cardinality(db, ex.query)));
    CHECK(histo->estimate(ex.query) == estimate_query(stats, ex.query));
  }
}

TEST_CASE("model adapters invert the label transform and scale by the product") {
  const Database db = chain_db(60, 30, 20, 42);
  const EncodingSpec spec = build_spec(db);
  const auto examples = generate_workload(db, 3, 8, 11);
  const LabelTransform lt{-2.0, 1.5, 1e-9};

  DenseNet net = init_dense(spec.width(), 8, 1, 77);
  net.label_transform = lt;
  const auto dense_est = make_dense_estimator(net, spec, db, "nn");
  CHECK(dense_est->parameter_count() == net.parameter_count());
  for (const auto& ex : examples) {
    const double cart = db.cartesian_rows(ex.query.relations);
    const FeatureVector x = encode_flat(spec, ex.query);
    const double expected =
        std::clamp(lt.invert(net.predict_transformed(x)) * cart, 0.0, cart);
    CHECK(dense_est->estimate(ex.query) == expected);
    CHECK(std::llround(dense_est->estimate(ex.query)) == predict_cardinality(net, x, cart));
  }

  RecurrentNet rnn = init_recurrent(spec.width(), 6, 1, 78);
  rnn.label_transform = lt;
  const auto rnn_est = make_recurrent_estimator(rnn, spec, db, "rnn");
  for (const auto& ex : examples) {
    const double cart = db.cartesian_rows(ex.query.relations);
    const FeatureSequence xs = encode_sequence(spec, canonical_sequence(ex.query));
    const double expected =
        std::clamp(lt.invert(rnn.predict_transformed(xs).back()) * cart, 0.0, cart);
    CHECK(rnn_est->estimate(ex.query) == expected);
    CHECK(std::llround(rnn_est->estimate(ex.query)) == predict_cardinality(rnn, xs, cart));
  }

  // Tree ensembles hold their own transforms.
  std::vector<FlatExample> data;
  Rng rng(5);
  for (int i = 0; i < 40; ++i) {
    FeatureVector x(spec.width());
    for (auto& v : x) v = rng.next_double();
    data.push_back({x, rng.next_normal(0.0, 1.0)});
  }
  RandomForest forest = fit_forest(data, 3, TreeParams{}, 4);
  forest.label_transform = lt;
  const auto forest_est = make_forest_estimator(forest, spec, db, "rf");
  BoostedEnsemble boosted = fit_boosted(data, 5, 0.5, TreeParams{3, 1, 0});
  boosted.label_transform = lt;
  const auto boosted_est = make_boosted_estimator(boosted, spec, db, "gbt");
  CHECK(forest_est->parameter_count() == forest.parameter_count());
  CHECK(boosted_est->parameter_count() == boosted.parameter_count());
  for (const auto& ex : examples) {
    const double cart = db.cartesian_rows(ex.query.relations);
    const FeatureVector x = encode_flat(spec, ex.query);
    CHECK(forest_est->estimate(ex.query) ==
          std::clamp(lt.invert(forest.predict(x)) * cart, 0.0, cart));
    CHECK(boosted_est->estimate(ex.query) ==
          std::clamp(lt.invert(boosted.predict(x)) * cart, 0.0, cart));
  }

  DenseNet narrow = init_dense(3, 4, 1, 1);
  CHECK_THROWS_AS(make_dense_estimator(narrow, spec, db, "nn"), Error);
}

TEST_CASE("memo adapter reproduces training cardinalities exactly") {
  const Database db = chain_db(60, 30, 20, 42);
  const EncodingSpec spec = build_spec(db);
  auto examples = generate_workload(db, 3, 30, 13);
  label(db, examples, false);
  const MemoTable table = build_memo(examples, spec);
  const auto memo_est = make_memo_estimator(table, spec);
  CHECK(memo_est->name() == "memo");
  CHECK(memo_est->parameter_count() == table.size_metric());
  for (const auto& ex : examples) {
    CHECK(memo_est->estimate(ex.query) == static_cast<double>(ex.cardinality));
  }
}

TEST_CASE("loading estimators from files dispatches on the stored kind") {
  const Database db = chain_db(60, 30, 20, 42);
  const EncodingSpec spec = build_spec(db);
  const auto examples = generate_workload(db, 3, 5, 17);

  DenseNet net = init_dense(spec.width(), 8, 1, 3);
  net.label_transform = {0.5, 2.0, 1e-9};
  const std::string dense_path = temp_path("cardlab_test_dense.model.json");
  write_text_file(dense_path, dense_to_json_text(net));
  const auto loaded = load_estimator(dense_path, db);
  CHECK(loaded->name() == "cardlab_test_dense");
  const auto direct = make_dense_estimator(net, spec, db);
  for (const auto& ex : examples) {
    CHECK(loaded->estimate(ex.query) == direct->estimate(ex.query));
  }
  const auto renamed = load_estimator(dense_path, db, "alt");
  CHECK(renamed->name() == "alt");
  std::filesystem::remove(dense_path);

  const StatsCatalog stats = build_stats(db, 6);
  const std::string stats_path = temp_path("cardlab_test_stats.json");
  write_text_file(stats_path, stats_to_json_text(stats));
  const auto histo = load_estimator(stats_path, db);
  for (const auto& ex : examples) {
    CHECK(histo->estimate(ex.query) == estimate_query(stats, ex.query));
  }
  std::filesystem::remove(stats_path);

  auto labeled = examples;
  label(db, labeled, false);
  const MemoTable table = build_memo(labeled, spec);
  const std::string memo_path = temp_path("cardlab_test_memo.json");
  write_text_file(memo_path, memo_to_json_text(table));
  const auto memo_est = load_estimator(memo_path, db);
  for (const auto& ex : labeled) {
    CHECK(memo_est->estimate(ex.query) == static_cast<double>(ex.cardinality));
  }
  std::filesystem::remove(memo_path);
}

TEST_CASE("loading a missing or malformed model file fails cleanly") {
  const Database db = chain_db(60, 30, 20, 42);
  try {
    load_estimator("/nonexistent/model.json", db);
    FAIL("expected E_MODEL_NOT_FOUND");
  } catch (const Error& e) {
    CHECK(e.code() == "E_MODEL_NOT_FOUND");
  }

  const std::string junk_path = temp_path("cardlab_test_junk.json");
  write_text_file(junk_path, "this is not json");
  CHECK_THROWS_AS(load_estimator(junk_path, db), Error);
  std::filesystem::remove(junk_path);

  const std::string alien_path = temp_path("cardlab_test_alien.json");
  write_text_file(alien_path, "{\"kind\": \"alien\"}\n");
  try {
    load_estimator(alien_path, db);
    FAIL("expected E_SCHEMA");
  } catch (const Error& e) {
    CHECK(e.code() == "E_SCHEMA");
  }
  std::filesystem::remove(alien_path);
}

TEST_CASE("two-relation plans order lexicographically and cost one prefix") {
  const Database db = chain5_db(3);
  Query q;
  q.relations = {"R1", "R0"};
  q.join_predicates = {db.schema.join_edges[0]};  // R0.fk = R1.id
  const auto truth = make_truth_estimator(db);
  const LeftDeepPlan plan = best_plan(q, *truth);
  CHECK(order_of(plan) == std::vector<std::string>{"R0", "R1"});
  REQUIRE(plan.prefix_estimates.size() == 1);
  CHECK(plan.cost == plan.prefix_estimates[0]);
  CHECK(plan.cost == static_cast<double>(cardinality(db, q)));
}

TEST_CASE("DP plan cost equals exhaustive left-deep enumeration") {
  const Database db = chain5_db(3);
  const auto truth = make_truth_estimator(db);
  const auto histo = make_histogram_estimator(db, 8);
  const WeirdEstimator weird;
  std::vector<const Estimator*> estimators{truth.get(), histo.get(), &weird};

  std::vector<LabeledExample> queries;
  for (size_t complexity : {3, 4, 5}) {
    const auto batch = generate_workload(db, complexity, 2, 100 + complexity);
    queries.insert(queries.end(), batch.begin(), batch.end());
  }

  for (const Estimator* est : estimators) {
    for (const auto& ex : queries) {
      const LeftDeepPlan plan = best_plan(ex.query, *est);
      const auto orders = all_left_deep_orders(ex.query);
      REQUIRE(!orders.empty());
      double best = std::numeric_limits<double>::infinity();
      for (const auto& order : orders) {
        best = std::min(best, oracle_cost(ex.query, *est, order));
      }
      CHECK(plan.cost == doctest::Approx(best).epsilon(1e-12));
      CHECK(oracle_cost(ex.query, *est, order_of(plan)) <= best * (1.0 + 1e-12));
      // The emitted sequence is a valid left-deep order of the query.
      const auto names = order_of(plan);
      CHECK(std::count(orders.begin(), orders.end(), names) == 1);
    }
  }
}

TEST_CASE("constant estimates fall back to the lexicographically smallest order") {
  const ConstantEstimator constant;

  const Database db = chain5_db(3);
  Query chain_q;
  chain_q.relations = {"R2", "R0", "R3", "R1"};
  chain_q.join_predicates = {db.schema.join_edges[0], db.schema.join_edges[1],
                             db.schema.join_edges[2]};
  const LeftDeepPlan chain_plan = best_plan(chain_q, constant);
  CHECK(order_of(chain_plan) == std::vector<std::string>{"R0", "R1", "R2", "R3"});
  CHECK(chain_plan.cost == 3 * 42.0);

  const DatabaseSchema star = star_schema();
  const LeftDeepPlan star_plan = best_plan(star_query(star), constant);
  CHECK(order_of(star_plan) == std::vector<std::string>{"a1", "z", "a2", "a3"});
}

TEST_CASE("impact of the truth estimator is exactly one") {
  const Database db = chain5_db(3);
  const auto truth = make_truth_estimator(db);
  const auto examples = generate_workload(db, 4, 6, 19);
  for (size_t i = 0; i < examples.size(); ++i) {
    const ImpactRecord rec = impact(db, examples[i].query, *truth, i);
    CHECK(rec.ratio == 1.0);
    CHECK(rec.chosen_cost == rec.optimal_cost);
    CHECK(rec.query_id == i);
    CHECK(rec.estimator == "truth");
  }
}

TEST_CASE("impact ratios are bounded below by one") {
  const Database db = chain5_db(3);
  const auto histo = make_histogram_estimator(db, 4);
  const WeirdEstimator weird;
  const auto examples = generate_workload(db, 4, 6, 23);
  for (const auto& ex : examples) {
    for (const Estimator* est : {static_cast<const Estimator*>(histo.get()),
                                 static_cast<const Estimator*>(&weird)}) {
      const ImpactRecord rec = impact(db, ex.query, *est);
      CHECK(rec.ratio >= 1.0);
      CHECK(rec.chosen_cost >= rec.optimal_cost);
      CHECK(std::isfinite(rec.ratio));
    }
  }
}

TEST_CASE("single-relation plans carry no cost") {
  const Database db = chain5_db(3);
  Query q;
  q.relations = {"R2"};
  q.selections = {{{"R2", "x"}, 15}};
  const auto truth = make_truth_estimator(db);
  const LeftDeepPlan plan = best_plan(q, *truth);
  CHECK(plan.order.steps.size() == 1);
  CHECK(plan.prefix_estimates.empty());
  CHECK(plan.cost == 0.0);
  const ImpactRecord rec = impact(db, q, *truth);
  CHECK(rec.ratio == 1.0);
  CHECK(rec.optimal_cost == 0.0);
}

TEST_CASE("impact CSV lists one row per record") {
  const ImpactRecord rec{3, 120.0, 100.0, 1.2, "histogram"};
  const std::string text = impact_csv({rec});
  CHECK(text.find("query_id,chosen_cost,optimal_cost,ratio,estimator") != std::string::npos);
  CHECK(text.find("3,120,100,1.2,histogram") != std::string::npos);
  CHECK(text.find("C_out") != std::string::npos);
  CHECK(std::count(text.begin(), text.end(), '\n') == 3);
}
