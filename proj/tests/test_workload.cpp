#include <doctest.h>

#include <set>

#include "cardlab/exec.hpp"
#include "cardlab/workload.hpp"
#include "test_helpers.hpp"

using namespace cardlab;
using testing::chain_db;
using testing::handmade_chain_db;

TEST_CASE("complexity 1 yields single-relation queries without joins") {
  Database db = chain_db(50, 30, 20, 1);
  const auto workload = generate_workload(db, 1, 3, 5);
  REQUIRE(workload.size() == 3);
  for (const auto& ex : workload) {
    CHECK(ex.query.relations.size() == 1);
    CHECK(ex.query.join_predicates.empty());
    CHECK(ex.sequence.steps.size() == 1);
    CHECK_FALSE(ex.sequence.steps[0].join.has_value());
  }
}

TEST_CASE("complexity 2 on the chain schema only pairs adjacent relations") {
  Database db = chain_db(50, 30, 20, 2);
  const auto workload = generate_workload(db, 2, 200, 6);
  for (const auto& ex : workload) {
    const std::set<std::string> rels(ex.query.relations.begin(), ex.query.relations.end());
    const bool ab = rels == std::set<std::string>{"A", "B"};
    const bool bc = rels == std::set<std::string>{"B", "C"};
    CHECK((ab || bc));
    CHECK(ex.query.join_predicates.size() == 1);
  }
}

TEST_CASE("workload generation is deterministic in the seed") {
  Database db = chain_db(60, 40, 20, 3);
  const auto first = generate_workload(db, 3, 100, 77);
  const auto second = generate_workload(db, 3, 100, 77);
  const auto other = generate_workload(db, 3, 100, 78);
  CHECK(workload_to_jsonl(first) == workload_to_jsonl(second));
  CHECK(workload_to_jsonl(first) != workload_to_jsonl(other));
}

TEST_CASE("every generated query validates against the schema") {
  Database db = chain_db(60, 40, 20, 4);
  for (size_t complexity = 1; complexity <= 3; ++complexity) {
    for (const auto& ex : generate_workload(db, complexity, 50, complexity)) {
      CHECK_NOTHROW(ex.query.validate(db.schema));
      CHECK(ex.query.relations.size() == complexity);
      // Selections target referenced relations only, at most one per column.
      std::set<std::string> cols;
      for (const auto& sel : ex.query.selections) {
        CHECK(ex.query.references(sel.column.relation));
        CHECK(cols.insert(sel.column.str()).second);
      }
    }
  }
}

TEST_CASE("generation rejects unsatisfiable complexities") {
  Database db = chain_db(10, 10, 10, 5);
  CHECK_THROWS_AS(generate_workload(db, 0, 1, 1), Error);
  CHECK_THROWS_AS(generate_workload(db, 4, 1, 1), Error);
}

TEST_CASE("two-relation queries admit both left-deep orders") {
  Database db = chain_db(30, 20, 10, 6);
  Query q;
  q.relations = {"A", "B"};
  q.join_predicates = {db.schema.join_edges[0]};
  std::set<std::string> starts;
  for (uint64_t seed = 0; seed < 20; ++seed) {
    const JoinSequence seq = to_sequence(q, seed);
    REQUIRE(seq.steps.size() == 2);
    CHECK(seq.steps[1].join.has_value());
    starts.insert(seq.steps[0].relation);
    CHECK(to_sequence(q, seed).steps[0].relation == seq.steps[0].relation);  // deterministic
  }
  CHECK(starts == std::set<std::string>{"A", "B"});
}

TEST_CASE("chain sequences carry exactly one connecting predicate per step") {
  Database db = chain_db(30, 20, 10, 7);
  Query q;
  q.relations = {"A", "B", "C"};
  q.join_predicates = db.schema.join_edges;
  for (uint64_t seed = 0; seed < 10; ++seed) {
    const JoinSequence seq = to_sequence(q, seed);
    REQUIRE(seq.steps.size() == 3);
    for (size_t t = 1; t < seq.steps.size(); ++t) CHECK(seq.steps[t].join.has_value());
    CHECK_FALSE(seq.steps[0].join.has_value());
  }
}

TEST_CASE("labeling a full scan gives selectivity one") {
  Database db = handmade_chain_db();
  LabeledExample ex;
  ex.query.relations = {"C"};
  ex.sequence.steps = {SequenceStep{"C", {}, {}}};
  std::vector<LabeledExample> batch = {ex};
  label(db, batch, false);
  CHECK(batch[0].cardinality == 4);
  CHECK(batch[0].selectivity == doctest::Approx(1.0));
}

TEST_CASE("labeling an FK join matches the forced cardinality") {
  Database db = chain_db(100, 50, 25, 8);
  LabeledExample ex;
  ex.query.relations = {"A", "B"};
  ex.query.join_predicates = {db.schema.join_edges[0]};
  ex.sequence = to_sequence(ex.query, 1);
  std::vector<LabeledExample> batch = {ex};
  label(db, batch, true);
  CHECK(batch[0].cardinality == 100);
  CHECK(batch[0].selectivity == doctest::Approx(100.0 / (100.0 * 50.0)));
  REQUIRE(batch[0].prefix_selectivities.size() == 2);
  CHECK(batch[0].prefix_selectivities.back() == doctest::Approx(batch[0].selectivity));
}

TEST_CASE("labels agree with the naive oracle") {
  Database db = chain_db(40, 30, 20, 9);
  auto workload = generate_workload(db, 2, 20, 10);
  label(db, workload, true, 4);
  for (const auto& ex : workload) {
    const double denominator = db.cartesian_rows(ex.query.relations);
    CHECK(ex.selectivity ==
          doctest::Approx(static_cast<double>(cardinality_naive(db, ex.query)) / denominator));
    CHECK(ex.selectivity >= 0.0);
    CHECK(ex.selectivity <= 1.0);
    REQUIRE(ex.prefix_selectivities.size() == ex.sequence.steps.size());
  }
}

TEST_CASE("labeling with and without prefixes agrees on the final label") {
  Database db = chain_db(40, 30, 20, 10);
  auto with = generate_workload(db, 3, 10, 11);
  auto without = with;
  label(db, with, true, 2);
  label(db, without, false, 3);
  for (size_t i = 0; i < with.size(); ++i) {
    CHECK(with[i].cardinality == without[i].cardinality);
    CHECK(with[i].selectivity == without[i].selectivity);
    CHECK(without[i].prefix_selectivities.empty());
  }
}

TEST_CASE("split keeps sizes, disjointness, and determinism") {
  Database db = chain_db(30, 20, 10, 11);
  auto workload = generate_workload(db, 2, 100, 12);
  for (size_t i = 0; i < workload.size(); ++i) workload[i].cardinality = static_cast<int64_t>(i);

  SUBCASE("test_n = 0 keeps everything in train") {
    const auto [train, test] = split_workload(workload, 0, 1);
    CHECK(test.empty());
    CHECK(train.size() == 100);
  }
  SUBCASE("test_n = size is rejected") {
    std::vector<LabeledExample> ten(workload.begin(), workload.begin() + 10);
    CHECK_THROWS_AS(split_workload(ten, 10, 1), Error);
  }
  SUBCASE("proper split partitions the workload") {
    const auto [train, test] = split_workload(workload, 10, 2);
    CHECK(train.size() == 90);
    CHECK(test.size() == 10);
    std::set<int64_t> ids;
    for (const auto& ex : train) ids.insert(ex.cardinality);
    for (const auto& ex : test) ids.insert(ex.cardinality);
    CHECK(ids.size() == 100);  // no overlap, nothing lost
    const auto [train2, test2] = split_workload(workload, 10, 2);
    CHECK(workload_to_jsonl(test2) == workload_to_jsonl(test));
  }
}

TEST_CASE("remove_selection_values partitions by held-out thresholds") {
  Database db = chain_db(2000, 100, 50, 13);
  const ColumnRef column{"B", "b1"};  // uniform(1, 20): full domain at 100 rows
  REQUIRE(active_domain(db, column).size() == 20);
  auto workload = generate_workload(db, 2, 400, 14);

  SUBCASE("fraction 0 holds nothing out") {
    const auto [kept, held] = remove_selection_values(workload, db, column, 0.0, 1);
    CHECK(held.empty());
    CHECK(kept.size() == workload.size());
  }
  SUBCASE("fraction 1 holds out every query predicated on the column") {
    const auto [kept, held] = remove_selection_values(workload, db, column, 1.0, 1);
    size_t predicated = 0;
    for (const auto& ex : workload) {
      if (!ex.query.selections_on("B").empty()) {
        for (const auto& sel : ex.query.selections_on("B")) {
          if (sel.column == column) ++predicated;
        }
      }
    }
    CHECK(held.size() == predicated);
    for (const auto& ex : kept) {
      for (const auto& sel : ex.query.selections) CHECK_FALSE(sel.column == column);
    }
  }
  SUBCASE("fraction 0.1 of a 20-value domain picks exactly two values") {
    const auto [kept, held] = remove_selection_values(workload, db, column, 0.1, 2);
    CHECK(kept.size() + held.size() == workload.size());
    std::set<int64_t> held_values;
    for (const auto& ex : held) {
      for (const auto& sel : ex.query.selections) {
        if (sel.column == column) held_values.insert(sel.threshold);
      }
    }
    CHECK(held_values.size() <= 2);
    CHECK(!held_values.empty());  // 400 queries cover the domain w.h.p.
    // Oracle: an independent scan with the recovered value set produces the
    // same partition.
    size_t scanned_held = 0;
    for (const auto& ex : workload) {
      for (const auto& sel : ex.query.selections) {
        if (sel.column == column && held_values.count(sel.threshold) > 0) {
          ++scanned_held;
          break;
        }
      }
    }
    CHECK(scanned_held == held.size());
  }
}

TEST_CASE("remove_join partitions by exact relation-set equality") {
  Database db = chain_db(30, 20, 10, 15);
  auto workload = generate_workload(db, 2, 100, 16);

  SUBCASE("absent set holds nothing out") {
    const auto [kept, held] = remove_join(workload, {"A", "C"});
    CHECK(held.empty());
    CHECK(kept.size() == workload.size());
  }
  SUBCASE("mixed batch matches a linear-scan oracle") {
    const auto [kept, held] = remove_join(workload, {"A", "B"});
    size_t expected = 0;
    for (const auto& ex : workload) {
      const std::set<std::string> rels(ex.query.relations.begin(), ex.query.relations.end());
      if (rels == std::set<std::string>{"A", "B"}) ++expected;
    }
    CHECK(held.size() == expected);
    CHECK(kept.size() + held.size() == workload.size());
    for (const auto& ex : held) {
      CHECK(std::set<std::string>(ex.query.relations.begin(), ex.query.relations.end()) ==
            std::set<std::string>{"A", "B"});
    }
  }
  SUBCASE("superset query set is rejected only when empty") {
    CHECK_THROWS_AS(remove_join(workload, {}), Error);
  }
}

TEST_CASE("workloads round-trip through JSON lines") {
  Database db = chain_db(40, 30, 20, 17);
  auto workload = generate_workload(db, 3, 25, 18);

  SUBCASE("unlabeled") {
    const std::string text = workload_to_jsonl(workload);
    const auto parsed = workload_from_jsonl_text(text, db.schema);
    CHECK(workload_to_jsonl(parsed) == text);
    CHECK_FALSE(parsed.empty());
    CHECK_FALSE(parsed[0].labeled());
  }
  SUBCASE("labeled, prefixes included") {
    label(db, workload, true, 2);
    const std::string text = workload_to_jsonl(workload);
    const auto parsed = workload_from_jsonl_text(text, db.schema);
    CHECK(workload_to_jsonl(parsed) == text);
    REQUIRE(parsed.size() == workload.size());
    for (size_t i = 0; i < parsed.size(); ++i) {
      CHECK(parsed[i].cardinality == workload[i].cardinality);
      CHECK(parsed[i].prefix_selectivities == workload[i].prefix_selectivities);
      REQUIRE(parsed[i].sequence.steps.size() == workload[i].sequence.steps.size());
      for (size_t t = 0; t < parsed[i].sequence.steps.size(); ++t) {
        CHECK(parsed[i].sequence.steps[t].relation == workload[i].sequence.steps[t].relation);
      }
    }
  }
  SUBCASE("malformed lines are parse errors") {
    CHECK_THROWS_AS(workload_from_jsonl_text("{not json}\n", db.schema), Error);
    CHECK_THROWS_AS(workload_from_jsonl_text("{\"relations\": [\"A\"]}\n", db.schema), Error);
  }
}
