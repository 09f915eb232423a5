#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

#include "cardlab/database.hpp"
#include "cardlab/schema.hpp"
#include "test_helpers.hpp"

using namespace cardlab;
using testing::chain_schema;
using testing::single_relation_schema;

namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("sequential primary key generates 1..N") {
  auto schema = single_relation_schema({
      ColumnDef{"id", ColumnKind::primary_key, "", "", Generator::sequential()},
  });
  Database db = generate_synthetic(schema, {{"R", 5}}, 42);
  CHECK(db.relation("R").column("id") == std::vector<int64_t>{1, 2, 3, 4, 5});
}

TEST_CASE("zipf with z=0 is uniform within tolerance") {
  auto schema = single_relation_schema({
      ColumnDef{"v", ColumnKind::attribute, "", "", Generator::zipf(10, 0.0)},
  });
  Database db = generate_synthetic(schema, {{"R", 10000}}, 7);
  std::map<int64_t, size_t> counts;
  for (int64_t v : db.relation("R").column("v")) counts[v]++;
  CHECK(counts.size() == 10);
  for (const auto& [value, count] : counts) {
    const double freq = static_cast<double>(count) / 10000.0;
    CHECK(freq == doctest::Approx(0.1).epsilon(0.2));  // 0.1 +/- 0.02
    CHECK(value >= 1);
    CHECK(value <= 10);
  }
}

TEST_CASE("zipf frequency ratio matches the exact pmf ratio") {
  auto schema = single_relation_schema({
      ColumnDef{"v", ColumnKind::attribute, "", "", Generator::zipf(100, 1.0)},
  });
  Database db = generate_synthetic(schema, {{"R", 100000}}, 11);
  size_t ones = 0;
  size_t twos = 0;
  for (int64_t v : db.relation("R").column("v")) {
    if (v == 1) ++ones;
    if (v == 2) ++twos;
  }
  // Independent oracle: pmf(v) is proportional to 1/v^z, so the expected
  // frequency ratio of value 1 to value 2 at z=1 is (1/1)/(1/2).
  const double expected = (1.0 / std::pow(1.0, 1.0)) / (1.0 / std::pow(2.0, 1.0));
  const double observed = static_cast<double>(ones) / static_cast<double>(twos);
  CHECK(expected == doctest::Approx(2.0));
  CHECK(observed == doctest::Approx(expected).epsilon(0.05));  // 2.0 +/- 0.1
}

TEST_CASE("generation is deterministic in the seed") {
  auto schema = chain_schema();
  const std::map<std::string, size_t> rows = {{"A", 500}, {"B", 300}, {"C", 200}};
  Database first = generate_synthetic(schema, rows, 123);
  Database second = generate_synthetic(schema, rows, 123);
  Database other = generate_synthetic(schema, rows, 124);
  bool any_difference_to_other = false;
  for (size_t r = 0; r < first.relations.size(); ++r) {
    for (size_t c = 0; c < first.relations[r].columns.size(); ++c) {
      CHECK(first.relations[r].columns[c] == second.relations[r].columns[c]);
      if (first.relations[r].schema.columns[c].kind != ColumnKind::primary_key &&
          first.relations[r].columns[c] != other.relations[r].columns[c]) {
        any_difference_to_other = true;
      }
    }
  }
  CHECK(any_difference_to_other);
}

TEST_CASE("referential integrity holds after generation") {
  Database db = generate_synthetic(chain_schema(), {{"A", 800}, {"B", 90}, {"C", 40}}, 99);
  for (const auto& edge : db.schema.join_edges) {
    const auto& pk = db.column(edge.pk);
    const std::set<int64_t> pk_set(pk.begin(), pk.end());
    for (int64_t v : db.column(edge.fk)) {
      REQUIRE(pk_set.count(v) == 1);
    }
  }
}

TEST_CASE("generate_synthetic rejects bad inputs") {
  auto schema = chain_schema();
  CHECK_THROWS_AS(generate_synthetic(schema, {{"A", 10}, {"B", 10}, {"C", 10}, {"Z", 5}}, 1),
                  Error);
  CHECK_THROWS_AS(generate_synthetic(schema, {{"A", 10}, {"B", 10}}, 1), Error);
  CHECK_THROWS_AS(generate_synthetic(schema, {{"A", 0}, {"B", 10}, {"C", 10}}, 1), Error);
}

TEST_CASE("load_csv parses a tiny file") {
  const std::string path = temp_path("cardlab_tiny.csv");
  {
    std::ofstream out(path, std::ios::binary);
    out << "a\n1\n2\n";
  }
  RelationSchema schema{"R", {ColumnDef{"a", ColumnKind::attribute, "", "", {}}}};
  Relation rel = load_csv(path, schema);
  CHECK(rel.row_count == 2);
  CHECK(rel.column("a") == std::vector<int64_t>{1, 2});
  std::remove(path.c_str());
}

TEST_CASE("load_csv keeps header-only files as empty relations") {
  const std::string path = temp_path("cardlab_empty.csv");
  {
    std::ofstream out(path, std::ios::binary);
    out << "a,b\n";
  }
  RelationSchema schema{"R",
                        {ColumnDef{"a", ColumnKind::attribute, "", "", {}},
                         ColumnDef{"b", ColumnKind::attribute, "", "", {}}}};
  Relation rel = load_csv(path, schema);
  CHECK(rel.row_count == 0);
  CHECK(rel.column("a").empty());
  std::remove(path.c_str());
}

TEST_CASE("load_csv reports duplicate primary keys by value") {
  const std::string path = temp_path("cardlab_dup.csv");
  {
    std::ofstream out(path, std::ios::binary);
    out << "id\n1\n7\n7\n";
  }
  RelationSchema schema{"R", {ColumnDef{"id", ColumnKind::primary_key, "", "", {}}}};
  try {
    load_csv(path, schema);
    FAIL("expected duplicate-PK error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("7") != std::string::npos);
    CHECK(e.code() == "E_DATA");
  }
  std::remove(path.c_str());
}

TEST_CASE("load_csv reports parse failures with row and column") {
  const std::string path = temp_path("cardlab_bad.csv");
  {
    std::ofstream out(path, std::ios::binary);
    out << "a,b\n1,2\n3,oops\n";
  }
  RelationSchema schema{"R",
                        {ColumnDef{"a", ColumnKind::attribute, "", "", {}},
                         ColumnDef{"b", ColumnKind::attribute, "", "", {}}}};
  try {
    load_csv(path, schema);
    FAIL("expected parse error");
  } catch (const Error& e) {
    const std::string msg = e.what();
    CHECK(msg.find("row 2") != std::string::npos);
    CHECK(msg.find("column 2") != std::string::npos);
    CHECK(e.code() == "E_PARSE");
  }
  std::remove(path.c_str());
}

TEST_CASE("load_csv rejects header mismatches") {
  const std::string path = temp_path("cardlab_hdr.csv");
  {
    std::ofstream out(path, std::ios::binary);
    out << "x\n1\n";
  }
  RelationSchema schema{"R", {ColumnDef{"a", ColumnKind::attribute, "", "", {}}}};
  CHECK_THROWS_AS(load_csv(path, schema), Error);
  std::remove(path.c_str());
}

TEST_CASE("database round-trips through CSV and schema JSON") {
  Database db = generate_synthetic(chain_schema(), {{"A", 120}, {"B", 60}, {"C", 30}}, 5);
  const std::string dir = temp_path("cardlab_db_roundtrip");
  save_database(db, dir);
  Database loaded = load_database(dir);
  REQUIRE(loaded.relations.size() == db.relations.size());
  for (size_t r = 0; r < db.relations.size(); ++r) {
    CHECK(loaded.relations[r].schema.name == db.relations[r].schema.name);
    CHECK(loaded.relations[r].columns == db.relations[r].columns);
  }
  CHECK(loaded.schema.join_edges.size() == 2);
  std::filesystem::remove_all(dir);
}

TEST_CASE("load_database rejects dangling foreign keys") {
  Database db = generate_synthetic(chain_schema(), {{"A", 50}, {"B", 20}, {"C", 10}}, 5);
  const std::string dir = temp_path("cardlab_db_dangling");
  save_database(db, dir);
  {
    // Corrupt one FK value so it points outside B's key range.
    std::ofstream out(dir + "/A.csv", std::ios::binary);
    out << "a1,a2,fk_b\n1,1,9999\n";
  }
  CHECK_THROWS_AS(load_database(dir), Error);
  std::filesystem::remove_all(dir);
}

TEST_CASE("active_domain returns sorted distinct values") {
  Relation rel;
  rel.schema = RelationSchema{"R", {ColumnDef{"a", ColumnKind::attribute, "", "", {}}}};
  rel.columns = {{3, 1, 3, 2}};
  rel.row_count = 4;
  Database db;
  db.schema.relations = {rel.schema};
  db.schema.finalize();
  db.relations = {rel};
  CHECK(active_domain(db, {"R", "a"}) == std::vector<int64_t>{1, 2, 3});
}

TEST_CASE("active_domain of an empty relation is empty") {
  Database db;
  db.schema.relations = {RelationSchema{"R", {ColumnDef{"a", ColumnKind::attribute, "", "", {}}}}};
  db.schema.finalize();
  Relation rel;
  rel.schema = db.schema.relations[0];
  rel.columns = {{}};
  rel.row_count = 0;
  db.relations = {rel};
  CHECK(active_domain(db, {"R", "a"}).empty());
}

TEST_CASE("zipf active domain covers the whole declared domain at scale") {
  auto schema = single_relation_schema({
      ColumnDef{"v", ColumnKind::attribute, "", "", Generator::zipf(10, 1.0)},
  });
  Database db = generate_synthetic(schema, {{"R", 100000}}, 3);
  std::vector<int64_t> expected(10);
  for (int i = 0; i < 10; ++i) expected[static_cast<size_t>(i)] = i + 1;
  CHECK(active_domain(db, {"R", "v"}) == expected);
}

TEST_CASE("active_domain matches an independent scan") {
  Database db = generate_synthetic(chain_schema(), {{"A", 700}, {"B", 150}, {"C", 80}}, 17);
  for (const auto& col : db.schema.selection_columns) {
    std::set<int64_t> oracle;
    for (int64_t v : db.column(col)) oracle.insert(v);
    CHECK(active_domain(db, col) == std::vector<int64_t>(oracle.begin(), oracle.end()));
  }
}

TEST_CASE("schema JSON round-trips losslessly") {
  DatabaseSchema schema = chain_schema();
  const std::string text = schema_to_json_text(schema);
  DatabaseSchema parsed = schema_from_json_text(text);
  CHECK(schema_to_json_text(parsed) == text);
  CHECK(parsed.relations.size() == 3);
  CHECK(parsed.join_edges.size() == 2);
  CHECK(parsed.selection_columns.size() == 6);
  CHECK(parsed.relations[0].columns[2].target_relation == "B");
}

TEST_CASE("schema validation rejects structural mistakes") {
  SUBCASE("foreign key must target a primary key") {
    DatabaseSchema schema;
    schema.relations = {
        RelationSchema{"A", {ColumnDef{"x", ColumnKind::foreign_key, "B", "y", {}}}},
        RelationSchema{"B", {ColumnDef{"y", ColumnKind::attribute, "", "", {}}}}};
    CHECK_THROWS_AS(schema.finalize(), Error);
  }
  SUBCASE("join graph must be connected") {
    DatabaseSchema schema;
    schema.relations = {RelationSchema{"A", {ColumnDef{"x", ColumnKind::attribute, "", "", {}}}},
                        RelationSchema{"B", {ColumnDef{"y", ColumnKind::attribute, "", "", {}}}}};
    CHECK_THROWS_AS(schema.finalize(), Error);
  }
  SUBCASE("zipf parameters must be sane") {
    DatabaseSchema schema;
    schema.relations = {RelationSchema{
        "A", {ColumnDef{"x", ColumnKind::attribute, "", "", Generator::zipf(0, 1.0)}}}};
    CHECK_THROWS_AS(schema.finalize(), Error);
    schema.relations = {RelationSchema{
        "A", {ColumnDef{"x", ColumnKind::attribute, "", "", Generator::zipf(10, -0.5)}}}};
    CHECK_THROWS_AS(schema.finalize(), Error);
  }
  SUBCASE("selection columns must be declared attributes") {
    DatabaseSchema schema;
    schema.relations = {RelationSchema{
        "A",
        {ColumnDef{"id", ColumnKind::primary_key, "", "", Generator::sequential()},
         ColumnDef{"x", ColumnKind::attribute, "", "", Generator::uniform(1, 5)}}}};
    schema.selection_columns = {{"A", "id"}};
    CHECK_THROWS_AS(schema.finalize(), Error);
  }
  SUBCASE("duplicate relation names are rejected") {
    DatabaseSchema schema;
    schema.relations = {RelationSchema{"A", {ColumnDef{"x", ColumnKind::attribute, "", "", {}}}},
                        RelationSchema{"A", {ColumnDef{"y", ColumnKind::attribute, "", "", {}}}}};
    CHECK_THROWS_AS(schema.finalize(), Error);
  }
}
