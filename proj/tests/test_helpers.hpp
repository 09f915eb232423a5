#pragma once

#include <map>
#include <string>
#include <vector>

#include "cardlab/database.hpp"
#include "cardlab/schema.hpp"

namespace cardlab::testing {

/// Three-relation chain A -> B -> C with two attribute columns per relation,
/// used throughout the test suite.
inline DatabaseSchema chain_schema() {
  DatabaseSchema schema;
  RelationSchema a;
  a.name = "A";
  a.columns = {
      ColumnDef{"a1", ColumnKind::attribute, "", "", Generator::zipf(10, 1.0)},
      ColumnDef{"a2", ColumnKind::attribute, "", "", Generator::uniform(1, 50)},
      ColumnDef{"fk_b", ColumnKind::foreign_key, "B", "id", Generator::zipf(1000, 1.0)},
  };
  RelationSchema b;
  b.name = "B";
  b.columns = {
      ColumnDef{"id", ColumnKind::primary_key, "", "", Generator::sequential()},
      ColumnDef{"b1", ColumnKind::attribute, "", "", Generator::uniform(1, 20)},
      ColumnDef{"b2", ColumnKind::attribute, "", "", Generator::zipf(30, 0.5)},
      ColumnDef{"fk_c", ColumnKind::foreign_key, "C", "id", Generator::uniform(1, 1000)},
  };
  RelationSchema c;
  c.name = "C";
  c.columns = {
      ColumnDef{"id", ColumnKind::primary_key, "", "", Generator::sequential()},
      ColumnDef{"c1", ColumnKind::attribute, "", "", Generator::uniform(1, 100)},
      ColumnDef{"c2", ColumnKind::attribute, "", "", Generator::zipf(15, 2.0)},
  };
  schema.relations = {a, b, c};
  schema.selection_columns = {{"A", "a1"}, {"A", "a2"}, {"B", "b1"},
                              {"B", "b2"}, {"C", "c1"}, {"C", "c2"}};
  schema.finalize();
  return schema;
}

inline Database chain_db(size_t rows_a, size_t rows_b, size_t rows_c, uint64_t seed) {
  return generate_synthetic(chain_schema(), {{"A", rows_a}, {"B", rows_b}, {"C", rows_c}}, seed);
}

inline DatabaseSchema single_relation_schema(std::vector<ColumnDef> columns) {
  DatabaseSchema schema;
  schema.relations = {RelationSchema{"R", std::move(columns)}};
  schema.finalize();
  return schema;
}

/// Hand-built chain database with fully known contents: every attribute
/// column of relation X holds 1..|X| in row order, so percentiles and counts
/// can be read off directly. |A|=10, |B|=5, |C|=4.
inline Database handmade_chain_db() {
  Database db;
  db.schema = chain_schema();

  auto iota = [](size_t n) {
    std::vector<int64_t> v(n);
    for (size_t i = 0; i < n; ++i) v[i] = static_cast<int64_t>(i) + 1;
    return v;
  };

  Relation a;
  a.schema = db.schema.relations[0];
  a.row_count = 10;
  a.columns = {iota(10), iota(10), {1, 1, 2, 2, 3, 3, 4, 4, 5, 5}};
  Relation b;
  b.schema = db.schema.relations[1];
  b.row_count = 5;
  b.columns = {iota(5), iota(5), iota(5), {1, 2, 3, 4, 1}};
  Relation c;
  c.schema = db.schema.relations[2];
  c.row_count = 4;
  c.columns = {iota(4), iota(4), iota(4)};
  db.relations = {a, b, c};
  check_integrity(db);
  return db;
}

}  // namespace cardlab::testing
