// database.hpp — columnar in-memory relations, synthetic generation, CSV ingest.
#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "cardlab/schema.hpp"

namespace cardlab {

/// Dense columnar storage; all values are 64-bit signed integers.
struct Relation {
  RelationSchema schema;
  std::vector<std::vector<int64_t>> columns;  // aligned with schema.columns
  size_t row_count = 0;

  const std::vector<int64_t>& column(const std::string& name) const;
  int column_index(const std::string& name) const;
};

/// Immutable after construction; safe for concurrent reads.
struct Database {
  DatabaseSchema schema;
  std::vector<Relation> relations;  // aligned with schema.relations

  const Relation& relation(const std::string& name) const;
  const std::vector<int64_t>& column(const ColumnRef& ref) const;
  double cartesian_rows(const std::vector<std::string>& relation_names) const;
};

/// Deterministic synthetic database. Primary keys must declare the sequential
/// generator; foreign keys draw a row rank of the target relation through
/// their generator (zipf ranks model skewed fan-in) and store the PK value at
/// that rank, so referential integrity holds by construction.
Database generate_synthetic(const DatabaseSchema& schema,
                            const std::map<std::string, size_t>& row_counts, uint64_t seed);

/// CSV with a header row matching the schema columns, integer cells, LF endings.
Relation load_csv(const std::string& path, const RelationSchema& schema);
void save_csv(const Relation& relation, const std::string& path);

/// Directory layout: schema.json plus one <relation>.csv per relation.
Database load_database(const std::string& dir);
void save_database(const Database& db, const std::string& dir);

/// Sorted distinct values present in the stored column.
std::vector<int64_t> active_domain(const Database& db, const ColumnRef& column);

/// Checks PK distinctness and FK containment; throws E_DATA on violation.
void check_integrity(const Database& db);

}  // namespace cardlab
