// schema.hpp — relation/database schemas with a PK-FK join graph.
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "cardlab/common.hpp"

namespace cardlab {

enum class ColumnKind { primary_key, foreign_key, attribute };

enum class GeneratorKind { sequential, uniform, zipf };

/// Synthetic column generator. `uniform` draws from [lo, hi]; `zipf` draws
/// v in {1..domain_size} with probability proportional to 1/v^z.
struct Generator {
  GeneratorKind kind = GeneratorKind::sequential;
  int64_t lo = 0;
  int64_t hi = 0;
  int64_t domain_size = 1;
  double z = 0.0;

  static Generator sequential() { return Generator{GeneratorKind::sequential, 0, 0, 1, 0.0}; }
  static Generator uniform(int64_t lo, int64_t hi) {
    return Generator{GeneratorKind::uniform, lo, hi, 1, 0.0};
  }
  static Generator zipf(int64_t domain_size, double z) {
    return Generator{GeneratorKind::zipf, 0, 0, domain_size, z};
  }
};

struct ColumnDef {
  std::string name;
  ColumnKind kind = ColumnKind::attribute;
  // Set for foreign keys only: the referenced primary-key column.
  std::string target_relation;
  std::string target_column;
  // Present only for synthetic columns.
  std::optional<Generator> generator;
};

struct RelationSchema {
  std::string name;
  std::vector<ColumnDef> columns;

  const ColumnDef* find_column(const std::string& column_name) const {
    for (const auto& col : columns) {
      if (col.name == column_name) return &col;
    }
    return nullptr;
  }
  int primary_key_index() const {
    for (size_t i = 0; i < columns.size(); ++i) {
      if (columns[i].kind == ColumnKind::primary_key) return static_cast<int>(i);
    }
    return -1;
  }
};

/// A fully qualified column: relation.column.
struct ColumnRef {
  std::string relation;
  std::string column;

  bool operator==(const ColumnRef& other) const {
    return relation == other.relation && column == other.column;
  }
  bool operator<(const ColumnRef& other) const {
    if (relation != other.relation) return relation < other.relation;
    return column < other.column;
  }
  std::string str() const { return relation + "." + column; }

  static ColumnRef parse(const std::string& text) {
    const size_t dot = text.find('.');
    if (dot == std::string::npos || dot == 0 || dot + 1 == text.size()) {
      throw_data("E_SCHEMA", "expected relation.column, got '" + text + "'");
    }
    return ColumnRef{text.substr(0, dot), text.substr(dot + 1)};
  }
};

/// FK -> PK equi-join edge, derived from foreign-key declarations.
struct JoinEdge {
  ColumnRef fk;
  ColumnRef pk;

  bool operator==(const JoinEdge& other) const { return fk == other.fk && pk == other.pk; }
  std::string str() const { return fk.str() + "=" + pk.str(); }
};

struct DatabaseSchema {
  std::vector<RelationSchema> relations;
  std::vector<JoinEdge> join_edges;        // derived; schema declaration order
  std::vector<ColumnRef> selection_columns;

  const RelationSchema* find_relation(const std::string& name) const;
  int relation_index(const std::string& name) const;

  /// Rebuilds join_edges from foreign-key declarations and checks every
  /// structural invariant (unique names, FK targets, connectivity, eligible
  /// selection columns). Throws E_SCHEMA on violation.
  void finalize();
};

struct ColumnRefHash {
  size_t operator()(const ColumnRef& ref) const {
    return std::hash<std::string>()(ref.relation) * 1000003u ^ std::hash<std::string>()(ref.column);
  }
};

std::string to_string(ColumnKind kind);
std::string to_string(GeneratorKind kind);
ColumnKind column_kind_from_string(const std::string& text);
GeneratorKind generator_kind_from_string(const std::string& text);

/// JSON document form:
/// {"relations":[{"name","columns":[{"name","kind","target"?,"generator"?}]}],
///  "selection_columns":["rel.col", ...]}
DatabaseSchema schema_from_json_text(const std::string& text);
std::string schema_to_json_text(const DatabaseSchema& schema);
DatabaseSchema load_schema(const std::string& path);
void save_schema(const DatabaseSchema& schema, const std::string& path);

}  // namespace cardlab
