#include "cardlab/schema.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace cardlab {

using nlohmann::json;

const RelationSchema* DatabaseSchema::find_relation(const std::string& name) const {
  for (const auto& rel : relations) {
    if (rel.name == name) return &rel;
  }
  return nullptr;
}

int DatabaseSchema::relation_index(const std::string& name) const {
  for (size_t i = 0; i < relations.size(); ++i) {
    if (relations[i].name == name) return static_cast<int>(i);
  }
  return -1;
}

void DatabaseSchema::finalize() {
  if (relations.empty()) throw_data("E_SCHEMA", "schema has no relations");

  std::set<std::string> relation_names;
  for (const auto& rel : relations) {
    if (!relation_names.insert(rel.name).second) {
      throw_data("E_SCHEMA", "duplicate relation name '" + rel.name + "'");
    }
    std::set<std::string> column_names;
    int pk_count = 0;
    for (const auto& col : rel.columns) {
      if (!column_names.insert(col.name).second) {
        throw_data("E_SCHEMA", "duplicate column '" + col.name + "' in relation '" + rel.name + "'");
      }
      if (col.kind == ColumnKind::primary_key) ++pk_count;
      if (col.generator.has_value()) {
        const Generator& gen = *col.generator;
        if (gen.kind == GeneratorKind::zipf && (gen.domain_size < 1 || gen.z < 0.0)) {
          throw_data("E_SCHEMA", "zipf generator on " + rel.name + "." + col.name +
                                     " requires domain_size >= 1 and z >= 0");
        }
        if (gen.kind == GeneratorKind::uniform && gen.lo > gen.hi) {
          throw_data("E_SCHEMA", "uniform generator on " + rel.name + "." + col.name +
                                     " requires lo <= hi");
        }
      }
    }
    if (pk_count > 1) {
      throw_data("E_SCHEMA", "relation '" + rel.name + "' declares more than one primary key");
    }
  }

  // Join edges come exactly from the FK declarations, in declaration order.
  join_edges.clear();
  for (const auto& rel : relations) {
    for (const auto& col : rel.columns) {
      if (col.kind != ColumnKind::foreign_key) continue;
      const RelationSchema* target = find_relation(col.target_relation);
      if (target == nullptr) {
        throw_data("E_SCHEMA", "foreign key " + rel.name + "." + col.name +
                                   " targets unknown relation '" + col.target_relation + "'");
      }
      const ColumnDef* target_col = target->find_column(col.target_column);
      if (target_col == nullptr || target_col->kind != ColumnKind::primary_key) {
        throw_data("E_SCHEMA", "foreign key " + rel.name + "." + col.name +
                                   " must target a primary key, got '" + col.target_relation + "." +
                                   col.target_column + "'");
      }
      join_edges.push_back(JoinEdge{ColumnRef{rel.name, col.name},
                                    ColumnRef{col.target_relation, col.target_column}});
    }
  }

  // Join graph (relations as nodes) must be connected.
  if (relations.size() > 1) {
    std::set<std::string> reached{relations.front().name};
    bool grew = true;
    while (grew) {
      grew = false;
      for (const auto& edge : join_edges) {
        const bool has_fk = reached.count(edge.fk.relation) > 0;
        const bool has_pk = reached.count(edge.pk.relation) > 0;
        if (has_fk != has_pk) {
          reached.insert(has_fk ? edge.pk.relation : edge.fk.relation);
          grew = true;
        }
      }
    }
    if (reached.size() != relations.size()) {
      throw_data("E_SCHEMA", "join graph is not connected");
    }
  }

  for (const auto& ref : selection_columns) {
    const RelationSchema* rel = find_relation(ref.relation);
    if (rel == nullptr) {
      throw_data("E_SCHEMA", "selection column references unknown relation '" + ref.relation + "'");
    }
    const ColumnDef* col = rel->find_column(ref.column);
    if (col == nullptr || col->kind != ColumnKind::attribute) {
      throw_data("E_SCHEMA",
                 "selection column " + ref.str() + " must be a declared attribute column");
    }
  }
}

std::string to_string(ColumnKind kind) {
  switch (kind) {
    case ColumnKind::primary_key: return "primary_key";
    case ColumnKind::foreign_key: return "foreign_key";
    case ColumnKind::attribute: return "attribute";
  }
  return "attribute";
}

std::string to_string(GeneratorKind kind) {
  switch (kind) {
    case GeneratorKind::sequential: return "sequential";
    case GeneratorKind::uniform: return "uniform";
    case GeneratorKind::zipf: return "zipf";
  }
  return "sequential";
}

ColumnKind column_kind_from_string(const std::string& text) {
  if (text == "primary_key") return ColumnKind::primary_key;
  if (text == "foreign_key") return ColumnKind::foreign_key;
  if (text == "attribute") return ColumnKind::attribute;
  throw_data("E_SCHEMA", "unknown column kind '" + text + "'");
}

GeneratorKind generator_kind_from_string(const std::string& text) {
  if (text == "sequential") return GeneratorKind::sequential;
  if (text == "uniform") return GeneratorKind::uniform;
  if (text == "zipf") return GeneratorKind::zipf;
  throw_data("E_SCHEMA", "unknown generator kind '" + text + "'");
}

DatabaseSchema schema_from_json_text(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw_data("E_PARSE", std::string("schema JSON parse failure: ") + e.what());
  }

  DatabaseSchema schema;
  try {
    for (const auto& rel_doc : doc.at("relations")) {
      RelationSchema rel;
      rel.name = rel_doc.at("name").get<std::string>();
      for (const auto& col_doc : rel_doc.at("columns")) {
        ColumnDef col;
        col.name = col_doc.at("name").get<std::string>();
        col.kind = column_kind_from_string(col_doc.at("kind").get<std::string>());
        if (col.kind == ColumnKind::foreign_key) {
          const ColumnRef target = ColumnRef::parse(col_doc.at("target").get<std::string>());
          col.target_relation = target.relation;
          col.target_column = target.column;
        }
        if (col_doc.contains("generator")) {
          const auto& gen_doc = col_doc.at("generator");
          Generator gen;
          gen.kind = generator_kind_from_string(gen_doc.at("kind").get<std::string>());
          if (gen.kind == GeneratorKind::uniform) {
            gen.lo = gen_doc.at("lo").get<int64_t>();
            gen.hi = gen_doc.at("hi").get<int64_t>();
          } else if (gen.kind == GeneratorKind::zipf) {
            gen.domain_size = gen_doc.at("domain_size").get<int64_t>();
            gen.z = gen_doc.at("z").get<double>();
          }
          col.generator = gen;
        }
        rel.columns.push_back(std::move(col));
      }
      schema.relations.push_back(std::move(rel));
    }
    if (doc.contains("selection_columns")) {
      for (const auto& ref_doc : doc.at("selection_columns")) {
        schema.selection_columns.push_back(ColumnRef::parse(ref_doc.get<std::string>()));
      }
    }
  } catch (const json::exception& e) {
    throw_data("E_PARSE", std::string("schema JSON shape error: ") + e.what());
  }

  schema.finalize();
  return schema;
}

std::string schema_to_json_text(const DatabaseSchema& schema) {
  json doc;
  doc["relations"] = json::array();
  for (const auto& rel : schema.relations) {
    json rel_doc;
    rel_doc["name"] = rel.name;
    rel_doc["columns"] = json::array();
    for (const auto& col : rel.columns) {
      json col_doc;
      col_doc["name"] = col.name;
      col_doc["kind"] = to_string(col.kind);
      if (col.kind == ColumnKind::foreign_key) {
        col_doc["target"] = col.target_relation + "." + col.target_column;
      }
      if (col.generator.has_value()) {
        json gen_doc;
        gen_doc["kind"] = to_string(col.generator->kind);
        if (col.generator->kind == GeneratorKind::uniform) {
          gen_doc["lo"] = col.generator->lo;
          gen_doc["hi"] = col.generator->hi;
        } else if (col.generator->kind == GeneratorKind::zipf) {
          gen_doc["domain_size"] = col.generator->domain_size;
          gen_doc["z"] = col.generator->z;
        }
        col_doc["generator"] = gen_doc;
      }
      rel_doc["columns"].push_back(col_doc);
    }
    doc["relations"].push_back(rel_doc);
  }
  doc["selection_columns"] = json::array();
  for (const auto& ref : schema.selection_columns) doc["selection_columns"].push_back(ref.str());
  return doc.dump(2) + "\n";
}

DatabaseSchema load_schema(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw_data("E_IO", "cannot open schema file '" + path + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return schema_from_json_text(buffer.str());
}

void save_schema(const DatabaseSchema& schema, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw_data("E_IO", "cannot write schema file '" + path + "'");
  out << schema_to_json_text(schema);
}

}  // namespace cardlab
