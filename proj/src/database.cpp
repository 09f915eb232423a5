#include "cardlab/database.hpp"

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <set>
#include <unordered_set>

namespace cardlab {

const std::vector<int64_t>& Relation::column(const std::string& name) const {
  const int idx = column_index(name);
  if (idx < 0) throw_data("E_DATA", "unknown column '" + schema.name + "." + name + "'");
  return columns[static_cast<size_t>(idx)];
}

int Relation::column_index(const std::string& name) const {
  for (size_t i = 0; i < schema.columns.size(); ++i) {
    if (schema.columns[i].name == name) return static_cast<int>(i);
  }
  return -1;
}

const Relation& Database::relation(const std::string& name) const {
  const int idx = schema.relation_index(name);
  if (idx < 0) throw_data("E_DATA", "unknown relation '" + name + "'");
  return relations[static_cast<size_t>(idx)];
}

const std::vector<int64_t>& Database::column(const ColumnRef& ref) const {
  return relation(ref.relation).column(ref.column);
}

double Database::cartesian_rows(const std::vector<std::string>& relation_names) const {
  double product = 1.0;
  for (const auto& name : relation_names) {
    product *= static_cast<double>(relation(name).row_count);
  }
  return product;
}

namespace {

// Inverse-CDF sampler over the exact normalized zipf pmf.
class ZipfSampler {
 public:
  ZipfSampler(int64_t domain_size, double z) {
    cdf_.resize(static_cast<size_t>(domain_size));
    double acc = 0.0;
    for (int64_t v = 1; v <= domain_size; ++v) {
      acc += 1.0 / std::pow(static_cast<double>(v), z);
      cdf_[static_cast<size_t>(v - 1)] = acc;
    }
    for (auto& c : cdf_) c /= acc;
    cdf_.back() = 1.0;
  }

  int64_t draw(Rng& rng) const {
    const double u = rng.next_double();
    const auto it = std::lower_bound(cdf_.begin(), cdf_.end(), u);
    return static_cast<int64_t>(it - cdf_.begin()) + 1;
  }

 private:
  std::vector<double> cdf_;
};

std::vector<int64_t> generate_column(const Generator& gen, size_t rows, Rng& rng) {
  std::vector<int64_t> values(rows);
  switch (gen.kind) {
    case GeneratorKind::sequential:
      for (size_t i = 0; i < rows; ++i) values[i] = static_cast<int64_t>(i) + 1;
      break;
    case GeneratorKind::uniform:
      for (size_t i = 0; i < rows; ++i) values[i] = rng.next_int(gen.lo, gen.hi);
      break;
    case GeneratorKind::zipf: {
      ZipfSampler sampler(gen.domain_size, gen.z);
      for (size_t i = 0; i < rows; ++i) values[i] = sampler.draw(rng);
      break;
    }
  }
  return values;
}

}  // namespace

Database generate_synthetic(const DatabaseSchema& schema,
                            const std::map<std::string, size_t>& row_counts, uint64_t seed) {
  for (const auto& [name, rows] : row_counts) {
    if (schema.find_relation(name) == nullptr) {
      throw_data("E_DATA", "row_counts references unknown relation '" + name + "'");
    }
    if (rows == 0) throw_data("E_DATA", "row count for '" + name + "' must be positive");
  }

  Database db;
  db.schema = schema;
  db.relations.resize(schema.relations.size());

  // Primary keys first so FK columns can map ranks onto existing PK values.
  for (size_t r = 0; r < schema.relations.size(); ++r) {
    const RelationSchema& rel = schema.relations[r];
    const auto rows_it = row_counts.find(rel.name);
    if (rows_it == row_counts.end()) {
      throw_data("E_DATA", "missing row count for relation '" + rel.name + "'");
    }
    Relation& out = db.relations[r];
    out.schema = rel;
    out.row_count = rows_it->second;
    out.columns.assign(rel.columns.size(), {});
    for (size_t c = 0; c < rel.columns.size(); ++c) {
      const ColumnDef& col = rel.columns[c];
      if (col.kind != ColumnKind::primary_key) continue;
      if (!col.generator.has_value() || col.generator->kind != GeneratorKind::sequential) {
        throw_data("E_DATA", "primary key " + rel.name + "." + col.name +
                                 " must use the sequential generator");
      }
      Rng rng(derive_seed(seed, rel.name + "." + col.name));
      out.columns[c] = generate_column(*col.generator, out.row_count, rng);
    }
  }

  for (size_t r = 0; r < schema.relations.size(); ++r) {
    const RelationSchema& rel = schema.relations[r];
    Relation& out = db.relations[r];
    for (size_t c = 0; c < rel.columns.size(); ++c) {
      const ColumnDef& col = rel.columns[c];
      if (col.kind == ColumnKind::primary_key) continue;
      if (!col.generator.has_value()) {
        throw_data("E_DATA", "column " + rel.name + "." + col.name + " has no generator");
      }
      Rng rng(derive_seed(seed, rel.name + "." + col.name));
      if (col.kind == ColumnKind::foreign_key) {
        const Relation& target = db.relation(col.target_relation);
        if (target.row_count == 0) {
          throw_data("E_DATA", "FK target relation '" + col.target_relation + "' is empty");
        }
        const auto& pk_values = target.column(col.target_column);
        // The generator picks a target row rank; the rank domain is capped at
        // the target's row count so containment holds for any declared size.
        Generator rank_gen = *col.generator;
        const int64_t cap = static_cast<int64_t>(target.row_count);
        if (rank_gen.kind == GeneratorKind::zipf) {
          rank_gen.domain_size = std::min(rank_gen.domain_size, cap);
        } else if (rank_gen.kind == GeneratorKind::uniform) {
          rank_gen.lo = 1;
          rank_gen.hi = std::min(std::max<int64_t>(rank_gen.hi, 1), cap);
        } else {
          throw_data("E_DATA", "FK column " + rel.name + "." + col.name +
                                   " must use a uniform or zipf generator");
        }
        std::vector<int64_t> ranks = generate_column(rank_gen, out.row_count, rng);
        out.columns[c].resize(out.row_count);
        for (size_t i = 0; i < out.row_count; ++i) {
          out.columns[c][i] = pk_values[static_cast<size_t>(ranks[i] - 1)];
        }
      } else {
        out.columns[c] = generate_column(*col.generator, out.row_count, rng);
      }
    }
  }

  check_integrity(db);
  return db;
}

namespace {

int64_t parse_cell(const std::string& cell, size_t row, size_t col) {
  int64_t value = 0;
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  const auto result = std::from_chars(first, last, value);
  if (result.ec != std::errc() || result.ptr != last) {
    throw_data("E_PARSE", "cannot parse integer at row " + std::to_string(row) + ", column " +
                              std::to_string(col) + ": '" + cell + "'");
  }
  return value;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  size_t start = 0;
  for (;;) {
    const size_t comma = line.find(',', start);
    if (comma == std::string::npos) {
      cells.push_back(line.substr(start));
      return cells;
    }
    cells.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

}  // namespace

Relation load_csv(const std::string& path, const RelationSchema& schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw_data("E_IO", "cannot open CSV file '" + path + "'");

  std::string line;
  if (!std::getline(in, line)) throw_data("E_PARSE", "CSV file '" + path + "' is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();

  const std::vector<std::string> header = split_csv_line(line);
  if (header.size() != schema.columns.size()) {
    throw_data("E_PARSE", "CSV header of '" + path + "' has " + std::to_string(header.size()) +
                              " columns, schema expects " + std::to_string(schema.columns.size()));
  }
  for (size_t c = 0; c < header.size(); ++c) {
    if (header[c] != schema.columns[c].name) {
      throw_data("E_PARSE", "CSV header mismatch at column " + std::to_string(c + 1) + ": got '" +
                                header[c] + "', expected '" + schema.columns[c].name + "'");
    }
  }

  Relation rel;
  rel.schema = schema;
  rel.columns.assign(schema.columns.size(), {});

  size_t row = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    ++row;
    const std::vector<std::string> cells = split_csv_line(line);
    if (cells.size() != schema.columns.size()) {
      throw_data("E_PARSE", "row " + std::to_string(row) + " of '" + path + "' has " +
                                std::to_string(cells.size()) + " cells");
    }
    for (size_t c = 0; c < cells.size(); ++c) {
      rel.columns[c].push_back(parse_cell(cells[c], row, c + 1));
    }
  }
  rel.row_count = row;

  const int pk = rel.schema.primary_key_index();
  if (pk >= 0) {
    std::unordered_set<int64_t> seen;
    for (int64_t v : rel.columns[static_cast<size_t>(pk)]) {
      if (!seen.insert(v).second) {
        throw_data("E_DATA", "duplicate primary key value " + std::to_string(v) + " in '" +
                                 schema.name + "." + schema.columns[static_cast<size_t>(pk)].name +
                                 "'");
      }
    }
  }
  return rel;
}

void save_csv(const Relation& relation, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw_data("E_IO", "cannot write CSV file '" + path + "'");
  for (size_t c = 0; c < relation.schema.columns.size(); ++c) {
    if (c > 0) out << ',';
    out << relation.schema.columns[c].name;
  }
  out << '\n';
  for (size_t i = 0; i < relation.row_count; ++i) {
    for (size_t c = 0; c < relation.columns.size(); ++c) {
      if (c > 0) out << ',';
      out << relation.columns[c][i];
    }
    out << '\n';
  }
}

Database load_database(const std::string& dir) {
  namespace fs = std::filesystem;
  const fs::path base(dir);
  Database db;
  db.schema = load_schema((base / "schema.json").string());
  db.relations.reserve(db.schema.relations.size());
  for (const auto& rel_schema : db.schema.relations) {
    db.relations.push_back(load_csv((base / (rel_schema.name + ".csv")).string(), rel_schema));
  }
  check_integrity(db);
  return db;
}

void save_database(const Database& db, const std::string& dir) {
  namespace fs = std::filesystem;
  const fs::path base(dir);
  fs::create_directories(base);
  save_schema(db.schema, (base / "schema.json").string());
  for (const auto& rel : db.relations) {
    save_csv(rel, (base / (rel.schema.name + ".csv")).string());
  }
}

std::vector<int64_t> active_domain(const Database& db, const ColumnRef& column) {
  std::vector<int64_t> values = db.column(column);
  std::sort(values.begin(), values.end());
  values.erase(std::unique(values.begin(), values.end()), values.end());
  return values;
}

void check_integrity(const Database& db) {
  for (const auto& rel : db.relations) {
    for (const auto& col : rel.columns) {
      if (col.size() != rel.row_count) {
        throw_data("E_DATA", "column length mismatch in relation '" + rel.schema.name + "'");
      }
    }
    const int pk = rel.schema.primary_key_index();
    if (pk >= 0) {
      std::unordered_set<int64_t> seen;
      for (int64_t v : rel.columns[static_cast<size_t>(pk)]) {
        if (!seen.insert(v).second) {
          throw_data("E_DATA", "duplicate primary key value " + std::to_string(v) +
                                   " in relation '" + rel.schema.name + "'");
        }
      }
    }
  }
  for (const auto& edge : db.schema.join_edges) {
    const auto& pk_values = db.column(edge.pk);
    const std::unordered_set<int64_t> pk_set(pk_values.begin(), pk_values.end());
    for (int64_t v : db.column(edge.fk)) {
      if (pk_set.count(v) == 0) {
        throw_data("E_DATA", "dangling foreign key value " + std::to_string(v) + " in " +
                                 edge.fk.str() + " (target " + edge.pk.str() + ")");
      }
    }
  }
}

}  // namespace cardlab
