#include "cardlab/histo.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace cardlab {

EquiDepthHistogram build_equi_depth(std::vector<int64_t> values, size_t bins) {
  if (bins < 1) throw_data("E_DATA", "histogram needs at least one bucket");
  EquiDepthHistogram hist;
  if (values.empty()) return hist;

  std::sort(values.begin(), values.end());
  const size_t n = values.size();
  hist.total_rows = static_cast<int64_t>(n);
  hist.total_distinct = 1;
  for (size_t i = 1; i < n; ++i) {
    if (values[i] != values[i - 1]) ++hist.total_distinct;
  }

  hist.bounds.resize(bins + 1);
  hist.counts.resize(bins);
  hist.distinct.resize(bins);
  for (size_t b = 0; b <= bins; ++b) {
    const size_t pos = b * n / bins;
    hist.bounds[b] = values[std::min(pos, n - 1)];
  }
  for (size_t b = 0; b < bins; ++b) {
    const size_t lo = b * n / bins;
    const size_t hi = (b + 1) * n / bins;
    hist.counts[b] = static_cast<int64_t>(hi - lo);
    int64_t d = 0;
    for (size_t i = lo; i < hi; ++i) {
      if (i == lo || values[i] != values[i - 1]) ++d;
    }
    hist.distinct[b] = d;
  }
  return hist;
}

double EquiDepthHistogram::estimate_selection(int64_t threshold) const {
  if (total_rows == 0) return 0.0;
  if (threshold < bounds.front()) return 0.0;
  if (threshold >= bounds.back()) return 1.0;

  const size_t buckets = counts.size();
  double covered = 0.0;
  for (size_t b = 0; b < buckets; ++b) {
    const int64_t lo = bounds[b];
    const int64_t hi = bounds[b + 1];
    const bool last = b + 1 == buckets;
    if (!last && threshold >= hi) {
      covered += static_cast<double>(counts[b]);
      continue;
    }
    if (threshold < lo) break;
    // Straddling bucket: uniform interpolation over its value span. The last
    // bucket includes its upper bound; earlier buckets end just below theirs.
    const int64_t upper = last ? hi : hi - 1;
    const double span = static_cast<double>(upper - lo + 1);
    const double part = static_cast<double>(threshold - lo + 1);
    covered += static_cast<double>(counts[b]) * std::min(1.0, part / span);
    break;
  }
  return std::clamp(covered / static_cast<double>(total_rows), 0.0, 1.0);
}

const EquiDepthHistogram& StatsCatalog::histogram(const ColumnRef& column) const {
  const auto it = columns.find(column.str());
  if (it == columns.end()) {
    throw_data("E_DATA", "no statistics for column " + column.str());
  }
  return it->second;
}

size_t StatsCatalog::parameter_count() const {
  size_t total = 0;
  for (const auto& [name, hist] : columns) total += hist.parameter_count();
  return total;
}

StatsCatalog build_stats(const Database& db, size_t bins) {
  if (bins < 1) throw_data("E_DATA", "bin count must be at least 1");
  StatsCatalog stats;
  stats.bins = bins;
  std::set<std::string> wanted;
  for (const auto& edge : db.schema.join_edges) {
    wanted.insert(edge.fk.str());
    wanted.insert(edge.pk.str());
  }
  for (const auto& col : db.schema.selection_columns) wanted.insert(col.str());
  for (const auto& key : wanted) {
    stats.columns[key] = build_equi_depth(db.column(ColumnRef::parse(key)), bins);
  }
  for (const auto& rel : db.relations) {
    stats.row_counts[rel.schema.name] = static_cast<int64_t>(rel.row_count);
  }
  return stats;
}

double estimate_query(const StatsCatalog& stats, const Query& q) {
  double estimate = 1.0;
  for (const auto& name : q.relations) {
    const auto it = stats.row_counts.find(name);
    if (it == stats.row_counts.end()) {
      throw_data("E_DATA", "no statistics for relation '" + name + "'");
    }
    estimate *= static_cast<double>(it->second);
  }
  for (const auto& edge : q.join_predicates) {
    const int64_t v_fk = stats.histogram(edge.fk).total_distinct;
    const int64_t v_pk = stats.histogram(edge.pk).total_distinct;
    const int64_t v = std::max(v_fk, v_pk);
    estimate *= v > 0 ? 1.0 / static_cast<double>(v) : 0.0;
  }
  for (const auto& sel : q.selections) {
    estimate *= stats.histogram(sel.column).estimate_selection(sel.threshold);
  }
  return estimate;
}

namespace {

using nlohmann::json;

json histogram_to_json(const EquiDepthHistogram& hist) {
  return json{{"bounds", hist.bounds},
              {"counts", hist.counts},
              {"distinct", hist.distinct},
              {"total_rows", hist.total_rows},
              {"total_distinct", hist.total_distinct}};
}

EquiDepthHistogram histogram_from_json(const json& doc) {
  EquiDepthHistogram hist;
  hist.bounds = doc.at("bounds").get<std::vector<int64_t>>();
  hist.counts = doc.at("counts").get<std::vector<int64_t>>();
  hist.distinct = doc.at("distinct").get<std::vector<int64_t>>();
  hist.total_rows = doc.at("total_rows").get<int64_t>();
  hist.total_distinct = doc.at("total_distinct").get<int64_t>();
  return hist;
}

}  // namespace

std::string stats_to_json_text(const StatsCatalog& stats) {
  json doc;
  doc["format_version"] = 1;
  doc["bins"] = stats.bins;
  doc["row_counts"] = stats.row_counts;
  json columns = json::object();
  for (const auto& [name, hist] : stats.columns) columns[name] = histogram_to_json(hist);
  doc["columns"] = columns;
  return doc.dump(2) + "\n";
}

StatsCatalog stats_from_json_text(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw_data("E_PARSE", std::string("malformed stats file: ") + e.what());
  }
  try {
    StatsCatalog stats;
    stats.bins = doc.at("bins").get<size_t>();
    stats.row_counts = doc.at("row_counts").get<std::map<std::string, int64_t>>();
    for (const auto& [name, hist_doc] : doc.at("columns").items()) {
      stats.columns[name] = histogram_from_json(hist_doc);
    }
    return stats;
  } catch (const json::exception& e) {
    throw_data("E_PARSE", std::string("malformed stats file: ") + e.what());
  }
}

StatsCatalog load_stats(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw_data("E_IO", "cannot open stats file '" + path + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return stats_from_json_text(buffer.str());
}

void save_stats(const StatsCatalog& stats, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw_data("E_IO", "cannot write stats file '" + path + "'");
  out << stats_to_json_text(stats);
}

}  // namespace cardlab
