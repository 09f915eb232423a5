#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "cardlab/database.hpp"
#include "cardlab/query.hpp"

namespace cardlab {

/// Equi-depth histogram over one integer column. Bucket i spans values
/// [bounds[i], bounds[i+1]) except the last, which is inclusive on both ends.
struct EquiDepthHistogram {
  std::vector<int64_t> bounds;    // B+1 sorted bucket boundaries
  std::vector<int64_t> counts;    // B per-bucket tuple counts
  std::vector<int64_t> distinct;  // B per-bucket distinct-value counts
  int64_t total_rows = 0;
  int64_t total_distinct = 0;

  /// Fraction of rows with value <= threshold: full buckets below the
  /// threshold plus linear interpolation inside the straddling bucket.
  double estimate_selection(int64_t threshold) const;

  /// Stored scalars: bounds + counts + distinct + the two totals.
  size_t parameter_count() const {
    return bounds.size() + counts.size() + distinct.size() + 2;
  }
};

EquiDepthHistogram build_equi_depth(std::vector<int64_t> values, size_t bins);

/// Per-column histograms over every join-edge endpoint and every
/// selection-eligible column, plus base-relation row counts.
struct StatsCatalog {
  size_t bins = 0;
  std::map<std::string, EquiDepthHistogram> columns;  // keyed "relation.column"
  std::map<std::string, int64_t> row_counts;

  const EquiDepthHistogram& histogram(const ColumnRef& column) const;
  size_t parameter_count() const;
};

StatsCatalog build_stats(const Database& db, size_t bins);

/// Independence/uniformity estimate: product of base row counts, times
/// 1/max(V_fk, V_pk) per join predicate (V = total distinct values of the
/// join columns), times the histogram selectivity of each selection.
double estimate_query(const StatsCatalog& stats, const Query& q);

std::string stats_to_json_text(const StatsCatalog& stats);
StatsCatalog stats_from_json_text(const std::string& text);
StatsCatalog load_stats(const std::string& path);
void save_stats(const StatsCatalog& stats, const std::string& path);

}  // namespace cardlab
