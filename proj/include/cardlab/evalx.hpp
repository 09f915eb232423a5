#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cardlab/common.hpp"

namespace cardlab {

/// One evaluated query. Errors are measured in tuples (cardinality space).
/// relative_error = absolute_error / max(true_cardinality, 1); heavy
/// underestimates saturate at 1, overestimates may exceed 1.
struct ErrorRecord {
  size_t query_id = 0;
  int64_t true_cardinality = 0;
  int64_t estimate = 0;
  double absolute_error = 0.0;
  double relative_error = 0.0;
  std::string estimator;
  std::string complexity;  // optional workload tag
};

std::vector<ErrorRecord> compute_errors(const std::vector<int64_t>& truths,
                                        const std::vector<int64_t>& estimates,
                                        const std::string& estimator,
                                        const std::vector<std::string>& complexity = {});

/// Knee of the empirical error CDF: x = log10(1 + error) min-max normalized
/// to [0, 1], y = cumulative fraction; the knee is the error whose CDF point
/// lies farthest from the chord between the first and last points (ties take
/// the smaller error). With halve=true the returned threshold is k/2.
/// Requires at least 3 distinct error values.
double knee(const std::vector<double>& errors, bool halve = false);

struct CdfSplit {
  double knee = 0.0;
  bool halve_applied = false;
  std::vector<double> sorted_errors;
  std::vector<size_t> easy;  // record indices with error <= knee
  std::vector<size_t> hard;  // record indices with error > knee
};

CdfSplit split_easy_hard(const std::vector<ErrorRecord>& records, double k,
                         bool halve_applied = false);

/// Fraction of the subset with error <= the model's own knee.
double easy_fraction(const std::vector<double>& subset_errors, double model_knee);

struct TradeoffRow {
  std::string name;
  double p25_absolute_error = 0.0;
  double median_absolute_error = 0.0;
  double p75_absolute_error = 0.0;
  size_t parameter_count = 0;
  double train_seconds = 0.0;
};

TradeoffRow tradeoff_row(const std::string& name, const std::vector<ErrorRecord>& records,
                         size_t parameter_count, double train_seconds);

/// CSV builders. Every error report states the relative-error definition in
/// its header comment.
std::string errors_csv(const std::vector<ErrorRecord>& records);
std::string cdf_csv(const std::vector<double>& errors);
std::string tradeoff_csv(const std::vector<TradeoffRow>& rows);
/// Same table as whitespace-separated columns for gnuplot.
std::string tradeoff_gnuplot(const std::vector<TradeoffRow>& rows);

}  // namespace cardlab
