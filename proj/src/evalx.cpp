#include "cardlab/evalx.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>

namespace cardlab {

std::vector<ErrorRecord> compute_errors(const std::vector<int64_t>& truths,
                                        const std::vector<int64_t>& estimates,
                                        const std::string& estimator,
                                        const std::vector<std::string>& complexity) {
  if (truths.size() != estimates.size()) {
    throw_data("E_DATA", "truths and estimates differ in length");
  }
  if (!complexity.empty() && complexity.size() != truths.size()) {
    throw_data("E_DATA", "complexity tags differ in length");
  }
  std::vector<ErrorRecord> records;
  records.reserve(truths.size());
  for (size_t i = 0; i < truths.size(); ++i) {
    ErrorRecord rec;
    rec.query_id = i;
    rec.true_cardinality = truths[i];
    rec.estimate = estimates[i];
    rec.absolute_error = std::abs(static_cast<double>(estimates[i] - truths[i]));
    rec.relative_error =
        rec.absolute_error / std::max(static_cast<double>(truths[i]), 1.0);
    rec.estimator = estimator;
    if (!complexity.empty()) rec.complexity = complexity[i];
    records.push_back(std::move(rec));
  }
  return records;
}

double knee(const std::vector<double>& errors, bool halve) {
  std::vector<double> sorted = errors;
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> distinct = sorted;
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  if (distinct.size() < 3) {
    throw_data("E_DATA", "knee needs at least 3 distinct error values");
  }
  const size_t n = sorted.size();
  const size_t m = distinct.size();

  // CDF points over distinct errors: x = normalized log10(1+e), y = fraction <= e.
  std::vector<double> xs(m), ys(m);
  for (size_t i = 0; i < m; ++i) {
    xs[i] = std::log10(1.0 + distinct[i]);
    const auto upper = std::upper_bound(sorted.begin(), sorted.end(), distinct[i]);
    ys[i] = static_cast<double>(upper - sorted.begin()) / static_cast<double>(n);
  }
  const double x_lo = xs.front();
  const double x_span = xs.back() - xs.front();
  for (double& x : xs) x = (x - x_lo) / x_span;

  // Perpendicular distance to the chord from (xs[0], ys[0]) to (xs[m-1], ys[m-1]);
  // the denominator is shared, so compare cross-product magnitudes.
  const double dx = xs.back() - xs.front();
  const double dy = ys.back() - ys.front();
  double best = -1.0;
  size_t best_index = 0;
  for (size_t i = 0; i < m; ++i) {
    const double dist = std::abs(dx * (ys[i] - ys.front()) - dy * (xs[i] - xs.front()));
    if (dist > best) {
      best = dist;
      best_index = i;  // ascending scan keeps the smaller error on ties
    }
  }
  const double k = distinct[best_index];
  return halve ? k / 2.0 : k;
}

CdfSplit split_easy_hard(const std::vector<ErrorRecord>& records, double k,
                         bool halve_applied) {
  if (!std::isfinite(k)) throw_data("E_DATA", "split threshold must be finite");
  CdfSplit split;
  split.knee = k;
  split.halve_applied = halve_applied;
  for (size_t i = 0; i < records.size(); ++i) {
    split.sorted_errors.push_back(records[i].absolute_error);
    (records[i].absolute_error <= k ? split.easy : split.hard).push_back(i);
  }
  std::sort(split.sorted_errors.begin(), split.sorted_errors.end());
  return split;
}

double easy_fraction(const std::vector<double>& subset_errors, double model_knee) {
  if (subset_errors.empty()) throw_data("E_DATA", "easy fraction of an empty subset");
  size_t easy = 0;
  for (double e : subset_errors) {
    if (e <= model_knee) ++easy;
  }
  return static_cast<double>(easy) / static_cast<double>(subset_errors.size());
}

TradeoffRow tradeoff_row(const std::string& name, const std::vector<ErrorRecord>& records,
                         size_t parameter_count, double train_seconds) {
  if (records.empty()) throw_data("E_DATA", "tradeoff row needs at least one record");
  std::vector<double> abs_errors;
  abs_errors.reserve(records.size());
  for (const auto& rec : records) abs_errors.push_back(rec.absolute_error);
  std::sort(abs_errors.begin(), abs_errors.end());
  TradeoffRow row;
  row.name = name;
  row.p25_absolute_error = quantile_sorted(abs_errors, 0.25);
  row.median_absolute_error = quantile_sorted(abs_errors, 0.5);
  row.p75_absolute_error = quantile_sorted(abs_errors, 0.75);
  row.parameter_count = parameter_count;
  row.train_seconds = train_seconds;
  return row;
}

namespace {

std::string fmt(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace

std::string errors_csv(const std::vector<ErrorRecord>& records) {
  std::ostringstream out;
  out << "# relative_error = |estimate - true| / max(true, 1)\n";
  out << "query_id,true_cardinality,estimate,absolute_error,relative_error,estimator,"
         "complexity\n";
  for (const auto& rec : records) {
    out << rec.query_id << ',' << rec.true_cardinality << ',' << rec.estimate << ','
        << fmt(rec.absolute_error) << ',' << fmt(rec.relative_error) << ',' << rec.estimator
        << ',' << rec.complexity << '\n';
  }
  return out.str();
}

std::string cdf_csv(const std::vector<double>& errors) {
  std::vector<double> sorted = errors;
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> distinct = sorted;
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  std::ostringstream out;
  out << "error,cumulative_fraction\n";
  for (double e : distinct) {
    const auto upper = std::upper_bound(sorted.begin(), sorted.end(), e);
    const double frac =
        static_cast<double>(upper - sorted.begin()) / static_cast<double>(sorted.size());
    out << fmt(e) << ',' << fmt(frac) << '\n';
  }
  return out.str();
}

std::string tradeoff_csv(const std::vector<TradeoffRow>& rows) {
  std::ostringstream out;
  out << "# absolute errors in tuples; relative_error = |estimate - true| / max(true, 1)\n";
  out << "estimator,p25_absolute_error,median_absolute_error,p75_absolute_error,"
         "parameter_count,train_seconds\n";
  for (const auto& row : rows) {
    out << row.name << ',' << fmt(row.p25_absolute_error) << ','
        << fmt(row.median_absolute_error) << ',' << fmt(row.p75_absolute_error) << ','
        << row.parameter_count << ',' << fmt(row.train_seconds) << '\n';
  }
  return out.str();
}

std::string tradeoff_gnuplot(const std::vector<TradeoffRow>& rows) {
  std::ostringstream out;
  out << "# estimator p25 median p75 parameter_count train_seconds\n";
  for (const auto& row : rows) {
    std::string name = row.name;
    std::replace(name.begin(), name.end(), ' ', '_');
    out << name << ' ' << fmt(row.p25_absolute_error) << ' '
        << fmt(row.median_absolute_error) << ' ' << fmt(row.p75_absolute_error) << ' '
        << row.parameter_count << ' ' << fmt(row.train_seconds) << '\n';
  }
  return out.str();
}

}  // namespace cardlab
