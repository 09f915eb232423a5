#include "cardlab/lab.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>

namespace cardlab {

namespace {

uint64_t cell_seed(uint64_t seed, double lr, size_t batch) {
  const uint64_t lr_bits = std::bit_cast<uint64_t>(lr);
  return derive_seed(derive_seed(seed, "cell", lr_bits), "batch", batch);
}

}  // namespace

GridResult grid_search(const DenseArch& arch, const std::vector<FlatExample>& train_set,
                       const std::vector<FlatExample>& validation_set, const GridSpec& grid,
                       uint64_t seed) {
  if (grid.learning_rates.empty() || grid.batch_sizes.empty()) {
    throw_data("E_DATA", "grid must list at least one learning rate and one batch size");
  }
  if (train_set.empty()) throw_data("E_DATA", "training set must be nonempty");
  const size_t input_width = train_set[0].x.size();

  // One shared initialization and featurization across cells keeps the
  // comparison about the hyperparameters alone.
  DenseNet initial =
      init_dense(input_width, arch.width, arch.depth, derive_seed(seed, "init"), arch.residual);
  {
    std::vector<FeatureVector> rows;
    rows.reserve(train_set.size());
    for (const auto& ex : train_set) rows.push_back(ex.x);
    initial.standardizer.fit(rows);
  }

  std::vector<std::pair<double, size_t>> cells_todo;
  for (double lr : grid.learning_rates) {
    for (size_t batch : grid.batch_sizes) {
      const std::pair<double, size_t> cell{lr, batch};
      if (std::find(cells_todo.begin(), cells_todo.end(), cell) == cells_todo.end()) {
        cells_todo.push_back(cell);
      }
    }
  }

  const auto beats = [](const GridCell& a, const GridCell& b) {
    if (a.final_validation_mse != b.final_validation_mse) {
      return a.final_validation_mse < b.final_validation_mse;
    }
    if (a.lr != b.lr) return a.lr < b.lr;
    return a.batch < b.batch;
  };

  GridResult result;
  bool have_winner = false;
  DenseNet winner;
  GridCell winning_cell;
  for (const auto& [lr, batch] : cells_todo) {
    GridCell cell;
    cell.lr = lr;
    cell.batch = batch;
    TrainHyper hyper = grid.base;
    hyper.lr = lr;
    hyper.batch = batch;
    hyper.max_epochs = grid.epochs_per_cell;
    hyper.patience = grid.epochs_per_cell + 1;  // cells always run the full budget
    DenseNet net = initial;
    try {
      const TrainReport report =
          train(net, train_set, validation_set, hyper, cell_seed(seed, lr, batch));
      cell.final_validation_mse =
          report.validation_mse.empty() ? mse(net, validation_set)
                                        : report.validation_mse.back();
    } catch (const Error& e) {
      if (e.code() != "E_DIVERGED") throw;
      cell.diverged = true;
    }
    result.cells.push_back(cell);
    if (!cell.diverged && (!have_winner || beats(cell, winning_cell))) {
      have_winner = true;
      winning_cell = cell;
      winner = std::move(net);
      result.best = grid.base;
      result.best.lr = cell.lr;
      result.best.batch = cell.batch;
    }
  }

  if (!have_winner) {
    std::ostringstream msg;
    msg << "all grid cells diverged:";
    for (const auto& cell : result.cells) {
      msg << " (lr=" << cell.lr << ", batch=" << cell.batch << ")";
    }
    throw_diverged(msg.str());
  }

  result.model = std::move(winner);
  if (grid.extension_max_epochs > 0) {
    TrainHyper extend = result.best;
    extend.max_epochs = grid.extension_max_epochs;
    result.extension =
        train(result.model, train_set, validation_set, extend, derive_seed(seed, "extend"));
  }
  return result;
}

std::optional<size_t> select_within_budget(const std::vector<BudgetCandidate>& candidates,
                                           size_t budget) {
  std::optional<size_t> best;
  double best_median = 0.0;
  for (size_t i = 0; i < candidates.size(); ++i) {
    if (candidates[i].parameter_count > budget) continue;
    if (candidates[i].absolute_errors.empty()) {
      throw_data("E_DATA", "budget candidate '" + candidates[i].name + "' has no errors");
    }
    const double med = median(candidates[i].absolute_errors);
    if (!best.has_value() || med < best_median) {
      best = i;
      best_median = med;
    }
  }
  return best;
}

namespace {

std::vector<double> disagreement(const std::vector<FeatureVector>& pool,
                                 const std::vector<std::vector<double>>& predictions) {
  if (predictions.size() < 2) {
    throw_data("E_DATA", "a committee needs at least 2 members");
  }
  for (const auto& row : predictions) {
    if (row.size() != pool.size()) {
      throw_data("E_DATA", "committee predictions do not cover the pool");
    }
  }
  std::vector<double> variances(pool.size());
  std::vector<double> column(predictions.size());
  for (size_t i = 0; i < pool.size(); ++i) {
    for (size_t m = 0; m < predictions.size(); ++m) column[m] = predictions[m][i];
    variances[i] = population_variance(column);
  }
  return variances;
}

std::vector<size_t> by_variance(const std::vector<double>& variances) {
  std::vector<size_t> order(variances.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    return variances[a] > variances[b];  // stable keeps lower index on ties
  });
  return order;
}

double squared_distance(const FeatureVector& a, const FeatureVector& b) {
  double sum = 0.0;
  for (size_t i = 0; i < a.size(); ++i) sum += (a[i] - b[i]) * (a[i] - b[i]);
  return sum;
}

}  // namespace

std::vector<size_t> qbc_select(const std::vector<FeatureVector>& pool,
                               const std::vector<std::vector<double>>& predictions, size_t k) {
  if (k > pool.size()) throw_data("E_DATA", "cannot select more points than the pool holds");
  const std::vector<double> variances = disagreement(pool, predictions);
  std::vector<size_t> order = by_variance(variances);
  order.resize(k);
  return order;
}

std::vector<size_t> qbc_cluster_select(const std::vector<FeatureVector>& pool,
                                       const std::vector<std::vector<double>>& predictions,
                                       size_t k, uint64_t seed) {
  if (k > pool.size()) throw_data("E_DATA", "cannot select more points than the pool holds");
  const std::vector<double> variances = disagreement(pool, predictions);
  if (k == 0) return {};
  if (k == pool.size()) {
    std::vector<size_t> all(pool.size());
    for (size_t i = 0; i < all.size(); ++i) all[i] = i;
    return all;
  }

  std::vector<size_t> candidates = by_variance(variances);
  candidates.resize(std::min(candidates.size(), 4 * k));
  const size_t m = candidates.size();

  // Seeded k-means++ initialization over the candidate vectors.
  Rng rng(derive_seed(seed, "kmeans"));
  std::vector<FeatureVector> centers;
  centers.push_back(pool[candidates[rng.next_index(m)]]);
  std::vector<double> d2(m);
  while (centers.size() < k) {
    double total = 0.0;
    for (size_t i = 0; i < m; ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& c : centers) best = std::min(best, squared_distance(pool[candidates[i]], c));
      d2[i] = best;
      total += best;
    }
    size_t pick = 0;
    if (total <= 0.0) {
      pick = rng.next_index(m);  // all candidates coincide with centers
    } else {
      double target = rng.next_double() * total;
      for (size_t i = 0; i < m; ++i) {
        target -= d2[i];
        if (target <= 0.0) {
          pick = i;
          break;
        }
      }
    }
    centers.push_back(pool[candidates[pick]]);
  }

  std::vector<size_t> assignment(m, 0);
  for (int iteration = 0; iteration < 25; ++iteration) {
    bool changed = false;
    for (size_t i = 0; i < m; ++i) {
      size_t best_center = 0;
      double best_dist = std::numeric_limits<double>::infinity();
      for (size_t c = 0; c < centers.size(); ++c) {
        const double dist = squared_distance(pool[candidates[i]], centers[c]);
        if (dist < best_dist) {
          best_dist = dist;
          best_center = c;  // ties keep the lowest center index
        }
      }
      if (assignment[i] != best_center) {
        assignment[i] = best_center;
        changed = true;
      }
    }
    if (!changed && iteration > 0) break;
    for (size_t c = 0; c < centers.size(); ++c) {
      FeatureVector sum(centers[c].size(), 0.0);
      size_t count = 0;
      for (size_t i = 0; i < m; ++i) {
        if (assignment[i] != c) continue;
        for (size_t j = 0; j < sum.size(); ++j) sum[j] += pool[candidates[i]][j];
        ++count;
      }
      if (count == 0) continue;  // empty cluster keeps its previous center
      for (size_t j = 0; j < sum.size(); ++j) sum[j] /= static_cast<double>(count);
      centers[c] = std::move(sum);
    }
  }

  // Per cluster, the member with the highest variance (ties: lower index).
  std::vector<size_t> chosen;
  std::vector<bool> taken(m, false);
  for (size_t c = 0; c < centers.size(); ++c) {
    size_t best_i = m;
    for (size_t i = 0; i < m; ++i) {
      if (assignment[i] != c) continue;
      if (best_i == m || variances[candidates[i]] > variances[candidates[best_i]] ||
          (variances[candidates[i]] == variances[candidates[best_i]] &&
           candidates[i] < candidates[best_i])) {
        best_i = i;
      }
    }
    if (best_i < m) {
      chosen.push_back(candidates[best_i]);
      taken[best_i] = true;
    }
  }
  // Backfill for empty clusters: next-highest variance unchosen candidates.
  for (size_t i = 0; i < m && chosen.size() < k; ++i) {
    if (!taken[i]) {
      chosen.push_back(candidates[i]);
      taken[i] = true;
    }
  }
  return chosen;
}

std::string active_method_name(ActiveMethod method) {
  switch (method) {
    case ActiveMethod::qbc:
      return "qbc";
    case ActiveMethod::qbc_cluster:
      return "qbc-cluster";
    case ActiveMethod::random:
      return "random";
  }
  return "unknown";
}

ActiveRun active_learn(const std::vector<FlatExample>& seed_set,
                       const std::vector<FeatureVector>& pool, const ActiveConfig& config,
                       const Labeler& labeler, uint64_t seed, ActiveRun* progress) {
  if (config.committee_size < 2) throw_data("E_DATA", "committee size must be at least 2");
  if (config.iterations < 1) throw_data("E_DATA", "active learning needs at least 1 iteration");
  if (config.k < 1) throw_data("E_DATA", "k must be at least 1");
  if (seed_set.size() < 2) throw_data("E_DATA", "seed set must hold at least 2 examples");
  if (pool.size() < config.k * config.iterations) {
    throw_data("E_DATA", "pool too small for k * iterations selections");
  }
  const size_t width = seed_set[0].x.size();

  // Fixed validation hold-out: 10% of the seed set, at least one example.
  std::vector<size_t> order(seed_set.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng split_rng(derive_seed(seed, "val-split"));
  split_rng.shuffle(order);
  const size_t val_n = std::max<size_t>(1, seed_set.size() / 10);
  std::vector<FlatExample> validation, labeled;
  for (size_t i = 0; i < order.size(); ++i) {
    (i < val_n ? validation : labeled).push_back(seed_set[order[i]]);
  }

  ActiveRun run;
  run.method = config.method;
  run.seed_size = seed_set.size();
  run.k = config.k;
  if (progress != nullptr) *progress = run;

  std::vector<size_t> remaining(pool.size());
  for (size_t i = 0; i < remaining.size(); ++i) remaining[i] = i;

  for (size_t it = 1; it <= config.iterations; ++it) {
    const auto started = std::chrono::steady_clock::now();
    const uint64_t iter_seed = derive_seed(seed, "iter", it);

    std::vector<size_t> chosen;  // pool indices
    if (config.method == ActiveMethod::random) {
      std::vector<size_t> pot = remaining;
      Rng rng(derive_seed(seed, "choose", it));
      rng.shuffle(pot);
      chosen.assign(pot.begin(), pot.begin() + config.k);
    } else {
      // Bootstrap the committee from the labeled pool.
      std::vector<DenseNet> committee(config.committee_size);
      parallel_for(config.jobs, config.committee_size, [&](size_t member) {
        Rng boot(derive_seed(iter_seed, "bootstrap", member));
        std::vector<FlatExample> sample;
        sample.reserve(labeled.size());
        for (size_t i = 0; i < labeled.size(); ++i) {
          sample.push_back(labeled[boot.next_index(labeled.size())]);
        }
        DenseNet net = init_dense(width, config.arch.width, config.arch.depth,
                                  derive_seed(iter_seed, "member", member),
                                  config.arch.residual);
        train(net, sample, validation, config.committee_hyper,
              derive_seed(iter_seed, "member-train", member));
        committee[member] = std::move(net);
      });

      std::vector<FeatureVector> view;
      view.reserve(remaining.size());
      for (size_t i : remaining) view.push_back(pool[i]);
      std::vector<std::vector<double>> predictions(config.committee_size);
      for (size_t m = 0; m < config.committee_size; ++m) {
        predictions[m].reserve(view.size());
        for (const auto& x : view) {
          predictions[m].push_back(committee[m].predict_transformed(x));
        }
      }
      const std::vector<size_t> picked =
          config.method == ActiveMethod::qbc
              ? qbc_select(view, predictions, config.k)
              : qbc_cluster_select(view, predictions, config.k,
                                   derive_seed(seed, "cluster", it));
      chosen.reserve(picked.size());
      for (size_t pos : picked) chosen.push_back(remaining[pos]);
    }

    // Label the batch; a labeler failure leaves `progress` with the
    // completed iterations only.
    for (size_t pool_index : chosen) {
      const double y = labeler(pool_index);
      labeled.push_back({pool[pool_index], y});
    }
    std::vector<bool> is_chosen(pool.size(), false);
    for (size_t i : chosen) is_chosen[i] = true;
    std::vector<size_t> next_remaining;
    next_remaining.reserve(remaining.size() - chosen.size());
    for (size_t i : remaining) {
      if (!is_chosen[i]) next_remaining.push_back(i);
    }
    remaining = std::move(next_remaining);
    run.labeled_pool_indices.insert(run.labeled_pool_indices.end(), chosen.begin(),
                                    chosen.end());

    DenseNet reporter = init_dense(width, config.arch.width, config.arch.depth,
                                   derive_seed(seed, "report", it), config.arch.residual);
    const TrainReport report = train(reporter, labeled, validation, config.report_hyper,
                                     derive_seed(seed, "report-train", it));

    ActiveIteration record;
    record.chosen = chosen;
    record.validation_mse = report.best_validation_mse;
    record.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    run.iterations.push_back(std::move(record));
    if (progress != nullptr) *progress = run;
  }
  return run;
}

}  // namespace cardlab
