#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "cardlab/neural.hpp"

namespace cardlab {

struct DenseArch {
  size_t width = 100;
  size_t depth = 1;
  bool residual = true;
};

/// Hyperparameter grid over learning rate and batch size. Every cell trains
/// for the same fixed number of epochs; the winner then continues under the
/// usual patience rule. Duplicate (lr, batch) cells collapse to one run.
struct GridSpec {
  std::vector<double> learning_rates;
  std::vector<size_t> batch_sizes;
  size_t epochs_per_cell = 500;
  size_t extension_max_epochs = 2000;
  TrainHyper base;  // patience / min_delta / weight_decay carried into training
};

struct GridCell {
  double lr = 0.0;
  size_t batch = 0;
  double final_validation_mse = 0.0;
  bool diverged = false;
};

struct GridResult {
  TrainHyper best;
  DenseNet model;
  TrainReport extension;
  std::vector<GridCell> cells;
};

/// Trains every grid cell from one shared initialization, picks the lowest
/// final validation loss (ties: lower lr, then smaller batch) and keeps
/// training the winner. Throws E_DIVERGED when every cell diverges.
GridResult grid_search(const DenseArch& arch, const std::vector<FlatExample>& train_set,
                       const std::vector<FlatExample>& validation_set, const GridSpec& grid,
                       uint64_t seed);

struct BudgetCandidate {
  std::string name;
  size_t parameter_count = 0;
  std::vector<double> absolute_errors;
};

/// Index of the candidate with the lowest median absolute error among those
/// with parameter_count <= budget; nullopt when none qualifies.
std::optional<size_t> select_within_budget(const std::vector<BudgetCandidate>& candidates,
                                           size_t budget);

/// predictions[m][i] = committee member m's prediction for pool point i.
/// Disagreement = population variance across members. Returns the indices of
/// the k highest-variance points, highest first (ties: lower index).
std::vector<size_t> qbc_select(const std::vector<FeatureVector>& pool,
                               const std::vector<std::vector<double>>& predictions, size_t k);

/// Diversified batch: k-means (k clusters, 25 iterations, seeded k-means++
/// initialization) over the top-4k disagreement candidates, taking the
/// highest-variance member of each cluster; empty clusters backfill from the
/// remaining candidates by variance.
std::vector<size_t> qbc_cluster_select(const std::vector<FeatureVector>& pool,
                                       const std::vector<std::vector<double>>& predictions,
                                       size_t k, uint64_t seed = 0);

enum class ActiveMethod { qbc, qbc_cluster, random };

std::string active_method_name(ActiveMethod method);

struct ActiveConfig {
  ActiveMethod method = ActiveMethod::qbc;
  size_t k = 100;
  size_t iterations = 3;
  size_t committee_size = 5;
  DenseArch arch;
  TrainHyper committee_hyper;
  TrainHyper report_hyper;
  size_t jobs = 1;

  ActiveConfig() { report_hyper.weight_decay = 1e-4; }
};

struct ActiveIteration {
  std::vector<size_t> chosen;  // pool indices, selection order
  double validation_mse = 0.0;
  double wall_seconds = 0.0;
};

struct ActiveRun {
  ActiveMethod method = ActiveMethod::qbc;
  size_t seed_size = 0;
  size_t k = 0;
  std::vector<ActiveIteration> iterations;
  std::vector<size_t> labeled_pool_indices;  // all chosen pool indices in order
};

/// Maps a chosen pool index to its transformed label (typically by running
/// the exact executor on the underlying query).
using Labeler = std::function<double(size_t pool_index)>;

/// Batch-mode active learning. Per iteration: bootstrap a committee from the
/// labeled pool, score the remaining unlabeled pool, pick k points by the
/// configured method, label them, and retrain the reporting model (with
/// weight decay) recording its validation loss. 10% of the seed set (at
/// least one example) is held out as a fixed validation set. If `progress`
/// is given it is updated after every completed iteration, so a labeler
/// failure preserves the partial history.
ActiveRun active_learn(const std::vector<FlatExample>& seed_set,
                       const std::vector<FeatureVector>& pool, const ActiveConfig& config,
                       const Labeler& labeler, uint64_t seed, ActiveRun* progress = nullptr);

}  // namespace cardlab
