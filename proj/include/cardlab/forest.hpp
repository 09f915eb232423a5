#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cardlab/common.hpp"
#include "cardlab/featurize.hpp"

namespace cardlab {

/// One node of a binary regression tree. Internal nodes route on
/// x[feature] <= threshold; leaves carry the mean label of the training
/// points that reached them.
struct TreeNode {
  int32_t feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int32_t left = -1;
  int32_t right = -1;
  double value = 0.0;

  bool is_leaf() const { return feature < 0; }
};

struct TreeParams {
  size_t max_depth = 0;          // 0 = unlimited
  size_t min_samples_leaf = 1;
  size_t feature_subsample = 0;  // 0 = consider every feature at each node
};

struct RegressionTree {
  size_t width = 0;
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  double predict(const FeatureVector& x) const;
  /// Stored scalars: two per internal node (feature, threshold), one per leaf.
  size_t parameter_count() const;
};

/// Bootstrap-bagged forest; prediction is the mean over trees.
struct RandomForest {
  size_t width = 0;
  std::vector<RegressionTree> trees;
  std::vector<uint64_t> tree_seeds;
  LabelTransform label_transform;

  double predict(const FeatureVector& x) const;
  size_t parameter_count() const;
};

/// Stagewise boosted ensemble: prediction = initial + shrinkage * sum(trees).
struct BoostedEnsemble {
  size_t width = 0;
  double initial = 0.0;  // mean training label
  double shrinkage = 1.0;
  std::vector<RegressionTree> trees;
  LabelTransform label_transform;

  double predict(const FeatureVector& x) const;
  size_t parameter_count() const;  // tree scalars plus the two ensemble constants
};

/// Greedy CART regression fit: best sum-of-squared-error reduction over
/// candidate thresholds at midpoints of consecutive distinct feature values.
/// Equal-gain ties resolve to the lowest feature index, then the lowest
/// threshold. The seed only matters when feature_subsample is active.
RegressionTree fit_tree(const std::vector<FlatExample>& data, const TreeParams& params,
                        uint64_t seed);

/// Fits n_trees trees on bootstrap resamples (size N, with replacement).
/// When params.feature_subsample is 0 each node considers ceil(sqrt(width))
/// features; pass width explicitly to disable subsampling. Setting bootstrap
/// to false trains every tree on the full data. Trees may fit in parallel;
/// per-tree seeds keep the result independent of the schedule.
RandomForest fit_forest(const std::vector<FlatExample>& data, size_t n_trees,
                        const TreeParams& params, uint64_t seed, bool bootstrap = true,
                        size_t jobs = 1);

/// Stage m fits a tree to the residuals of the current ensemble and adds it
/// with the given shrinkage. Stops early once the training objective changes
/// by less than 1e-12 between stages.
BoostedEnsemble fit_boosted(const std::vector<FlatExample>& data, size_t n_trees,
                            double shrinkage, const TreeParams& params);

/// Versioned JSON round trips.
std::string forest_to_json_text(const RandomForest& forest);
RandomForest forest_from_json_text(const std::string& text);
std::string boosted_to_json_text(const BoostedEnsemble& ensemble);
BoostedEnsemble boosted_from_json_text(const std::string& text);

}  // namespace cardlab
