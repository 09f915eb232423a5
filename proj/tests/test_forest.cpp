#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <vector>

#include "cardlab/forest.hpp"

using namespace cardlab;

namespace {

std::vector<FlatExample> one_dim(std::vector<std::pair<double, double>> points) {
  std::vector<FlatExample> out;
  for (const auto& [x, y] : points) out.push_back({{x}, y});
  return out;
}

double training_mse(const RegressionTree& tree, const std::vector<FlatExample>& data) {
  double total = 0.0;
  for (const auto& ex : data) {
    const double err = tree.predict(ex.x) - ex.y;
    total += err * err;
  }
  return total / static_cast<double>(data.size());
}

double training_mse(const RandomForest& forest, const std::vector<FlatExample>& data) {
  double total = 0.0;
  for (const auto& ex : data) {
    const double err = forest.predict(ex.x) - ex.y;
    total += err * err;
  }
  return total / static_cast<double>(data.size());
}

/// Independent exhaustive scan: SSE of a set of labels, directly.
double sse_of(const std::vector<double>& ys) {
  if (ys.empty()) return 0.0;
  double mean = 0.0;
  for (double y : ys) mean += y;
  mean /= static_cast<double>(ys.size());
  double sse = 0.0;
  for (double y : ys) sse += (y - mean) * (y - mean);
  return sse;
}

/// Brute-force best SSE reduction over every (feature, midpoint) candidate.
struct OracleBest {
  double gain = 0.0;
  size_t feature = 0;
  double threshold = 0.0;
  bool found = false;
};

OracleBest oracle_best_split(const std::vector<FlatExample>& data, size_t min_leaf = 1) {
  const size_t width = data[0].x.size();
  std::vector<double> all;
  for (const auto& ex : data) all.push_back(ex.y);
  const double parent = sse_of(all);
  OracleBest best;
  for (size_t f = 0; f < width; ++f) {
    std::set<double> values;
    for (const auto& ex : data) values.insert(ex.x[f]);
    std::vector<double> sorted(values.begin(), values.end());
    for (size_t i = 0; i + 1 < sorted.size(); ++i) {
      const double threshold = (sorted[i] + sorted[i + 1]) / 2.0;
      std::vector<double> left, right;
      for (const auto& ex : data) (ex.x[f] <= threshold ? left : right).push_back(ex.y);
      if (left.size() < min_leaf || right.size() < min_leaf) continue;
      const double gain = parent - sse_of(left) - sse_of(right);
      if (!best.found || gain > best.gain + 1e-12) {
        best.found = true;
        best.gain = gain;
        best.feature = f;
        best.threshold = threshold;
      }
    }
  }
  return best;
}

std::vector<FlatExample> synth_data(size_t n, size_t width, uint64_t seed,
                                     bool coarse_features = false) {
  Rng rng(seed);
  std::vector<FlatExample> out;
  for (size_t i = 0; i < n; ++i) {
    FlatExample ex;
    ex.x.resize(width);
    for (double& v : ex.x) {
      v = coarse_features ? static_cast<double>(rng.next_int(0, 5)) : rng.next_normal(0, 1);
    }
    ex.y = rng.next_normal(0, 1);
    out.push_back(ex);
  }
  return out;
}

size_t tree_depth(const RegressionTree& tree, int32_t node = 0) {
  if (tree.nodes[static_cast<size_t>(node)].is_leaf()) return 0;
  return 1 + std::max(tree_depth(tree, tree.nodes[static_cast<size_t>(node)].left),
                      tree_depth(tree, tree.nodes[static_cast<size_t>(node)].right));
}

size_t leaf_of(const RegressionTree& tree, const FeatureVector& x) {
  size_t node = 0;
  while (!tree.nodes[node].is_leaf()) {
    node = x[static_cast<size_t>(tree.nodes[node].feature)] <= tree.nodes[node].threshold
               ? static_cast<size_t>(tree.nodes[node].left)
               : static_cast<size_t>(tree.nodes[node].right);
  }
  return node;
}

}  // namespace

TEST_CASE("constant labels yield a single leaf predicting that constant") {
  const auto data = one_dim({{0, 7.5}, {1, 7.5}, {2, 7.5}, {3, 7.5}});
  const RegressionTree tree = fit_tree(data, TreeParams{}, 1);
  REQUIRE(tree.nodes.size() == 1);
  CHECK(tree.nodes[0].is_leaf());
  CHECK(tree.nodes[0].value == doctest::Approx(7.5));
  CHECK(tree.parameter_count() == 1);
}

TEST_CASE("unlimited depth memorizes distinct inputs") {
  const auto data = synth_data(60, 3, 404);
  const RegressionTree tree = fit_tree(data, TreeParams{}, 2);
  CHECK(training_mse(tree, data) <= 1e-12);
}

TEST_CASE("the textbook 1-D step function splits at 1.5") {
  const auto data = one_dim({{0, 0}, {1, 0}, {2, 10}, {3, 10}});
  const RegressionTree tree = fit_tree(data, TreeParams{}, 3);
  REQUIRE(!tree.nodes[0].is_leaf());
  CHECK(tree.nodes[0].feature == 0);
  CHECK(tree.nodes[0].threshold == doctest::Approx(1.5));
  CHECK(tree.predict({0.5}) == doctest::Approx(0.0));
  CHECK(tree.predict({2.5}) == doctest::Approx(10.0));
  // Matches the exhaustive oracle too.
  const OracleBest oracle = oracle_best_split(data);
  CHECK(oracle.feature == 0);
  CHECK(oracle.threshold == doctest::Approx(1.5));
}

TEST_CASE("root split gain equals the exhaustive maximum") {
  for (uint64_t seed : {11u, 22u, 33u, 44u, 55u}) {
    const auto data = synth_data(80, 4, seed, true);
    const OracleBest oracle = oracle_best_split(data);
    const RegressionTree tree = fit_tree(data, TreeParams{}, seed);
    if (!oracle.found || oracle.gain <= 1e-12) {
      CHECK(tree.nodes[0].is_leaf());
      continue;
    }
    REQUIRE(!tree.nodes[0].is_leaf());
    // Recompute the chosen split's gain with the oracle's arithmetic.
    std::vector<double> left, right, all;
    for (const auto& ex : data) {
      all.push_back(ex.y);
      (ex.x[static_cast<size_t>(tree.nodes[0].feature)] <= tree.nodes[0].threshold ? left
                                                                                   : right)
          .push_back(ex.y);
    }
    const double chosen_gain = sse_of(all) - sse_of(left) - sse_of(right);
    CHECK(chosen_gain == doctest::Approx(oracle.gain).epsilon(1e-9));
  }
}

TEST_CASE("equal-gain ties resolve to the lowest feature then lowest threshold") {
  // Feature 1 duplicates feature 0, so every split gain exists on both; the
  // tree must pick feature 0.
  std::vector<FlatExample> data;
  for (double v : {0.0, 1.0, 2.0, 3.0}) data.push_back({{v, v}, v < 2.0 ? 0.0 : 10.0});
  const RegressionTree tree = fit_tree(data, TreeParams{}, 4);
  REQUIRE(!tree.nodes[0].is_leaf());
  CHECK(tree.nodes[0].feature == 0);
}

TEST_CASE("depth and leaf-size limits are honored") {
  const auto data = synth_data(200, 3, 505, true);
  TreeParams params;
  params.max_depth = 3;
  params.min_samples_leaf = 10;
  const RegressionTree tree = fit_tree(data, params, 6);
  CHECK(tree_depth(tree) <= 3);

  std::map<size_t, std::vector<double>> reach;
  for (const auto& ex : data) reach[leaf_of(tree, ex.x)].push_back(ex.y);
  for (const auto& [leaf, ys] : reach) {
    CHECK(ys.size() >= 10);
    // Leaf prediction is the mean of the labels that reach it.
    double mean = 0.0;
    for (double y : ys) mean += y;
    mean /= static_cast<double>(ys.size());
    CHECK(tree.nodes[leaf].value == doctest::Approx(mean).epsilon(1e-12));
  }
}

TEST_CASE("single-tree forest without bootstrap matches fit_tree") {
  const auto data = synth_data(50, 4, 606);
  TreeParams params;
  params.feature_subsample = 4;  // consider all features, like fit_tree
  const RegressionTree tree = fit_tree(data, params, derive_seed(9, "tree", 0));
  const RandomForest forest = fit_forest(data, 1, params, 9, false);
  REQUIRE(forest.trees.size() == 1);
  REQUIRE(forest.trees[0].nodes.size() == tree.nodes.size());
  for (const auto& ex : data) {
    CHECK(forest.predict(ex.x) == tree.predict(ex.x));
  }
}

TEST_CASE("forest prediction on constant data equals the tree prediction") {
  const auto data = one_dim({{0, 3}, {1, 3}, {2, 3}, {3, 3}});
  const RandomForest forest = fit_forest(data, 10, TreeParams{}, 8);
  CHECK(forest.predict({1.5}) == doctest::Approx(3.0));
}

TEST_CASE("bagging stops memorizing noisy data") {
  const auto data = synth_data(120, 3, 707);
  TreeParams params;
  const RegressionTree lone = fit_tree(data, params, 1);
  params.feature_subsample = 0;  // forest default: ceil(sqrt(width))
  const RandomForest forest = fit_forest(data, 50, params, 1);
  const double lone_mse = training_mse(lone, data);
  const double forest_mse = training_mse(forest, data);
  CHECK(lone_mse <= 1e-12);
  CHECK(forest_mse >= lone_mse);
  CHECK(forest_mse > 1e-6);  // averaging over bootstraps leaves real error
}

TEST_CASE("forests are deterministic and schedule-independent") {
  const auto data = synth_data(80, 4, 808);
  const RandomForest a = fit_forest(data, 8, TreeParams{}, 77, true, 1);
  const RandomForest b = fit_forest(data, 8, TreeParams{}, 77, true, 4);
  CHECK(forest_to_json_text(a) == forest_to_json_text(b));
  const RandomForest c = fit_forest(data, 8, TreeParams{}, 78, true, 1);
  CHECK(forest_to_json_text(a) != forest_to_json_text(c));
}

TEST_CASE("a forest of copies of one tree predicts like that tree") {
  const auto data = synth_data(30, 2, 909);
  const RegressionTree tree = fit_tree(data, TreeParams{}, 5);
  RandomForest forest;
  forest.width = tree.width;
  for (int i = 0; i < 4; ++i) forest.trees.push_back(tree);
  for (const auto& ex : data) {
    CHECK(forest.predict(ex.x) == doctest::Approx(tree.predict(ex.x)).epsilon(1e-12));
  }
}

TEST_CASE("one full-depth boosting stage memorizes the data") {
  const auto data = synth_data(40, 3, 111);
  const BoostedEnsemble model = fit_boosted(data, 1, 1.0, TreeParams{});
  double total = 0.0;
  for (const auto& ex : data) {
    const double err = model.predict(ex.x) - ex.y;
    total += err * err;
  }
  CHECK(total / static_cast<double>(data.size()) <= 1e-12);
  for (const auto& ex : data) {
    CHECK(model.predict(ex.x) == doctest::Approx(ex.y).epsilon(1e-9));
  }
}

TEST_CASE("boosting rejects out-of-range shrinkage") {
  const auto data = one_dim({{0, 1}, {1, 2}});
  CHECK_THROWS_AS(fit_boosted(data, 3, 0.0, TreeParams{}), Error);
  CHECK_THROWS_AS(fit_boosted(data, 3, 1.5, TreeParams{}), Error);
  CHECK_THROWS_AS(fit_boosted(data, 0, 0.5, TreeParams{}), Error);
}

TEST_CASE("training error is non-increasing across boosting stages") {
  const auto data = synth_data(100, 3, 222, true);
  TreeParams params;
  params.max_depth = 3;
  const BoostedEnsemble model = fit_boosted(data, 20, 0.5, params);
  // Evaluate each stage prefix independently.
  std::vector<double> stage_mse;
  std::vector<double> preds(data.size(), model.initial);
  auto mse_now = [&]() {
    double total = 0.0;
    for (size_t i = 0; i < data.size(); ++i) {
      const double err = preds[i] - data[i].y;
      total += err * err;
    }
    return total / static_cast<double>(data.size());
  };
  stage_mse.push_back(mse_now());
  for (const auto& tree : model.trees) {
    for (size_t i = 0; i < data.size(); ++i) {
      preds[i] += model.shrinkage * tree.predict(data[i].x);
    }
    stage_mse.push_back(mse_now());
  }
  for (size_t m = 1; m < stage_mse.size(); ++m) {
    CHECK(stage_mse[m] <= stage_mse[m - 1] + 1e-12);
  }
}

TEST_CASE("ensemble parameter counts tally stored scalars") {
  const auto step = one_dim({{0, 0}, {1, 0}, {2, 10}, {3, 10}});
  const RegressionTree tree = fit_tree(step, TreeParams{}, 1);
  // One internal node (2 scalars) and two leaves (1 each).
  CHECK(tree.parameter_count() == 4);

  RandomForest forest;
  forest.width = 1;
  forest.trees = {tree, tree, tree};
  CHECK(forest.parameter_count() == 12);

  BoostedEnsemble boosted;
  boosted.width = 1;
  boosted.trees = {tree};
  CHECK(boosted.parameter_count() == 4 + 2);
}

TEST_CASE("predictions reject mismatched feature widths") {
  const auto data = synth_data(20, 3, 333);
  const RegressionTree tree = fit_tree(data, TreeParams{}, 1);
  CHECK_THROWS_AS(tree.predict({1.0, 2.0}), Error);
  const BoostedEnsemble boosted = fit_boosted(data, 2, 1.0, TreeParams{});
  CHECK_THROWS_AS(boosted.predict({1.0}), Error);
}

TEST_CASE("ensemble JSON round trips bit-exactly") {
  const auto data = synth_data(40, 3, 444);
  RandomForest forest = fit_forest(data, 5, TreeParams{}, 3);
  forest.label_transform.mean = -4.5;
  forest.label_transform.std = 2.25;
  const std::string text = forest_to_json_text(forest);
  const RandomForest back = forest_from_json_text(text);
  CHECK(forest_to_json_text(back) == text);
  for (const auto& ex : data) CHECK(back.predict(ex.x) == forest.predict(ex.x));

  BoostedEnsemble boosted = fit_boosted(data, 4, 0.5, TreeParams{});
  const std::string btext = boosted_to_json_text(boosted);
  const BoostedEnsemble bback = boosted_from_json_text(btext);
  CHECK(boosted_to_json_text(bback) == btext);
  for (const auto& ex : data) CHECK(bback.predict(ex.x) == boosted.predict(ex.x));

  CHECK_THROWS_AS(forest_from_json_text(btext), Error);
  CHECK_THROWS_AS(boosted_from_json_text("nonsense"), Error);
}
