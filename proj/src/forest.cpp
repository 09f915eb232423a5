#include "cardlab/forest.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <json.hpp>

namespace cardlab {

namespace {

struct TreeBuilder {
  const std::vector<FlatExample>& data;
  const TreeParams& params;
  Rng rng;
  size_t width;
  std::vector<TreeNode> nodes;

  struct Split {
    bool found = false;
    size_t feature = 0;
    double threshold = 0.0;
    double score = 0.0;  // sum_l^2/n_l + sum_r^2/n_r, higher is better
  };

  std::vector<size_t> pick_features() {
    const size_t take = params.feature_subsample == 0
                            ? width
                            : std::min(params.feature_subsample, width);
    std::vector<size_t> all(width);
    std::iota(all.begin(), all.end(), size_t{0});
    if (take >= width) return all;
    for (size_t i = 0; i < take; ++i) {
      const size_t j = i + rng.next_index(width - i);
      std::swap(all[i], all[j]);
    }
    all.resize(take);
    std::sort(all.begin(), all.end());  // ascending order keeps the tie rule
    return all;
  }

  Split best_split(std::vector<size_t>& idx) {
    const size_t n = idx.size();
    Split best;
    double total = 0.0;
    for (size_t i : idx) total += data[i].y;
    for (size_t feature : pick_features()) {
      std::sort(idx.begin(), idx.end(), [&](size_t a, size_t b) {
        return data[a].x[feature] < data[b].x[feature];
      });
      double left_sum = 0.0;
      for (size_t pos = 0; pos + 1 < n; ++pos) {
        left_sum += data[idx[pos]].y;
        const double lo = data[idx[pos]].x[feature];
        const double hi = data[idx[pos + 1]].x[feature];
        if (lo == hi) continue;  // threshold only between distinct values
        const size_t n_left = pos + 1;
        const size_t n_right = n - n_left;
        if (n_left < params.min_samples_leaf || n_right < params.min_samples_leaf) continue;
        const double right_sum = total - left_sum;
        const double score = left_sum * left_sum / static_cast<double>(n_left) +
                             right_sum * right_sum / static_cast<double>(n_right);
        const double threshold = lo + (hi - lo) / 2.0;
        // Strict improvement keeps the lowest-feature, lowest-threshold tie rule.
        if (!best.found || score > best.score) {
          best.found = true;
          best.feature = feature;
          best.threshold = threshold;
          best.score = score;
        }
      }
    }
    if (best.found) {
      // Convert the score into an SSE reduction and reject zero-gain splits.
      const double parent = total * total / static_cast<double>(n);
      if (best.score - parent <= 1e-12 * std::max(1.0, std::abs(parent))) best.found = false;
    }
    return best;
  }

  int32_t build(std::vector<size_t> idx, size_t depth) {
    const size_t n = idx.size();
    double sum = 0.0;
    for (size_t i : idx) sum += data[i].y;
    const double mean = sum / static_cast<double>(n);

    const bool depth_capped = params.max_depth > 0 && depth >= params.max_depth;
    Split split;
    if (!depth_capped && n >= 2 * params.min_samples_leaf && n >= 2) {
      split = best_split(idx);
    }
    const int32_t id = static_cast<int32_t>(nodes.size());
    nodes.emplace_back();
    if (!split.found) {
      nodes[id].value = mean;
      return id;
    }
    std::vector<size_t> left, right;
    for (size_t i : idx) {
      (data[i].x[split.feature] <= split.threshold ? left : right).push_back(i);
    }
    nodes[id].feature = static_cast<int32_t>(split.feature);
    nodes[id].threshold = split.threshold;
    const int32_t l = build(std::move(left), depth + 1);
    const int32_t r = build(std::move(right), depth + 1);
    nodes[id].left = l;
    nodes[id].right = r;
    return id;
  }
};

void check_width(size_t width, const FeatureVector& x) {
  if (x.size() != width) {
    throw_data("E_DATA", "feature width " + std::to_string(x.size()) +
                             " does not match model width " + std::to_string(width));
  }
}

}  // namespace

double RegressionTree::predict(const FeatureVector& x) const {
  check_width(width, x);
  size_t node = 0;
  while (!nodes[node].is_leaf()) {
    node = x[static_cast<size_t>(nodes[node].feature)] <= nodes[node].threshold
               ? static_cast<size_t>(nodes[node].left)
               : static_cast<size_t>(nodes[node].right);
  }
  return nodes[node].value;
}

size_t RegressionTree::parameter_count() const {
  size_t total = 0;
  for (const auto& node : nodes) total += node.is_leaf() ? 1 : 2;
  return total;
}

double RandomForest::predict(const FeatureVector& x) const {
  if (trees.empty()) throw_data("E_DATA", "forest has no trees");
  double sum = 0.0;
  for (const auto& tree : trees) sum += tree.predict(x);
  return sum / static_cast<double>(trees.size());
}

size_t RandomForest::parameter_count() const {
  size_t total = 0;
  for (const auto& tree : trees) total += tree.parameter_count();
  return total;
}

double BoostedEnsemble::predict(const FeatureVector& x) const {
  check_width(width, x);
  double sum = initial;
  for (const auto& tree : trees) sum += shrinkage * tree.predict(x);
  return sum;
}

size_t BoostedEnsemble::parameter_count() const {
  size_t total = 2;  // initial prediction and shrinkage
  for (const auto& tree : trees) total += tree.parameter_count();
  return total;
}

RegressionTree fit_tree(const std::vector<FlatExample>& data, const TreeParams& params,
                        uint64_t seed) {
  if (data.empty()) throw_data("E_DATA", "cannot fit a tree on empty data");
  RegressionTree tree;
  tree.width = data[0].x.size();
  TreeBuilder builder{data, params, Rng(derive_seed(seed, "tree")), tree.width, {}};
  std::vector<size_t> idx(data.size());
  std::iota(idx.begin(), idx.end(), size_t{0});
  builder.build(std::move(idx), 0);
  tree.nodes = std::move(builder.nodes);
  return tree;
}

RandomForest fit_forest(const std::vector<FlatExample>& data, size_t n_trees,
                        const TreeParams& params, uint64_t seed, bool bootstrap, size_t jobs) {
  if (data.empty()) throw_data("E_DATA", "cannot fit a forest on empty data");
  if (n_trees < 1) throw_data("E_DATA", "a forest needs at least one tree");
  RandomForest forest;
  forest.width = data[0].x.size();
  TreeParams effective = params;
  if (effective.feature_subsample == 0) {
    effective.feature_subsample =
        static_cast<size_t>(std::ceil(std::sqrt(static_cast<double>(forest.width))));
  }
  forest.trees.resize(n_trees);
  forest.tree_seeds.resize(n_trees);
  parallel_for(jobs, n_trees, [&](size_t t) {
    forest.tree_seeds[t] = derive_seed(seed, "tree", t);
    if (bootstrap) {
      Rng rng(derive_seed(seed, "bootstrap", t));
      std::vector<FlatExample> sample;
      sample.reserve(data.size());
      for (size_t i = 0; i < data.size(); ++i) sample.push_back(data[rng.next_index(data.size())]);
      forest.trees[t] = fit_tree(sample, effective, forest.tree_seeds[t]);
    } else {
      forest.trees[t] = fit_tree(data, effective, forest.tree_seeds[t]);
    }
  });
  return forest;
}

BoostedEnsemble fit_boosted(const std::vector<FlatExample>& data, size_t n_trees,
                            double shrinkage, const TreeParams& params) {
  if (data.empty()) throw_data("E_DATA", "cannot fit a boosted ensemble on empty data");
  if (n_trees < 1) throw_data("E_DATA", "a boosted ensemble needs at least one stage");
  if (!(shrinkage > 0.0 && shrinkage <= 1.0)) {
    throw_data("E_DATA", "shrinkage must lie in (0, 1]");
  }
  BoostedEnsemble ensemble;
  ensemble.width = data[0].x.size();
  ensemble.shrinkage = shrinkage;
  double sum = 0.0;
  for (const auto& ex : data) sum += ex.y;
  ensemble.initial = sum / static_cast<double>(data.size());

  std::vector<double> predictions(data.size(), ensemble.initial);
  auto objective = [&]() {
    double total = 0.0;
    for (size_t i = 0; i < data.size(); ++i) {
      const double err = predictions[i] - data[i].y;
      total += err * err;
    }
    return total / static_cast<double>(data.size());
  };
  double previous = objective();
  for (size_t stage = 0; stage < n_trees; ++stage) {
    std::vector<FlatExample> residuals = data;
    for (size_t i = 0; i < data.size(); ++i) residuals[i].y = data[i].y - predictions[i];
    RegressionTree tree = fit_tree(residuals, params, derive_seed(0, "stage", stage));
    for (size_t i = 0; i < data.size(); ++i) {
      predictions[i] += shrinkage * tree.predict(data[i].x);
    }
    ensemble.trees.push_back(std::move(tree));
    const double current = objective();
    if (std::abs(previous - current) < 1e-12) break;
    previous = current;
  }
  return ensemble;
}

namespace {

using nlohmann::json;

json tree_to_json(const RegressionTree& tree) {
  json nodes = json::array();
  for (const auto& n : tree.nodes) {
    nodes.push_back(json::array({n.feature, n.threshold, n.left, n.right, n.value}));
  }
  return json{{"width", tree.width}, {"nodes", nodes}};
}

RegressionTree tree_from_json(const json& doc) {
  RegressionTree tree;
  tree.width = doc.at("width").get<size_t>();
  for (const auto& item : doc.at("nodes")) {
    if (!item.is_array() || item.size() != 5) {
      throw_data("E_PARSE", "tree node must be a 5-element array");
    }
    TreeNode node;
    node.feature = item[0].get<int32_t>();
    node.threshold = item[1].get<double>();
    node.left = item[2].get<int32_t>();
    node.right = item[3].get<int32_t>();
    node.value = item[4].get<double>();
    tree.nodes.push_back(node);
  }
  if (tree.nodes.empty()) throw_data("E_PARSE", "tree has no nodes");
  return tree;
}

json label_transform_json(const LabelTransform& t) {
  return json{{"mean", t.mean}, {"std", t.std}, {"floor", t.floor}};
}

LabelTransform label_transform_from(const json& doc) {
  LabelTransform t;
  t.mean = doc.at("mean").get<double>();
  t.std = doc.at("std").get<double>();
  t.floor = doc.at("floor").get<double>();
  return t;
}

json parse_ensemble_json(const std::string& text, const std::string& expected_kind) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw_data("E_PARSE", std::string("malformed model file: ") + e.what());
  }
  if (doc.value("format_version", 0) != 1) {
    throw_data("E_PARSE", "unsupported model format version");
  }
  if (doc.value("kind", "") != expected_kind) {
    throw_data("E_PARSE", "model kind is '" + doc.value("kind", std::string("?")) +
                              "', expected '" + expected_kind + "'");
  }
  return doc;
}

}  // namespace

std::string forest_to_json_text(const RandomForest& forest) {
  json doc;
  doc["format_version"] = 1;
  doc["kind"] = "random_forest";
  doc["width"] = forest.width;
  doc["tree_seeds"] = forest.tree_seeds;
  doc["label_transform"] = label_transform_json(forest.label_transform);
  json trees = json::array();
  for (const auto& tree : forest.trees) trees.push_back(tree_to_json(tree));
  doc["trees"] = trees;
  return doc.dump(2) + "\n";
}

RandomForest forest_from_json_text(const std::string& text) {
  const json doc = parse_ensemble_json(text, "random_forest");
  try {
    RandomForest forest;
    forest.width = doc.at("width").get<size_t>();
    forest.tree_seeds = doc.at("tree_seeds").get<std::vector<uint64_t>>();
    forest.label_transform = label_transform_from(doc.at("label_transform"));
    for (const auto& tree : doc.at("trees")) forest.trees.push_back(tree_from_json(tree));
    if (forest.trees.empty()) throw_data("E_PARSE", "forest has no trees");
    return forest;
  } catch (const json::exception& e) {
    throw_data("E_PARSE", std::string("malformed forest model: ") + e.what());
  }
}

std::string boosted_to_json_text(const BoostedEnsemble& ensemble) {
  json doc;
  doc["format_version"] = 1;
  doc["kind"] = "boosted";
  doc["width"] = ensemble.width;
  doc["initial"] = ensemble.initial;
  doc["shrinkage"] = ensemble.shrinkage;
  doc["label_transform"] = label_transform_json(ensemble.label_transform);
  json trees = json::array();
  for (const auto& tree : ensemble.trees) trees.push_back(tree_to_json(tree));
  doc["trees"] = trees;
  return doc.dump(2) + "\n";
}

BoostedEnsemble boosted_from_json_text(const std::string& text) {
  const json doc = parse_ensemble_json(text, "boosted");
  try {
    BoostedEnsemble ensemble;
    ensemble.width = doc.at("width").get<size_t>();
    ensemble.initial = doc.at("initial").get<double>();
    ensemble.shrinkage = doc.at("shrinkage").get<double>();
    ensemble.label_transform = label_transform_from(doc.at("label_transform"));
    for (const auto& tree : doc.at("trees")) ensemble.trees.push_back(tree_from_json(tree));
    if (ensemble.trees.empty()) throw_data("E_PARSE", "boosted ensemble has no trees");
    return ensemble;
  } catch (const json::exception& e) {
    throw_data("E_PARSE", std::string("malformed boosted model: ") + e.what());
  }
}

}  // namespace cardlab
