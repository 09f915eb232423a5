#include "cardlab/estimator.hpp"

#include <algorithm>
#include <filesystem>
#include <set>
#include <utility>

#include <json.hpp>

#include "cardlab/exec.hpp"

namespace cardlab {

namespace {

using nlohmann::json;

/// Turns an inverted selectivity into rows, clamped to the cartesian product.
double rows_from_selectivity(double selectivity, double cartesian) {
  return std::clamp(selectivity * cartesian, 0.0, cartesian);
}

void check_width(size_t model_width, const EncodingSpec& spec, const std::string& what) {
  if (model_width != spec.width()) {
    throw_data("E_SCHEMA", what + " expects input width " + std::to_string(model_width) +
                               " but the database encodes to width " +
                               std::to_string(spec.width()));
  }
}

class TruthEstimator final : public Estimator {
 public:
  TruthEstimator(const Database& db, std::string name) : db_(db), name_(std::move(name)) {}
  std::string name() const override { return name_; }
  size_t parameter_count() const override { return 0; }
  double estimate(const Query& q) const override {
    return static_cast<double>(cardinality(db_, q));
  }

 private:
  const Database& db_;
  std::string name_;
};

class HistogramEstimator final : public Estimator {
 public:
  HistogramEstimator(StatsCatalog stats, std::string name)
      : stats_(std::move(stats)), name_(std::move(name)) {}
  std::string name() const override { return name_; }
  size_t parameter_count() const override { return stats_.parameter_count(); }
  double estimate(const Query& q) const override { return estimate_query(stats_, q); }

 private:
  StatsCatalog stats_;
  std::string name_;
};

class DenseEstimator final : public Estimator {
 public:
  DenseEstimator(DenseNet net, EncodingSpec spec, const Database& db, std::string name)
      : net_(std::move(net)), spec_(std::move(spec)), db_(db), name_(std::move(name)) {
    check_width(net_.input_width, spec_, "dense model");
  }
  std::string name() const override { return name_; }
  size_t parameter_count() const override { return net_.parameter_count(); }
  double estimate(const Query& q) const override {
    const double t = net_.predict_transformed(encode_flat(spec_, q));
    return rows_from_selectivity(net_.label_transform.invert(t),
                                 db_.cartesian_rows(q.relations));
  }

 private:
  DenseNet net_;
  EncodingSpec spec_;
  const Database& db_;
  std::string name_;
};

class RecurrentEstimator final : public Estimator {
 public:
  RecurrentEstimator(RecurrentNet net, EncodingSpec spec, const Database& db, std::string name)
      : net_(std::move(net)), spec_(std::move(spec)), db_(db), name_(std::move(name)) {
    check_width(net_.input_width, spec_, "recurrent model");
  }
  std::string name() const override { return name_; }
  size_t parameter_count() const override { return net_.parameter_count(); }
  double estimate(const Query& q) const override {
    const FeatureSequence xs = encode_sequence(spec_, canonical_sequence(q));
    const double t = net_.predict_transformed(xs).back();
    return rows_from_selectivity(net_.label_transform.invert(t),
                                 db_.cartesian_rows(q.relations));
  }

 private:
  RecurrentNet net_;
  EncodingSpec spec_;
  const Database& db_;
  std::string name_;
};

class ForestEstimator final : public Estimator {
 public:
  ForestEstimator(RandomForest forest, EncodingSpec spec, const Database& db, std::string name)
      : forest_(std::move(forest)), spec_(std::move(spec)), db_(db), name_(std::move(name)) {
    check_width(forest_.width, spec_, "random forest");
  }
  std::string name() const override { return name_; }
  size_t parameter_count() const override { return forest_.parameter_count(); }
  double estimate(const Query& q) const override {
    const double t = forest_.predict(encode_flat(spec_, q));
    return rows_from_selectivity(forest_.label_transform.invert(t),
                                 db_.cartesian_rows(q.relations));
  }

 private:
  RandomForest forest_;
  EncodingSpec spec_;
  const Database& db_;
  std::string name_;
};

class BoostedEstimator final : public Estimator {
 public:
  BoostedEstimator(BoostedEnsemble ensemble, EncodingSpec spec, const Database& db,
                   std::string name)
      : ensemble_(std::move(ensemble)), spec_(std::move(spec)), db_(db),
        name_(std::move(name)) {
    check_width(ensemble_.width, spec_, "boosted ensemble");
  }
  std::string name() const override { return name_; }
  size_t parameter_count() const override { return ensemble_.parameter_count(); }
  double estimate(const Query& q) const override {
    const double t = ensemble_.predict(encode_flat(spec_, q));
    return rows_from_selectivity(ensemble_.label_transform.invert(t),
                                 db_.cartesian_rows(q.relations));
  }

 private:
  BoostedEnsemble ensemble_;
  EncodingSpec spec_;
  const Database& db_;
  std::string name_;
};

class MemoEstimator final : public Estimator {
 public:
  MemoEstimator(MemoTable table, EncodingSpec spec, std::string name)
      : table_(std::move(table)), spec_(std::move(spec)), name_(std::move(name)) {
    check_width(table_.width, spec_, "memo table");
  }
  std::string name() const override { return name_; }
  size_t parameter_count() const override { return table_.size_metric(); }
  double estimate(const Query& q) const override {
    return static_cast<double>(lookup(table_, encode_flat(spec_, q)).cardinality);
  }

 private:
  MemoTable table_;
  EncodingSpec spec_;
  std::string name_;
};

}  // namespace

JoinSequence canonical_sequence(const Query& q) {
  if (q.relations.empty()) throw_data("E_DATA", "cannot order an empty query");
  std::vector<std::string> names = q.relations;
  std::sort(names.begin(), names.end());

  JoinSequence seq;
  std::set<std::string> joined;
  seq.steps.push_back({names[0], q.selections_on(names[0]), std::nullopt});
  joined.insert(names[0]);
  while (joined.size() < names.size()) {
    const std::string* next = nullptr;
    const JoinEdge* via = nullptr;
    for (const auto& name : names) {  // ascending, so the first hit is smallest
      if (joined.count(name) != 0) continue;
      for (const auto& edge : q.join_predicates) {
        const bool fk_side = edge.fk.relation == name && joined.count(edge.pk.relation) != 0;
        const bool pk_side = edge.pk.relation == name && joined.count(edge.fk.relation) != 0;
        if (fk_side || pk_side) {
          next = &name;
          via = &edge;
          break;
        }
      }
      if (next != nullptr) break;
    }
    if (next == nullptr) throw_data("E_DATA", "query join graph is not connected");
    seq.steps.push_back({*next, q.selections_on(*next), *via});
    joined.insert(*next);
  }
  return seq;
}

std::unique_ptr<Estimator> make_truth_estimator(const Database& db, std::string name) {
  return std::make_unique<TruthEstimator>(db, std::move(name));
}

std::unique_ptr<Estimator> make_histogram_estimator(StatsCatalog stats, std::string name) {
  return std::make_unique<HistogramEstimator>(std::move(stats), std::move(name));
}

std::unique_ptr<Estimator> make_histogram_estimator(const Database& db, size_t bins,
                                                    std::string name) {
  return std::make_unique<HistogramEstimator>(build_stats(db, bins), std::move(name));
}

std::unique_ptr<Estimator> make_dense_estimator(DenseNet net, EncodingSpec spec,
                                                const Database& db, std::string name) {
  return std::make_unique<DenseEstimator>(std::move(net), std::move(spec), db,
                                          std::move(name));
}

std::unique_ptr<Estimator> make_recurrent_estimator(RecurrentNet net, EncodingSpec spec,
                                                    const Database& db, std::string name) {
  return std::make_unique<RecurrentEstimator>(std::move(net), std::move(spec), db,
                                              std::move(name));
}

std::unique_ptr<Estimator> make_forest_estimator(RandomForest forest, EncodingSpec spec,
                                                 const Database& db, std::string name) {
  return std::make_unique<ForestEstimator>(std::move(forest), std::move(spec), db,
                                           std::move(name));
}

std::unique_ptr<Estimator> make_boosted_estimator(BoostedEnsemble ensemble, EncodingSpec spec,
                                                  const Database& db, std::string name) {
  return std::make_unique<BoostedEstimator>(std::move(ensemble), std::move(spec), db,
                                            std::move(name));
}

std::unique_ptr<Estimator> make_memo_estimator(MemoTable table, EncodingSpec spec,
                                               std::string name) {
  return std::make_unique<MemoEstimator>(std::move(table), std::move(spec), std::move(name));
}

std::unique_ptr<Estimator> load_estimator(const std::string& path, const Database& db,
                                          std::string name) {
  if (!std::filesystem::exists(path)) {
    throw Error("E_MODEL_NOT_FOUND", "no model file at '" + path + "'");
  }
  const std::string text = read_text_file(path);
  const json doc = json::parse(text, nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) {
    throw_data("E_PARSE", "model file '" + path + "' is not a JSON object");
  }
  if (name.empty()) {
    name = std::filesystem::path(path).stem().string();
    // "rf.model.json" names the estimator "rf", not "rf.model".
    if (name.size() > 6 && name.ends_with(".model")) name.resize(name.size() - 6);
  }

  const std::string kind = doc.value("kind", "");
  if (kind == "dense") {
    return make_dense_estimator(dense_from_json_text(text), build_spec(db), db, name);
  }
  if (kind == "recurrent") {
    return make_recurrent_estimator(recurrent_from_json_text(text), build_spec(db), db, name);
  }
  if (kind == "random_forest") {
    return make_forest_estimator(forest_from_json_text(text), build_spec(db), db, name);
  }
  if (kind == "boosted") {
    return make_boosted_estimator(boosted_from_json_text(text), build_spec(db), db, name);
  }
  if (kind == "memo") {
    return make_memo_estimator(memo_from_json_text(text), build_spec(db), name);
  }
  if (kind.empty() && doc.contains("bins") && doc.contains("columns")) {
    return make_histogram_estimator(stats_from_json_text(text), name);
  }
  throw_data("E_SCHEMA", "unrecognized model kind '" + kind + "' in '" + path + "'");
}

}  // namespace cardlab
