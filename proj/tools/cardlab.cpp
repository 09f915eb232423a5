// cardlab — command-line surface for the cardinality-estimation laboratory.
//
// Subcommands: gen-data, gen-workload, label, train, evaluate, robustness,
// active-learn, plan-impact. Every subcommand accepts --seed, --out-dir,
// --config (a JSON file mirroring the flags), and --jobs. Outputs are
// deterministic per seed; timing never lands in an output file. On error a
// single machine-parsable line `CODE: message` goes to stderr, partial
// outputs are removed, and the exit code is 2 (usage), 3 (data), or 4
// (training divergence).

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <limits>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "cardlab/database.hpp"
#include "cardlab/estimator.hpp"
#include "cardlab/evalx.hpp"
#include "cardlab/exec.hpp"
#include "cardlab/featurize.hpp"
#include "cardlab/forest.hpp"
#include "cardlab/histo.hpp"
#include "cardlab/lab.hpp"
#include "cardlab/memo.hpp"
#include "cardlab/neural.hpp"
#include "cardlab/planner.hpp"
#include "cardlab/query.hpp"
#include "cardlab/schema.hpp"
#include "cardlab/workload.hpp"

namespace {

using namespace cardlab;
using nlohmann::json;
namespace fs = std::filesystem;

/// Remembers every path a subcommand starts writing so a failure can remove
/// partial outputs.
struct OutputTracker {
  std::vector<fs::path> paths;
  void track(const fs::path& p) { paths.push_back(p); }
  void discard_all() {
    std::error_code ec;
    for (const auto& p : paths) fs::remove_all(p, ec);
  }
};

void emit(OutputTracker& tracker, const std::string& path, const std::string& text) {
  tracker.track(path);
  write_text_file(path, text);
  std::cout << "wrote " << path << "\n";
}

// ---------------------------------------------------------------------------
// Flag parsing helpers.

uint64_t parse_u64(const std::string& text, const std::string& what) {
  uint64_t value = 0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), value);
  if (res.ec != std::errc{} || res.ptr != text.data() + text.size()) {
    throw_usage(what + " must be a non-negative integer, got '" + text + "'");
  }
  return value;
}

struct ArchSpec {
  size_t width = 100;
  size_t depth = 1;
};

/// "<width>w,<depth>d", e.g. "100w,1d".
ArchSpec parse_arch(const std::string& text) {
  const size_t w_pos = text.find('w');
  const bool shaped = w_pos != std::string::npos && w_pos + 1 < text.size() &&
                      text[w_pos + 1] == ',' && !text.empty() && text.back() == 'd';
  if (!shaped) throw_usage("--arch must look like '100w,1d', got '" + text + "'");
  ArchSpec arch;
  arch.width = parse_u64(text.substr(0, w_pos), "--arch width");
  arch.depth = parse_u64(text.substr(w_pos + 2, text.size() - w_pos - 3), "--arch depth");
  if (arch.width == 0 || arch.depth == 0) throw_usage("--arch width and depth must be >= 1");
  return arch;
}

/// "4join" or plain "4": the number of relations each query joins.
size_t parse_complexity(const std::string& text) {
  std::string digits = text;
  if (digits.size() > 4 && digits.substr(digits.size() - 4) == "join") {
    digits = digits.substr(0, digits.size() - 4);
  }
  const size_t n = parse_u64(digits, "--complexity");
  if (n == 0) throw_usage("--complexity must join at least 1 relation");
  return n;
}

/// "500" (every relation) or "A=100,B=50,..." (every relation listed).
std::map<std::string, size_t> parse_rows(const std::string& text,
                                         const DatabaseSchema& schema) {
  std::map<std::string, size_t> rows;
  if (text.find('=') == std::string::npos) {
    const size_t n = parse_u64(text, "--rows");
    for (const auto& rel : schema.relations) rows[rel.name] = n;
    return rows;
  }
  std::stringstream stream(text);
  std::string part;
  while (std::getline(stream, part, ',')) {
    const size_t eq = part.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw_usage("--rows entries must look like 'name=count', got '" + part + "'");
    }
    rows[part.substr(0, eq)] = parse_u64(part.substr(eq + 1), "--rows count");
  }
  for (const auto& rel : schema.relations) {
    if (rows.count(rel.name) == 0) {
      throw_usage("--rows is missing a count for relation '" + rel.name + "'");
    }
  }
  for (const auto& [name, n] : rows) {
    if (schema.find_relation(name) == nullptr) {
      throw_usage("--rows names unknown relation '" + name + "'");
    }
  }
  return rows;
}

std::vector<std::string> split_list(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::stringstream stream(text);
  std::string part;
  while (std::getline(stream, part, sep)) {
    if (!part.empty()) out.push_back(part);
  }
  return out;
}

std::string sanitize(const std::string& name) {
  std::string out = name;
  for (char& c : out) {
    if (std::isalnum(static_cast<unsigned char>(c)) == 0 && c != '-' && c != '_') c = '_';
  }
  return out;
}

// ---------------------------------------------------------------------------
// Config file overlay: a JSON object whose keys mirror the long flags with
// dashes turned into underscores. A config value applies only when the flag
// was not given on the command line.

json load_config(const std::string& path) {
  if (path.empty()) return json::object();
  const json doc = json::parse(read_text_file(path), nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) {
    throw_data("E_PARSE", "config file '" + path + "' is not a JSON object");
  }
  return doc;
}

std::string config_key(const std::string& flag) {
  std::string key = flag.substr(flag.find_first_not_of('-'));
  std::replace(key.begin(), key.end(), '-', '_');
  return key;
}

class Overlay {
 public:
  Overlay(const CLI::App& cmd, const json& cfg) : cmd_(cmd), cfg_(cfg) {}

  template <class T>
  void get(const std::string& flag, T& target) const {
    if (cmd_.count(flag) > 0) return;
    const std::string key = config_key(flag);
    if (!cfg_.contains(key)) return;
    const json& value = cfg_.at(key);
    try {
      if constexpr (std::is_same_v<T, std::vector<std::string>>) {
        if (value.is_string()) {
          target = split_list(value.get<std::string>(), ',');
          return;
        }
      }
      target = value.get<T>();
    } catch (const json::exception&) {
      throw_usage("config key '" + key + "' has the wrong type");
    }
  }

 private:
  const CLI::App& cmd_;
  const json& cfg_;
};

// ---------------------------------------------------------------------------
// Shared option bundles.

struct CommonArgs {
  uint64_t seed = 1;
  std::string out_dir = ".";
  std::string config_path;
  size_t jobs = 1;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--seed", args.seed, "Master random seed");
  cmd->add_option("--out-dir", args.out_dir, "Directory receiving output files");
  cmd->add_option("--config", args.config_path, "JSON config file mirroring the flags");
  cmd->add_option("--jobs", args.jobs, "Worker threads for parallel stages");
}

void overlay_common(const Overlay& o, CommonArgs& args) {
  o.get("--seed", args.seed);
  o.get("--out-dir", args.out_dir);
  o.get("--jobs", args.jobs);
}

std::string out_path(const CommonArgs& args, const std::string& filename) {
  fs::create_directories(args.out_dir);
  return (fs::path(args.out_dir) / filename).string();
}

struct TrainFlags {
  std::string arch = "100w,1d";
  double lr = 1e-3;
  size_t batch = 32;
  size_t epochs = 500;
  size_t patience = 20;
  double min_delta = 1e-4;
  double weight_decay = 0.0;
  size_t trees = 32;
  int64_t max_depth = -1;  // -1: pick a per-model default
  size_t min_leaf = 1;
  double shrinkage = 0.1;
  double label_floor = 0.0;  // 0: fit to the data, capped at 1e-9
};

/// Floor for the log-selectivity target: small enough that no positive
/// training selectivity gets clamped, never above the 1e-9 default.
double resolve_label_floor(const TrainFlags& flags, const std::vector<double>& sels) {
  if (flags.label_floor > 0.0) return flags.label_floor;
  double min_positive = std::numeric_limits<double>::infinity();
  for (double s : sels) {
    if (s > 0.0) min_positive = std::min(min_positive, s);
  }
  if (!std::isfinite(min_positive)) return 1e-9;
  return std::min(1e-9, 0.5 * min_positive);
}

void add_train_flags(CLI::App* cmd, TrainFlags& args) {
  cmd->add_option("--arch", args.arch, "Network shape '<width>w,<depth>d'");
  cmd->add_option("--lr", args.lr, "Adam learning rate");
  cmd->add_option("--batch", args.batch, "Minibatch size");
  cmd->add_option("--epochs", args.epochs, "Maximum training epochs");
  cmd->add_option("--patience", args.patience, "Early-stopping patience in epochs");
  cmd->add_option("--min-delta", args.min_delta, "Relative validation improvement threshold");
  cmd->add_option("--weight-decay", args.weight_decay, "L2 penalty on the gradients");
  cmd->add_option("--trees", args.trees, "Trees (rf) or boosting stages (gbt)");
  cmd->add_option("--max-depth", args.max_depth,
                  "Tree depth limit; 0 = unlimited (default: rf unlimited, gbt 4)");
  cmd->add_option("--min-leaf", args.min_leaf, "Minimum samples per leaf");
  cmd->add_option("--shrinkage", args.shrinkage, "Boosting learning rate in (0, 1]");
  cmd->add_option("--label-floor", args.label_floor,
                  "Selectivity floor for the log target; 0 fits it to the data");
}

void overlay_train_flags(const Overlay& o, TrainFlags& args) {
  o.get("--arch", args.arch);
  o.get("--lr", args.lr);
  o.get("--batch", args.batch);
  o.get("--epochs", args.epochs);
  o.get("--patience", args.patience);
  o.get("--min-delta", args.min_delta);
  o.get("--weight-decay", args.weight_decay);
  o.get("--trees", args.trees);
  o.get("--max-depth", args.max_depth);
  o.get("--min-leaf", args.min_leaf);
  o.get("--shrinkage", args.shrinkage);
  o.get("--label-floor", args.label_floor);
}

// ---------------------------------------------------------------------------
// Shared pipeline pieces.

std::vector<LabeledExample> load_labeled(const std::string& path,
                                         const DatabaseSchema& schema) {
  std::vector<LabeledExample> examples = load_workload(path, schema);
  if (examples.empty()) throw_data("E_DATA", "workload '" + path + "' is empty");
  for (const auto& ex : examples) {
    if (!ex.labeled()) {
      throw_data("E_DATA", "workload '" + path + "' contains unlabeled queries; run label");
    }
  }
  return examples;
}

/// Deterministic 90/10 train/validation split (at least one validation row).
std::pair<std::vector<size_t>, std::vector<size_t>> split_indices(size_t n, uint64_t seed) {
  std::vector<size_t> order(n);
  for (size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(derive_seed(seed, "val-split"));
  rng.shuffle(order);
  const size_t val_n = std::max<size_t>(1, n / 10);
  std::vector<size_t> validation(order.begin(), order.begin() + val_n);
  std::vector<size_t> train(order.begin() + val_n, order.end());
  return {train, validation};
}

size_t clamp_batch(size_t batch, size_t train_size) {
  if (batch <= train_size) return batch;
  std::cerr << "note: reducing batch size to the training-set size " << train_size << "\n";
  return train_size;
}

json report_from(const TrainReport& report) {
  json out;
  out["epochs"] = report.epochs;
  out["stopping_reason"] = report.stopping_reason;
  out["best_validation_mse"] = report.best_validation_mse;
  out["train_mse"] = report.train_mse;
  out["validation_mse"] = report.validation_mse;
  return out;  // wall-clock intentionally omitted: reports are seed-reproducible
}

struct TrainedDense {
  DenseNet net;
  json report;
};

TrainedDense train_dense_on(const std::vector<LabeledExample>& examples,
                            const EncodingSpec& spec, const ArchSpec& arch,
                            const TrainFlags& flags, bool grid, uint64_t seed) {
  if (examples.size() < 2) throw_data("E_DATA", "need at least 2 labeled examples");
  std::vector<double> selectivities;
  for (const auto& ex : examples) selectivities.push_back(ex.selectivity);

  const auto [train_idx, val_idx] = split_indices(examples.size(), seed);
  std::vector<double> train_sel;
  for (size_t i : train_idx) train_sel.push_back(examples[i].selectivity);
  const LabelTransform lt = fit_label_transform(train_sel, resolve_label_floor(flags, train_sel));

  std::vector<FlatExample> train_set, val_set;
  for (size_t i : train_idx) {
    train_set.push_back({encode_flat(spec, examples[i].query),
                         lt.apply(examples[i].selectivity)});
  }
  for (size_t i : val_idx) {
    val_set.push_back({encode_flat(spec, examples[i].query),
                       lt.apply(examples[i].selectivity)});
  }

  TrainHyper hyper;
  hyper.lr = flags.lr;
  hyper.batch = clamp_batch(flags.batch, train_set.size());
  hyper.max_epochs = flags.epochs;
  hyper.patience = flags.patience;
  hyper.min_delta = flags.min_delta;
  hyper.weight_decay = flags.weight_decay;

  TrainedDense result;
  result.report["train_examples"] = train_set.size();
  result.report["validation_examples"] = val_set.size();
  if (grid) {
    GridSpec gs;
    gs.learning_rates = {1e-2, 1e-3, 1e-4};
    gs.batch_sizes = {std::min<size_t>(16, train_set.size()),
                      std::min<size_t>(64, train_set.size())};
    gs.epochs_per_cell = std::min<size_t>(100, flags.epochs);
    gs.extension_max_epochs = flags.epochs;
    gs.base = hyper;
    const GridResult grid_result =
        grid_search({arch.width, arch.depth, true}, train_set, val_set, gs,
                    derive_seed(seed, "grid"));
    result.net = grid_result.model;
    json cells = json::array();
    for (const auto& cell : grid_result.cells) {
      cells.push_back({{"lr", cell.lr},
                       {"batch", cell.batch},
                       {"final_validation_mse", cell.final_validation_mse},
                       {"diverged", cell.diverged}});
    }
    result.report["grid"] = {{"cells", cells},
                             {"best_lr", grid_result.best.lr},
                             {"best_batch", grid_result.best.batch}};
    result.report.update(report_from(grid_result.extension));
  } else {
    result.net = init_dense(spec.width(), arch.width, arch.depth, derive_seed(seed, "init"));
    const TrainReport report =
        train(result.net, train_set, val_set, hyper, derive_seed(seed, "train"));
    result.report.update(report_from(report));
  }
  result.net.label_transform = lt;
  result.report["parameter_count"] = result.net.parameter_count();
  return result;
}

struct TrainedForest {
  RandomForest forest;
  json report;
};

TrainedForest train_forest_on(const std::vector<LabeledExample>& examples,
                              const EncodingSpec& spec, const TrainFlags& flags,
                              uint64_t seed, size_t jobs) {
  std::vector<double> selectivities;
  for (const auto& ex : examples) selectivities.push_back(ex.selectivity);
  const LabelTransform lt =
      fit_label_transform(selectivities, resolve_label_floor(flags, selectivities));
  std::vector<FlatExample> data;
  for (const auto& ex : examples) {
    data.push_back({encode_flat(spec, ex.query), lt.apply(ex.selectivity)});
  }
  TreeParams params;
  params.max_depth = flags.max_depth < 0 ? 0 : static_cast<size_t>(flags.max_depth);
  params.min_samples_leaf = flags.min_leaf;
  TrainedForest result;
  result.forest = fit_forest(data, flags.trees, params, derive_seed(seed, "forest"), true,
                             jobs);
  result.forest.label_transform = lt;
  result.report = {{"trees", result.forest.trees.size()},
                   {"parameter_count", result.forest.parameter_count()}};
  return result;
}

struct TrainedBoosted {
  BoostedEnsemble ensemble;
  json report;
};

TrainedBoosted train_boosted_on(const std::vector<LabeledExample>& examples,
                                const EncodingSpec& spec, const TrainFlags& flags) {
  std::vector<double> selectivities;
  for (const auto& ex : examples) selectivities.push_back(ex.selectivity);
  const LabelTransform lt =
      fit_label_transform(selectivities, resolve_label_floor(flags, selectivities));
  std::vector<FlatExample> data;
  for (const auto& ex : examples) {
    data.push_back({encode_flat(spec, ex.query), lt.apply(ex.selectivity)});
  }
  TreeParams params;
  params.max_depth = flags.max_depth < 0 ? 4 : static_cast<size_t>(flags.max_depth);
  params.min_samples_leaf = flags.min_leaf;
  TrainedBoosted result;
  result.ensemble = fit_boosted(data, flags.trees, flags.shrinkage, params);
  result.ensemble.label_transform = lt;
  result.report = {{"stages", result.ensemble.trees.size()},
                   {"shrinkage", flags.shrinkage},
                   {"parameter_count", result.ensemble.parameter_count()}};
  return result;
}

int64_t rounded_estimate(const Estimator& est, const Query& q) {
  return std::llround(est.estimate(q));
}

std::vector<ErrorRecord> evaluate_estimator(const Estimator& est,
                                            const std::vector<LabeledExample>& test) {
  std::vector<int64_t> truths, estimates;
  std::vector<std::string> tags;
  for (const auto& ex : test) {
    truths.push_back(ex.cardinality);
    estimates.push_back(rounded_estimate(est, ex.query));
    tags.push_back(std::to_string(ex.query.relations.size()) + "join");
  }
  return compute_errors(truths, estimates, est.name(), tags);
}

std::vector<double> absolute_errors_of(const std::vector<ErrorRecord>& records) {
  std::vector<double> out;
  out.reserve(records.size());
  for (const auto& rec : records) out.push_back(rec.absolute_error);
  return out;
}

std::string fmt_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

// ---------------------------------------------------------------------------
// gen-data

struct GenDataArgs {
  CommonArgs common;
  std::string schema_path;
  std::string rows_spec;
};

void run_gen_data(const CLI::App& cmd, GenDataArgs& args, OutputTracker& tracker) {
  const json cfg = load_config(args.common.config_path);
  const Overlay o(cmd, cfg);
  overlay_common(o, args.common);
  o.get("--schema", args.schema_path);
  o.get("--rows", args.rows_spec);
  if (args.schema_path.empty()) throw_usage("gen-data requires --schema");
  if (args.rows_spec.empty()) throw_usage("gen-data requires --rows");

  const DatabaseSchema schema = load_schema(args.schema_path);
  const auto rows = parse_rows(args.rows_spec, schema);
  const Database db =
      generate_synthetic(schema, rows, derive_seed(args.common.seed, "data"));

  const std::string dir = out_path(args.common, "db");
  tracker.track(dir);
  save_database(db, dir);
  std::cout << "wrote " << db.relations.size() << " relations to " << dir << "\n";
}

// ---------------------------------------------------------------------------
// gen-workload

struct GenWorkloadArgs {
  CommonArgs common;
  std::string db_dir;
  std::string complexity = "2join";
  size_t n = 100;
};

void run_gen_workload(const CLI::App& cmd, GenWorkloadArgs& args, OutputTracker& tracker) {
  const json cfg = load_config(args.common.config_path);
  const Overlay o(cmd, cfg);
  overlay_common(o, args.common);
  o.get("--db", args.db_dir);
  o.get("--complexity", args.complexity);
  o.get("--n", args.n);
  if (args.db_dir.empty()) throw_usage("gen-workload requires --db");
  if (args.n == 0) throw_usage("--n must be at least 1");

  const Database db = load_database(args.db_dir);
  const size_t complexity = parse_complexity(args.complexity);
  const auto examples = generate_workload(db, complexity, args.n,
                                          derive_seed(args.common.seed, "workload"));
  const std::string path = out_path(args.common, "workload.jsonl");
  tracker.track(path);
  save_workload(examples, path);
  std::cout << "wrote " << examples.size() << " queries to " << path << "\n";
}

// ---------------------------------------------------------------------------
// label

struct LabelArgs {
  CommonArgs common;
  std::string db_dir;
  std::string workload_path;
  bool prefixes = false;
};

void run_label(const CLI::App& cmd, LabelArgs& args, OutputTracker& tracker) {
  const json cfg = load_config(args.common.config_path);
  const Overlay o(cmd, cfg);
  overlay_common(o, args.common);
  o.get("--db", args.db_dir);
  o.get("--workload", args.workload_path);
  o.get("--prefixes", args.prefixes);
  if (args.db_dir.empty()) throw_usage("label requires --db");
  if (args.workload_path.empty()) throw_usage("label requires --workload");

  const Database db = load_database(args.db_dir);
  std::vector<LabeledExample> examples = load_workload(args.workload_path, db.schema);
  label(db, examples, args.prefixes, args.common.jobs);
  const std::string path = out_path(args.common, "labeled.jsonl");
  tracker.track(path);
  save_workload(examples, path);
  std::cout << "labeled " << examples.size() << " queries into " << path << "\n";
}

// ---------------------------------------------------------------------------
// train

struct TrainArgs {
  CommonArgs common;
  std::string model = "nn";
  std::string db_dir;
  std::string train_path;
  bool grid = false;
  TrainFlags flags;
};

void run_train(const CLI::App& cmd, TrainArgs& args, OutputTracker& tracker) {
  const json cfg = load_config(args.common.config_path);
  const Overlay o(cmd, cfg);
  overlay_common(o, args.common);
  o.get("--model", args.model);
  o.get("--db", args.db_dir);
  o.get("--train", args.train_path);
  o.get("--grid", args.grid);
  overlay_train_flags(o, args.flags);
  if (args.db_dir.empty()) throw_usage("train requires --db");
  if (args.train_path.empty()) throw_usage("train requires --train");
  const std::set<std::string> known{"nn", "rnn", "rf", "gbt", "memo"};
  if (known.count(args.model) == 0) {
    throw_usage("--model must be one of nn|rnn|rf|gbt|memo, got '" + args.model + "'");
  }
  if (args.grid && args.model != "nn") throw_usage("--grid applies to --model nn only");

  const Database db = load_database(args.db_dir);
  const EncodingSpec spec = build_spec(db);
  const std::vector<LabeledExample> examples = load_labeled(args.train_path, db.schema);
  const ArchSpec arch = parse_arch(args.flags.arch);
  const uint64_t seed = args.common.seed;

  const std::string model_path = out_path(args.common, args.model + ".model.json");
  const std::string report_path = out_path(args.common, args.model + ".train_report.json");
  json report;
  report["model"] = args.model;

  if (args.model == "nn") {
    TrainedDense trained =
        train_dense_on(examples, spec, arch, args.flags, args.grid, seed);
    report.update(trained.report);
    report["arch"] = {{"width", arch.width}, {"depth", arch.depth}};
    emit(tracker, model_path, dense_to_json_text(trained.net));
  } else if (args.model == "rnn") {
    if (examples.size() < 2) throw_data("E_DATA", "need at least 2 labeled examples");
    std::vector<double> all_prefix_sel;
    for (const auto& ex : examples) {
      if (ex.prefix_selectivities.size() != ex.sequence.steps.size()) {
        throw_data("E_DATA",
                   "rnn training needs per-prefix labels; run label with --prefixes");
      }
    }
    const auto [train_idx, val_idx] = split_indices(examples.size(), seed);
    std::vector<double> train_sel;
    for (size_t i : train_idx) {
      for (double s : examples[i].prefix_selectivities) train_sel.push_back(s);
    }
    const LabelTransform lt = fit_label_transform(train_sel, resolve_label_floor(args.flags, train_sel));
    auto to_seq = [&](size_t i) {
      SeqExample se;
      se.xs = encode_sequence(spec, examples[i].sequence);
      for (double s : examples[i].prefix_selectivities) se.ys.push_back(lt.apply(s));
      return se;
    };
    std::vector<SeqExample> train_set, val_set;
    for (size_t i : train_idx) train_set.push_back(to_seq(i));
    for (size_t i : val_idx) val_set.push_back(to_seq(i));

    RecurrentNet net = init_recurrent(spec.width(), arch.width, arch.depth,
                                      derive_seed(seed, "init"));
    net.label_transform = lt;
    TrainHyper hyper;
    hyper.lr = args.flags.lr;
    hyper.batch = clamp_batch(args.flags.batch, train_set.size());
    hyper.max_epochs = args.flags.epochs;
    hyper.patience = args.flags.patience;
    hyper.min_delta = args.flags.min_delta;
    hyper.weight_decay = args.flags.weight_decay;
    const TrainReport train_report =
        train(net, train_set, val_set, hyper, derive_seed(seed, "train"));
    report.update(report_from(train_report));
    report["arch"] = {{"width", arch.width}, {"depth", arch.depth}};
    report["train_examples"] = train_set.size();
    report["validation_examples"] = val_set.size();
    report["parameter_count"] = net.parameter_count();
    emit(tracker, model_path, recurrent_to_json_text(net));
  } else if (args.model == "rf") {
    TrainedForest trained =
        train_forest_on(examples, spec, args.flags, seed, args.common.jobs);
    report.update(trained.report);
    emit(tracker, model_path, forest_to_json_text(trained.forest));
  } else if (args.model == "gbt") {
    TrainedBoosted trained = train_boosted_on(examples, spec, args.flags);
    report.update(trained.report);
    emit(tracker, model_path, boosted_to_json_text(trained.ensemble));
  } else {  // memo
    const MemoTable table = build_memo(examples, spec);
    report["entries"] = table.keys.size();
    report["examples_seen"] = table.examples_seen;
    report["size_metric"] = table.size_metric();
    emit(tracker, model_path, memo_to_json_text(table));
  }

  emit(tracker, report_path, report.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// evaluate

struct EvaluateArgs {
  CommonArgs common;
  std::string db_dir;
  std::string test_path;
  std::vector<std::string> models;
  size_t bins = 100;
  size_t budget = 0;
  bool knee_halve = false;
};

void run_evaluate(const CLI::App& cmd, EvaluateArgs& args, OutputTracker& tracker) {
  const json cfg = load_config(args.common.config_path);
  const Overlay o(cmd, cfg);
  overlay_common(o, args.common);
  o.get("--db", args.db_dir);
  o.get("--test", args.test_path);
  o.get("--models", args.models);
  o.get("--bins", args.bins);
  o.get("--budget", args.budget);
  o.get("--knee-halve", args.knee_halve);
  if (args.db_dir.empty()) throw_usage("evaluate requires --db");
  if (args.test_path.empty()) throw_usage("evaluate requires --test");

  const Database db = load_database(args.db_dir);
  const std::vector<LabeledExample> test = load_labeled(args.test_path, db.schema);

  // The equi-depth histogram baseline is always evaluated alongside.
  std::vector<std::unique_ptr<Estimator>> estimators;
  estimators.push_back(make_histogram_estimator(db, args.bins));
  for (const auto& path : args.models) estimators.push_back(load_estimator(path, db));

  std::vector<ErrorRecord> all_records;
  std::vector<TradeoffRow> rows;
  std::vector<std::vector<ErrorRecord>> per_estimator;
  for (const auto& est : estimators) {
    auto records = evaluate_estimator(*est, test);
    rows.push_back(tradeoff_row(est->name(), records, est->parameter_count(), 0.0));
    all_records.insert(all_records.end(), records.begin(), records.end());
    per_estimator.push_back(std::move(records));
  }

  emit(tracker, out_path(args.common, "errors.csv"), errors_csv(all_records));
  emit(tracker, out_path(args.common, "tradeoff.csv"), tradeoff_csv(rows));
  emit(tracker, out_path(args.common, "tradeoff.dat"), tradeoff_gnuplot(rows));
  for (size_t i = 0; i < estimators.size(); ++i) {
    emit(tracker,
         out_path(args.common, "cdf_" + sanitize(estimators[i]->name()) + ".csv"),
         cdf_csv(absolute_errors_of(per_estimator[i])));
  }

  // Easy/hard split at the knee of the baseline error CDF.
  std::ostringstream splits;
  splits << "# split at the knee of the histogram baseline's absolute-error CDF\n";
  splits << "estimator,knee,halved,easy_count,hard_count,easy_median_abs,hard_median_abs\n";
  try {
    const double k = knee(absolute_errors_of(per_estimator[0]), args.knee_halve);
    const CdfSplit split = split_easy_hard(per_estimator[0], k, args.knee_halve);
    for (size_t i = 0; i < estimators.size(); ++i) {
      std::vector<double> easy, hard;
      for (size_t idx : split.easy) easy.push_back(per_estimator[i][idx].absolute_error);
      for (size_t idx : split.hard) hard.push_back(per_estimator[i][idx].absolute_error);
      splits << estimators[i]->name() << ',' << fmt_double(k) << ','
             << (args.knee_halve ? 1 : 0) << ',' << easy.size() << ',' << hard.size() << ','
             << (easy.empty() ? "" : fmt_double(median(easy))) << ','
             << (hard.empty() ? "" : fmt_double(median(hard))) << '\n';
    }
  } catch (const Error& e) {
    splits << "# knee unavailable: " << e.what() << "\n";
  }
  emit(tracker, out_path(args.common, "splits.csv"), splits.str());

  if (cmd.count("--budget") > 0 || cfg.contains("budget")) {
    std::vector<BudgetCandidate> candidates;
    for (size_t i = 0; i < estimators.size(); ++i) {
      candidates.push_back({estimators[i]->name(), estimators[i]->parameter_count(),
                            absolute_errors_of(per_estimator[i])});
    }
    const auto pick = select_within_budget(candidates, args.budget);
    emit(tracker, out_path(args.common, "budget.txt"),
         (pick.has_value() ? candidates[*pick].name : std::string("none")) + "\n");
  }
}

// ---------------------------------------------------------------------------
// robustness

struct RobustnessArgs {
  CommonArgs common;
  std::string db_dir;
  std::string workload_path;
  std::string scenario;
  TrainFlags flags;
};

void run_robustness(const CLI::App& cmd, RobustnessArgs& args, OutputTracker& tracker) {
  const json cfg = load_config(args.common.config_path);
  const Overlay o(cmd, cfg);
  overlay_common(o, args.common);
  o.get("--db", args.db_dir);
  o.get("--workload", args.workload_path);
  o.get("--scenario", args.scenario);
  overlay_train_flags(o, args.flags);
  if (args.db_dir.empty()) throw_usage("robustness requires --db");
  if (args.workload_path.empty()) throw_usage("robustness requires --workload");
  if (args.scenario.empty()) throw_usage("robustness requires --scenario");

  const Database db = load_database(args.db_dir);
  const EncodingSpec spec = build_spec(db);
  const std::vector<LabeledExample> examples = load_labeled(args.workload_path, db.schema);
  const uint64_t seed = args.common.seed;

  std::vector<LabeledExample> kept, held_out;
  if (args.scenario.rfind("remove-selection:", 0) == 0) {
    const auto parts = split_list(args.scenario.substr(17), ':');
    if (parts.size() != 2) {
      throw_usage("--scenario remove-selection wants 'remove-selection:<rel.col>:<frac>'");
    }
    const ColumnRef column = ColumnRef::parse(parts[0]);
    double fraction = 0.0;
    try {
      fraction = std::stod(parts[1]);
    } catch (const std::exception&) {
      throw_usage("scenario fraction must be a number, got '" + parts[1] + "'");
    }
    if (fraction <= 0.0 || fraction > 1.0) throw_usage("scenario fraction must be in (0, 1]");
    std::tie(kept, held_out) = remove_selection_values(examples, db, column, fraction,
                                                       derive_seed(seed, "scenario"));
  } else if (args.scenario.rfind("remove-join:", 0) == 0) {
    const auto rels = split_list(args.scenario.substr(12), ',');
    if (rels.empty()) throw_usage("--scenario remove-join wants 'remove-join:<rel,rel,...>'");
    std::tie(kept, held_out) = remove_join(examples, rels);
  } else {
    throw_usage("--scenario must start with remove-selection: or remove-join:");
  }
  if (kept.size() < 2) throw_data("E_DATA", "scenario keeps too few training examples");
  if (held_out.empty()) throw_data("E_DATA", "scenario holds out no examples");

  const ArchSpec arch = parse_arch(args.flags.arch);
  TrainedDense nn = train_dense_on(kept, spec, arch, args.flags, false, seed);
  TrainedForest rf = train_forest_on(kept, spec, args.flags, seed, args.common.jobs);
  TrainedBoosted gbt = train_boosted_on(kept, spec, args.flags);
  const MemoTable memo_table = build_memo(kept, spec);

  std::vector<std::unique_ptr<Estimator>> estimators;
  estimators.push_back(make_dense_estimator(std::move(nn.net), spec, db, "nn"));
  estimators.push_back(make_forest_estimator(std::move(rf.forest), spec, db, "rf"));
  estimators.push_back(make_boosted_estimator(std::move(gbt.ensemble), spec, db, "gbt"));
  estimators.push_back(make_memo_estimator(memo_table, spec, "memo"));

  std::ostringstream table;
  table << "# absolute errors in tuples over the held-out scenario split; "
           "relative_error = |estimate - true| / max(true, 1)\n";
  table << "scenario,estimator,kept,held_out,p25_absolute_error,median_absolute_error,"
           "p75_absolute_error,parameter_count\n";
  for (const auto& est : estimators) {
    const auto records = evaluate_estimator(*est, held_out);
    const TradeoffRow row =
        tradeoff_row(est->name(), records, est->parameter_count(), 0.0);
    table << args.scenario << ',' << est->name() << ',' << kept.size() << ','
          << held_out.size() << ',' << fmt_double(row.p25_absolute_error) << ','
          << fmt_double(row.median_absolute_error) << ','
          << fmt_double(row.p75_absolute_error) << ',' << row.parameter_count << '\n';
  }

  const std::string kept_path = out_path(args.common, "kept.jsonl");
  tracker.track(kept_path);
  save_workload(kept, kept_path);
  const std::string held_path = out_path(args.common, "heldout.jsonl");
  tracker.track(held_path);
  save_workload(held_out, held_path);
  emit(tracker, out_path(args.common, "robustness.csv"), table.str());
  std::cout << table.str();
}

// ---------------------------------------------------------------------------
// active-learn

struct ActiveArgs {
  CommonArgs common;
  std::string db_dir;
  std::string workload_path;
  std::string method = "qbc";
  size_t seed_size = 100;
  size_t k = 100;
  size_t iters = 3;
  TrainFlags flags;
};

void run_active(const CLI::App& cmd, ActiveArgs& args, OutputTracker& tracker) {
  const json cfg = load_config(args.common.config_path);
  const Overlay o(cmd, cfg);
  overlay_common(o, args.common);
  o.get("--db", args.db_dir);
  o.get("--workload", args.workload_path);
  o.get("--method", args.method);
  o.get("--seed-size", args.seed_size);
  o.get("--k", args.k);
  o.get("--iters", args.iters);
  overlay_train_flags(o, args.flags);
  if (args.db_dir.empty()) throw_usage("active-learn requires --db");
  if (args.workload_path.empty()) throw_usage("active-learn requires --workload");

  ActiveMethod method = ActiveMethod::qbc;
  if (args.method == "qbc") {
    method = ActiveMethod::qbc;
  } else if (args.method == "qbc-cluster") {
    method = ActiveMethod::qbc_cluster;
  } else if (args.method == "random") {
    method = ActiveMethod::random;
  } else {
    throw_usage("--method must be qbc|qbc-cluster|random, got '" + args.method + "'");
  }

  const Database db = load_database(args.db_dir);
  const EncodingSpec spec = build_spec(db);
  std::vector<LabeledExample> examples = load_workload(args.workload_path, db.schema);
  if (args.seed_size < 2) throw_usage("--seed-size must be at least 2");
  if (examples.size() <= args.seed_size) {
    throw_data("E_DATA", "workload must hold more queries than --seed-size");
  }

  // The seed set is the head of the workload; labels are computed on demand.
  std::vector<LabeledExample> seed_examples(examples.begin(),
                                            examples.begin() + args.seed_size);
  std::vector<LabeledExample> pool_examples(examples.begin() + args.seed_size,
                                            examples.end());
  label(db, seed_examples, false, args.common.jobs);

  std::vector<double> seed_sel;
  for (const auto& ex : seed_examples) seed_sel.push_back(ex.selectivity);
  const LabelTransform lt = fit_label_transform(seed_sel, resolve_label_floor(args.flags, seed_sel));

  std::vector<FlatExample> seed_set;
  for (const auto& ex : seed_examples) {
    seed_set.push_back({encode_flat(spec, ex.query), lt.apply(ex.selectivity)});
  }
  std::vector<FeatureVector> pool;
  for (const auto& ex : pool_examples) pool.push_back(encode_flat(spec, ex.query));

  const ArchSpec arch = parse_arch(args.flags.arch);
  ActiveConfig config;
  config.method = method;
  config.k = args.k;
  config.iterations = args.iters;
  config.arch = {arch.width, arch.depth, true};
  config.jobs = args.common.jobs;
  config.committee_hyper.lr = args.flags.lr;
  config.committee_hyper.batch = args.flags.batch;
  config.committee_hyper.max_epochs = args.flags.epochs;
  config.committee_hyper.patience = args.flags.patience;
  config.report_hyper.lr = args.flags.lr;
  config.report_hyper.batch = args.flags.batch;
  config.report_hyper.max_epochs = args.flags.epochs;
  config.report_hyper.patience = args.flags.patience;

  const Labeler labeler = [&](size_t pool_index) {
    LabeledExample& ex = pool_examples[pool_index];
    if (!ex.labeled()) {
      std::vector<LabeledExample> one{ex};
      label(db, one, false, 1);
      ex = one[0];
    }
    return lt.apply(ex.selectivity);
  };

  const ActiveRun run = active_learn(seed_set, pool, config, labeler,
                                     derive_seed(args.common.seed, "active"));

  json doc;
  doc["method"] = active_method_name(run.method);
  doc["seed_size"] = run.seed_size;
  doc["k"] = run.k;
  doc["labeled_pool_indices"] = run.labeled_pool_indices;
  json iterations = json::array();
  for (const auto& it : run.iterations) {
    iterations.push_back({{"chosen", it.chosen}, {"validation_mse", it.validation_mse}});
  }
  doc["iterations"] = iterations;  // wall-clock omitted for reproducibility
  emit(tracker, out_path(args.common, "active_run.json"), doc.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// plan-impact

struct PlanImpactArgs {
  CommonArgs common;
  std::string db_dir;
  std::string workload_path;
  std::vector<std::string> estimator_specs;
  size_t bins = 100;
};

void run_plan_impact(const CLI::App& cmd, PlanImpactArgs& args, OutputTracker& tracker) {
  const json cfg = load_config(args.common.config_path);
  const Overlay o(cmd, cfg);
  overlay_common(o, args.common);
  o.get("--db", args.db_dir);
  o.get("--workload", args.workload_path);
  o.get("--estimators", args.estimator_specs);
  o.get("--bins", args.bins);
  if (args.db_dir.empty()) throw_usage("plan-impact requires --db");
  if (args.workload_path.empty()) throw_usage("plan-impact requires --workload");
  if (args.estimator_specs.empty()) throw_usage("plan-impact requires --estimators");

  const Database db = load_database(args.db_dir);
  const std::vector<LabeledExample> examples = load_workload(args.workload_path, db.schema);
  if (examples.empty()) throw_data("E_DATA", "workload is empty");

  std::vector<std::unique_ptr<Estimator>> estimators;
  for (const auto& spec_text : args.estimator_specs) {
    if (spec_text == "histogram") {
      estimators.push_back(make_histogram_estimator(db, args.bins));
    } else {
      estimators.push_back(load_estimator(spec_text, db));
    }
  }

  std::vector<ImpactRecord> records;
  for (const auto& est : estimators) {
    std::vector<ImpactRecord> batch(examples.size());
    parallel_for(args.common.jobs, examples.size(), [&](size_t i) {
      batch[i] = impact(db, examples[i].query, *est, i);
    });
    records.insert(records.end(), batch.begin(), batch.end());
  }
  emit(tracker, out_path(args.common, "impact.csv"), impact_csv(records));
}

// ---------------------------------------------------------------------------

int run(int argc, char** argv, OutputTracker& tracker) {
  CLI::App app{"cardlab: a desk-scale laboratory for learned cardinality estimation"};
  app.require_subcommand(1);

  GenDataArgs gen_data;
  CLI::App* gen_data_cmd =
      app.add_subcommand("gen-data", "Generate a synthetic database from a schema");
  add_common(gen_data_cmd, gen_data.common);
  gen_data_cmd->add_option("--schema", gen_data.schema_path, "Schema JSON file");
  gen_data_cmd->add_option("--rows", gen_data.rows_spec,
                           "Rows per relation: '500' or 'A=100,B=50,...'");

  GenWorkloadArgs gen_workload_args;
  CLI::App* gen_workload_cmd =
      app.add_subcommand("gen-workload", "Generate a random query workload");
  add_common(gen_workload_cmd, gen_workload_args.common);
  gen_workload_cmd->add_option("--db", gen_workload_args.db_dir, "Database directory");
  gen_workload_cmd->add_option("--complexity", gen_workload_args.complexity,
                               "Relations per query: '2join', '4join', or a number");
  gen_workload_cmd->add_option("--n", gen_workload_args.n, "Number of queries");

  LabelArgs label_args;
  CLI::App* label_cmd =
      app.add_subcommand("label", "Label a workload with exact cardinalities");
  add_common(label_cmd, label_args.common);
  label_cmd->add_option("--db", label_args.db_dir, "Database directory");
  label_cmd->add_option("--workload", label_args.workload_path, "Workload JSONL file");
  label_cmd->add_flag("--prefixes", label_args.prefixes,
                      "Also label every left-deep prefix (needed for rnn training)");

  TrainArgs train_args;
  CLI::App* train_cmd = app.add_subcommand("train", "Train an estimator on a workload");
  add_common(train_cmd, train_args.common);
  train_cmd->add_option("--model", train_args.model, "nn|rnn|rf|gbt|memo");
  train_cmd->add_option("--db", train_args.db_dir, "Database directory");
  train_cmd->add_option("--train", train_args.train_path, "Labeled workload JSONL");
  train_cmd->add_flag("--grid", train_args.grid,
                      "Grid-search learning rate and batch size first (nn only)");
  add_train_flags(train_cmd, train_args.flags);

  EvaluateArgs evaluate_args;
  CLI::App* evaluate_cmd =
      app.add_subcommand("evaluate", "Evaluate models against the histogram baseline");
  add_common(evaluate_cmd, evaluate_args.common);
  evaluate_cmd->add_option("--db", evaluate_args.db_dir, "Database directory");
  evaluate_cmd->add_option("--test", evaluate_args.test_path, "Labeled test JSONL");
  evaluate_cmd->add_option("--models", evaluate_args.models, "Model JSON files")
      ->delimiter(',');
  evaluate_cmd->add_option("--bins", evaluate_args.bins, "Histogram baseline bins");
  evaluate_cmd->add_option("--budget", evaluate_args.budget,
                           "Parameter budget for pick-the-best-within-budget");
  evaluate_cmd->add_flag("--knee-halve", evaluate_args.knee_halve,
                         "Halve the knee threshold for the easy/hard split");

  RobustnessArgs robustness_args;
  CLI::App* robustness_cmd = app.add_subcommand(
      "robustness", "Hold out a scenario slice, train on the rest, and compare");
  add_common(robustness_cmd, robustness_args.common);
  robustness_cmd->add_option("--db", robustness_args.db_dir, "Database directory");
  robustness_cmd->add_option("--workload", robustness_args.workload_path,
                             "Labeled workload JSONL");
  robustness_cmd->add_option(
      "--scenario", robustness_args.scenario,
      "'remove-selection:<rel.col>:<frac>' or 'remove-join:<rel,rel,...>'");
  add_train_flags(robustness_cmd, robustness_args.flags);

  ActiveArgs active_args;
  CLI::App* active_cmd =
      app.add_subcommand("active-learn", "Batch-mode active learning over a query pool");
  add_common(active_cmd, active_args.common);
  active_cmd->add_option("--db", active_args.db_dir, "Database directory");
  active_cmd->add_option("--workload", active_args.workload_path,
                         "Workload JSONL (seed set = head, pool = rest)");
  active_cmd->add_option("--method", active_args.method, "qbc|qbc-cluster|random");
  active_cmd->add_option("--seed-size", active_args.seed_size, "Initially labeled queries");
  active_cmd->add_option("--k", active_args.k, "Labels acquired per iteration");
  active_cmd->add_option("--iters", active_args.iters, "Acquisition iterations");
  add_train_flags(active_cmd, active_args.flags);

  PlanImpactArgs plan_impact_args;
  CLI::App* plan_impact_cmd =
      app.add_subcommand("plan-impact", "Cost-model impact of estimator-driven plans");
  add_common(plan_impact_cmd, plan_impact_args.common);
  plan_impact_cmd->add_option("--db", plan_impact_args.db_dir, "Database directory");
  plan_impact_cmd->add_option("--workload", plan_impact_args.workload_path,
                              "Workload JSONL");
  plan_impact_cmd
      ->add_option("--estimators", plan_impact_args.estimator_specs,
                   "Model files and/or the literal 'histogram'")
      ->delimiter(',');
  plan_impact_cmd->add_option("--bins", plan_impact_args.bins, "Histogram baseline bins");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "E_USAGE: " << e.what() << "\n";
    return 2;
  }

  if (gen_data_cmd->parsed()) run_gen_data(*gen_data_cmd, gen_data, tracker);
  if (gen_workload_cmd->parsed()) run_gen_workload(*gen_workload_cmd, gen_workload_args, tracker);
  if (label_cmd->parsed()) run_label(*label_cmd, label_args, tracker);
  if (train_cmd->parsed()) run_train(*train_cmd, train_args, tracker);
  if (evaluate_cmd->parsed()) run_evaluate(*evaluate_cmd, evaluate_args, tracker);
  if (robustness_cmd->parsed()) run_robustness(*robustness_cmd, robustness_args, tracker);
  if (active_cmd->parsed()) run_active(*active_cmd, active_args, tracker);
  if (plan_impact_cmd->parsed()) run_plan_impact(*plan_impact_cmd, plan_impact_args, tracker);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  OutputTracker tracker;
  try {
    return run(argc, argv, tracker);
  } catch (const cardlab::Error& e) {
    tracker.discard_all();
    std::cerr << e.code() << ": " << e.what() << "\n";
    return e.exit_code();
  } catch (const std::exception& e) {
    tracker.discard_all();
    std::cerr << "E_INTERNAL: " << e.what() << "\n";
    return 3;
  }
}
