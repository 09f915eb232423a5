#pragma once

#include <memory>
#include <string>

#include "cardlab/database.hpp"
#include "cardlab/featurize.hpp"
#include "cardlab/forest.hpp"
#include "cardlab/histo.hpp"
#include "cardlab/memo.hpp"
#include "cardlab/neural.hpp"
#include "cardlab/query.hpp"

namespace cardlab {

/// A cardinality estimator: maps any valid (sub)query over its database to
/// an estimated result size in rows. Implementations keep a reference to the
/// database they were built against, which must outlive them.
class Estimator {
 public:
  virtual ~Estimator() = default;
  virtual std::string name() const = 0;
  /// Stored scalars — the space currency of the trade-off reports.
  virtual size_t parameter_count() const = 0;
  /// Estimated result cardinality in rows (>= 0, unrounded).
  virtual double estimate(const Query& q) const = 0;
};

/// Canonical left-deep order for a connected query: start at the
/// lexicographically smallest relation name, then repeatedly attach the
/// lexicographically smallest relation joinable to the current prefix.
/// Sequence-encoded estimators score arbitrary queries through this order.
JoinSequence canonical_sequence(const Query& q);

std::unique_ptr<Estimator> make_truth_estimator(const Database& db,
                                                std::string name = "truth");
std::unique_ptr<Estimator> make_histogram_estimator(StatsCatalog stats,
                                                    std::string name = "histogram");
std::unique_ptr<Estimator> make_histogram_estimator(const Database& db, size_t bins,
                                                    std::string name = "histogram");
std::unique_ptr<Estimator> make_dense_estimator(DenseNet net, EncodingSpec spec,
                                                const Database& db, std::string name = "nn");
std::unique_ptr<Estimator> make_recurrent_estimator(RecurrentNet net, EncodingSpec spec,
                                                    const Database& db,
                                                    std::string name = "rnn");
std::unique_ptr<Estimator> make_forest_estimator(RandomForest forest, EncodingSpec spec,
                                                 const Database& db, std::string name = "rf");
std::unique_ptr<Estimator> make_boosted_estimator(BoostedEnsemble ensemble, EncodingSpec spec,
                                                  const Database& db,
                                                  std::string name = "gbt");
std::unique_ptr<Estimator> make_memo_estimator(MemoTable table, EncodingSpec spec,
                                               std::string name = "memo");

/// Loads a model JSON file and wraps it, dispatching on the stored kind
/// (dense, recurrent, random_forest, boosted, memo, or stats). The database
/// must be the one the model was trained against. A missing file raises
/// E_MODEL_NOT_FOUND; an unrecognized kind raises E_SCHEMA. The default
/// name is the file stem.
std::unique_ptr<Estimator> load_estimator(const std::string& path, const Database& db,
                                          std::string name = "");

}  // namespace cardlab
