#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cardlab/featurize.hpp"

namespace cardlab {

/// Dense row-major tensor; shape {rows, cols} for matrices, {n} for vectors.
struct Tensor {
  std::vector<size_t> shape;
  std::vector<double> data;

  static Tensor zeros(std::vector<size_t> shape);
  size_t size() const { return data.size(); }
  double& at(size_t row, size_t col) { return data[row * shape[1] + col]; }
  double at(size_t row, size_t col) const { return data[row * shape[1] + col]; }
};

/// Per-feature standardization fitted on training inputs; identity until
/// fitted. Features with zero variance keep a divisor of 1.
struct Standardizer {
  std::vector<double> mean;
  std::vector<double> stddev;

  bool fitted() const { return !mean.empty(); }
  void fit(const std::vector<FeatureVector>& rows);
  FeatureVector apply(const FeatureVector& x) const;
};

enum class RnnMode { many_to_many, many_to_one };

/// Fully connected residual regression net with leaky-ReLU hidden layers and
/// a linear scalar output. Residual skips connect consecutive equal-width
/// hidden layers.
struct DenseNet {
  size_t input_width = 0;
  std::vector<size_t> hidden_widths;
  bool residual = true;
  Standardizer standardizer;
  LabelTransform label_transform;
  /// Layer parameters in order W0, b0, ..., W_out, b_out.
  std::vector<Tensor> params;

  double predict_transformed(const FeatureVector& x) const;
  /// Activations of the last hidden layer.
  std::vector<double> latents(const FeatureVector& x) const;
  size_t parameter_count() const;
};

/// Stacked tanh recurrent net with shared weights across timesteps, linear
/// per-step readout, and residual wrapping of cells above the first.
struct RecurrentNet {
  size_t input_width = 0;
  size_t hidden_width = 0;
  size_t depth = 1;
  RnnMode mode = RnnMode::many_to_many;
  Standardizer standardizer;
  LabelTransform label_transform;
  /// Per layer Wx, Wh, b; then readout W_r, b_r.
  std::vector<Tensor> params;

  /// One prediction per timestep (the many_to_one prediction is the last).
  std::vector<double> predict_transformed(const FeatureSequence& xs) const;
  /// Final-step hidden state of the top layer.
  std::vector<double> latents(const FeatureSequence& xs) const;
  size_t parameter_count() const;
};

constexpr double kLeakyReluSlope = 0.01;
constexpr double kInitStddev = 0.05;
constexpr double kInitBias = 0.01;

/// Weights ~ Normal(0, kInitStddev^2), biases exactly kInitBias,
/// deterministic per seed.
DenseNet init_dense(size_t input_width, size_t width, size_t depth, uint64_t seed,
                    bool residual = true);
RecurrentNet init_recurrent(size_t input_width, size_t width, size_t depth, uint64_t seed,
                            RnnMode mode = RnnMode::many_to_many);

/// Exact analytic gradient of the batch MSE (mean over examples; recurrent
/// many_to_many additionally averages over timesteps). Optionally reports
/// the batch loss.
std::vector<Tensor> gradients(const DenseNet& net, const std::vector<FlatExample>& batch,
                              double* loss_out = nullptr);
std::vector<Tensor> gradients(const RecurrentNet& net, const std::vector<SeqExample>& batch,
                              double* loss_out = nullptr);

struct AdamHyper {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::vector<Tensor> m;
  std::vector<Tensor> v;
  int64_t step = 0;
};

AdamState make_adam_state(const std::vector<Tensor>& params);
/// Standard Adam with bias correction.
void adam_step(std::vector<Tensor>& params, const std::vector<Tensor>& grads, AdamState& state,
               const AdamHyper& hyper);

struct TrainHyper {
  double lr = 1e-3;
  size_t batch = 32;
  size_t max_epochs = 500;
  size_t patience = 20;
  double min_delta = 1e-4;       // relative validation improvement threshold
  double weight_decay = 0.0;     // L2 penalty added to every gradient
};

struct TrainReport {
  size_t epochs = 0;
  std::vector<double> train_mse;       // running mean of minibatch losses
  std::vector<double> validation_mse;  // recomputed after each epoch
  std::string stopping_reason;         // "max_epochs" | "patience"
  double wall_seconds = 0.0;
  double best_validation_mse = 0.0;
};

/// Mini-batch Adam training with per-epoch shuffling, best-validation
/// parameter tracking, and patience-based early stopping. Fits the input
/// standardizer on the training split if not already fitted. Throws
/// E_DIVERGED on non-finite loss.
TrainReport train(DenseNet& net, const std::vector<FlatExample>& train_set,
                  const std::vector<FlatExample>& validation_set, const TrainHyper& hyper,
                  uint64_t seed);
TrainReport train(RecurrentNet& net, const std::vector<SeqExample>& train_set,
                  const std::vector<SeqExample>& validation_set, const TrainHyper& hyper,
                  uint64_t seed);

double mse(const DenseNet& net, const std::vector<FlatExample>& examples);
double mse(const RecurrentNet& net, const std::vector<SeqExample>& examples);

/// Inverts the label transform and scales by the cartesian product of the
/// base relations; clamped to [0, cartesian_rows] and rounded.
int64_t predict_cardinality(const DenseNet& net, const FeatureVector& x, double cartesian_rows);
int64_t predict_cardinality(const RecurrentNet& net, const FeatureSequence& xs,
                            double cartesian_rows);

/// Versioned JSON with bit-exact round trip.
std::string dense_to_json_text(const DenseNet& net);
DenseNet dense_from_json_text(const std::string& text);
std::string recurrent_to_json_text(const RecurrentNet& net);
RecurrentNet recurrent_from_json_text(const std::string& text);

}  // namespace cardlab
