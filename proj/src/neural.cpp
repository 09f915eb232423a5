#include "cardlab/neural.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

namespace cardlab {

Tensor Tensor::zeros(std::vector<size_t> shape) {
  size_t total = 1;
  for (size_t s : shape) total *= s;
  Tensor t;
  t.shape = std::move(shape);
  t.data.assign(total, 0.0);
  return t;
}

void Standardizer::fit(const std::vector<FeatureVector>& rows) {
  if (rows.empty()) throw_data("E_DATA", "cannot fit standardizer on empty input");
  const size_t width = rows[0].size();
  mean.assign(width, 0.0);
  stddev.assign(width, 0.0);
  for (const auto& row : rows) {
    for (size_t i = 0; i < width; ++i) mean[i] += row[i];
  }
  for (size_t i = 0; i < width; ++i) mean[i] /= static_cast<double>(rows.size());
  for (const auto& row : rows) {
    for (size_t i = 0; i < width; ++i) {
      const double d = row[i] - mean[i];
      stddev[i] += d * d;
    }
  }
  for (size_t i = 0; i < width; ++i) {
    stddev[i] = std::sqrt(stddev[i] / static_cast<double>(rows.size()));
    if (stddev[i] == 0.0) stddev[i] = 1.0;  // constant feature: pass through centered
  }
}

FeatureVector Standardizer::apply(const FeatureVector& x) const {
  if (!fitted()) return x;
  if (x.size() != mean.size()) throw_data("E_DATA", "feature width does not match standardizer");
  FeatureVector out(x.size());
  for (size_t i = 0; i < x.size(); ++i) out[i] = (x[i] - mean[i]) / stddev[i];
  return out;
}

namespace {

double leaky(double z) { return z > 0.0 ? z : kLeakyReluSlope * z; }
double leaky_grad(double z) { return z > 0.0 ? 1.0 : kLeakyReluSlope; }

/// out = W x + b
void affine(const Tensor& w, const Tensor& b, const std::vector<double>& x,
            std::vector<double>& out) {
  const size_t rows = w.shape[0];
  const size_t cols = w.shape[1];
  out.assign(rows, 0.0);
  for (size_t r = 0; r < rows; ++r) {
    const double* wr = w.data.data() + r * cols;
    double acc = b.data[r];
    for (size_t c = 0; c < cols; ++c) acc += wr[c] * x[c];
    out[r] = acc;
  }
}

/// out += W^T dy
void add_matvec_transposed(const Tensor& w, const std::vector<double>& dy,
                           std::vector<double>& out) {
  const size_t rows = w.shape[0];
  const size_t cols = w.shape[1];
  if (out.size() != cols) out.assign(cols, 0.0);
  for (size_t r = 0; r < rows; ++r) {
    const double* wr = w.data.data() + r * cols;
    const double d = dy[r];
    if (d == 0.0) continue;
    for (size_t c = 0; c < cols; ++c) out[c] += d * wr[c];
  }
}

/// grad_w += dy x^T, grad_b += dy
void accumulate_affine_grads(Tensor& grad_w, Tensor& grad_b, const std::vector<double>& dy,
                             const std::vector<double>& x) {
  const size_t rows = grad_w.shape[0];
  const size_t cols = grad_w.shape[1];
  for (size_t r = 0; r < rows; ++r) {
    const double d = dy[r];
    grad_b.data[r] += d;
    if (d == 0.0) continue;
    double* gr = grad_w.data.data() + r * cols;
    for (size_t c = 0; c < cols; ++c) gr[c] += d * x[c];
  }
}

bool dense_skip(const DenseNet& net, size_t layer) {
  return net.residual && layer > 0 && net.hidden_widths[layer] == net.hidden_widths[layer - 1];
}

struct DenseCache {
  std::vector<std::vector<double>> inputs;  // input to each layer, plus output-layer input
  std::vector<std::vector<double>> z;       // hidden pre-activations
  double prediction = 0.0;
};

DenseCache dense_forward(const DenseNet& net, const FeatureVector& raw) {
  if (raw.size() != net.input_width) {
    throw_data("E_DATA", "input width " + std::to_string(raw.size()) + " does not match net (" +
                             std::to_string(net.input_width) + ")");
  }
  const size_t layers = net.hidden_widths.size();
  DenseCache cache;
  cache.inputs.resize(layers + 1);
  cache.z.resize(layers);
  std::vector<double> a = net.standardizer.apply(raw);
  for (size_t l = 0; l < layers; ++l) {
    cache.inputs[l] = a;
    affine(net.params[2 * l], net.params[2 * l + 1], a, cache.z[l]);
    std::vector<double> h(cache.z[l].size());
    for (size_t j = 0; j < h.size(); ++j) h[j] = leaky(cache.z[l][j]);
    if (dense_skip(net, l)) {
      for (size_t j = 0; j < h.size(); ++j) h[j] += a[j];
    }
    a = std::move(h);
  }
  cache.inputs[layers] = a;
  const Tensor& w_out = net.params[2 * layers];
  const Tensor& b_out = net.params[2 * layers + 1];
  double pred = b_out.data[0];
  for (size_t c = 0; c < a.size(); ++c) pred += w_out.data[c] * a[c];
  cache.prediction = pred;
  return cache;
}

struct RnnCache {
  // Indexed [t][l]: layer input, pre-activation, tanh output, full output.
  std::vector<std::vector<std::vector<double>>> in, z, cell, h;
  std::vector<double> predictions;
};

bool rnn_wrap(const RecurrentNet& net, size_t layer) { return net.depth > 1 && layer > 0; }

RnnCache rnn_forward(const RecurrentNet& net, const FeatureSequence& xs) {
  if (xs.empty()) throw_data("E_DATA", "empty input sequence");
  const size_t steps = xs.size();
  const size_t depth = net.depth;
  RnnCache cache;
  cache.in.assign(steps, std::vector<std::vector<double>>(depth));
  cache.z = cache.in;
  cache.cell = cache.in;
  cache.h = cache.in;
  cache.predictions.resize(steps);

  const Tensor& w_read = net.params[3 * depth];
  const Tensor& b_read = net.params[3 * depth + 1];
  std::vector<std::vector<double>> prev_h(depth,
                                          std::vector<double>(net.hidden_width, 0.0));
  for (size_t t = 0; t < steps; ++t) {
    if (xs[t].size() != net.input_width) {
      throw_data("E_DATA", "sequence step width does not match net input width");
    }
    std::vector<double> layer_in = net.standardizer.apply(xs[t]);
    for (size_t l = 0; l < depth; ++l) {
      const Tensor& wx = net.params[3 * l];
      const Tensor& wh = net.params[3 * l + 1];
      const Tensor& b = net.params[3 * l + 2];
      cache.in[t][l] = layer_in;
      std::vector<double> z;
      affine(wx, b, layer_in, z);
      const size_t width = z.size();
      for (size_t j = 0; j < width; ++j) {
        const double* whr = wh.data.data() + j * width;
        double acc = z[j];
        for (size_t k = 0; k < width; ++k) acc += whr[k] * prev_h[l][k];
        z[j] = acc;
      }
      std::vector<double> cell(width);
      for (size_t j = 0; j < width; ++j) cell[j] = std::tanh(z[j]);
      std::vector<double> h = cell;
      if (rnn_wrap(net, l)) {
        for (size_t j = 0; j < width; ++j) h[j] += layer_in[j];
      }
      cache.z[t][l] = std::move(z);
      cache.cell[t][l] = std::move(cell);
      cache.h[t][l] = h;
      prev_h[l] = h;
      layer_in = std::move(h);
    }
    double pred = b_read.data[0];
    for (size_t c = 0; c < net.hidden_width; ++c) {
      pred += w_read.data[c] * cache.h[t][depth - 1][c];
    }
    cache.predictions[t] = pred;
  }
  return cache;
}

std::vector<Tensor> zero_like(const std::vector<Tensor>& params) {
  std::vector<Tensor> out;
  out.reserve(params.size());
  for (const auto& p : params) out.push_back(Tensor::zeros(p.shape));
  return out;
}

}  // namespace

double DenseNet::predict_transformed(const FeatureVector& x) const {
  return dense_forward(*this, x).prediction;
}

std::vector<double> DenseNet::latents(const FeatureVector& x) const {
  return dense_forward(*this, x).inputs.back();
}

size_t DenseNet::parameter_count() const {
  size_t total = 0;
  for (const auto& p : params) total += p.size();
  return total;
}

std::vector<double> RecurrentNet::predict_transformed(const FeatureSequence& xs) const {
  return rnn_forward(*this, xs).predictions;
}

std::vector<double> RecurrentNet::latents(const FeatureSequence& xs) const {
  return rnn_forward(*this, xs).h.back()[depth - 1];
}

size_t RecurrentNet::parameter_count() const {
  size_t total = 0;
  for (const auto& p : params) total += p.size();
  return total;
}

DenseNet init_dense(size_t input_width, size_t width, size_t depth, uint64_t seed,
                    bool residual) {
  if (input_width == 0 || width == 0 || depth == 0) {
    throw_data("E_DATA", "network dimensions must be positive");
  }
  DenseNet net;
  net.input_width = input_width;
  net.hidden_widths.assign(depth, width);
  net.residual = residual;
  Rng rng(derive_seed(seed, "init"));
  size_t in = input_width;
  for (size_t l = 0; l < depth; ++l) {
    Tensor w = Tensor::zeros({width, in});
    for (double& v : w.data) v = rng.next_normal(0.0, kInitStddev);
    Tensor b = Tensor::zeros({width});
    for (double& v : b.data) v = kInitBias;
    net.params.push_back(std::move(w));
    net.params.push_back(std::move(b));
    in = width;
  }
  Tensor w_out = Tensor::zeros({1, in});
  for (double& v : w_out.data) v = rng.next_normal(0.0, kInitStddev);
  Tensor b_out = Tensor::zeros({1});
  b_out.data[0] = kInitBias;
  net.params.push_back(std::move(w_out));
  net.params.push_back(std::move(b_out));
  return net;
}

RecurrentNet init_recurrent(size_t input_width, size_t width, size_t depth, uint64_t seed,
                            RnnMode mode) {
  if (input_width == 0 || width == 0 || depth == 0) {
    throw_data("E_DATA", "network dimensions must be positive");
  }
  RecurrentNet net;
  net.input_width = input_width;
  net.hidden_width = width;
  net.depth = depth;
  net.mode = mode;
  Rng rng(derive_seed(seed, "init"));
  size_t in = input_width;
  for (size_t l = 0; l < depth; ++l) {
    Tensor wx = Tensor::zeros({width, in});
    for (double& v : wx.data) v = rng.next_normal(0.0, kInitStddev);
    Tensor wh = Tensor::zeros({width, width});
    for (double& v : wh.data) v = rng.next_normal(0.0, kInitStddev);
    Tensor b = Tensor::zeros({width});
    for (double& v : b.data) v = kInitBias;
    net.params.push_back(std::move(wx));
    net.params.push_back(std::move(wh));
    net.params.push_back(std::move(b));
    in = width;
  }
  Tensor w_read = Tensor::zeros({1, width});
  for (double& v : w_read.data) v = rng.next_normal(0.0, kInitStddev);
  Tensor b_read = Tensor::zeros({1});
  b_read.data[0] = kInitBias;
  net.params.push_back(std::move(w_read));
  net.params.push_back(std::move(b_read));
  return net;
}

std::vector<Tensor> gradients(const DenseNet& net, const std::vector<FlatExample>& batch,
                              double* loss_out) {
  if (batch.empty()) throw_data("E_DATA", "gradient of empty batch");
  const size_t layers = net.hidden_widths.size();
  std::vector<Tensor> grads = zero_like(net.params);
  double loss = 0.0;
  for (const auto& ex : batch) {
    const DenseCache cache = dense_forward(net, ex.x);
    const double err = cache.prediction - ex.y;
    loss += err * err;
    const double dpred = 2.0 * err / static_cast<double>(batch.size());

    // Output layer.
    Tensor& gw_out = grads[2 * layers];
    Tensor& gb_out = grads[2 * layers + 1];
    const std::vector<double>& last = cache.inputs[layers];
    for (size_t c = 0; c < last.size(); ++c) gw_out.data[c] += dpred * last[c];
    gb_out.data[0] += dpred;

    std::vector<double> da(last.size());
    const Tensor& w_out = net.params[2 * layers];
    for (size_t c = 0; c < last.size(); ++c) da[c] = dpred * w_out.data[c];

    for (size_t l = layers; l-- > 0;) {
      const std::vector<double>& z = cache.z[l];
      std::vector<double> dz(z.size());
      for (size_t j = 0; j < z.size(); ++j) dz[j] = da[j] * leaky_grad(z[j]);
      accumulate_affine_grads(grads[2 * l], grads[2 * l + 1], dz, cache.inputs[l]);
      std::vector<double> da_prev(cache.inputs[l].size(), 0.0);
      add_matvec_transposed(net.params[2 * l], dz, da_prev);
      if (dense_skip(net, l)) {
        for (size_t j = 0; j < da_prev.size(); ++j) da_prev[j] += da[j];
      }
      da = std::move(da_prev);
    }
  }
  if (loss_out != nullptr) *loss_out = loss / static_cast<double>(batch.size());
  return grads;
}

std::vector<Tensor> gradients(const RecurrentNet& net, const std::vector<SeqExample>& batch,
                              double* loss_out) {
  if (batch.empty()) throw_data("E_DATA", "gradient of empty batch");
  const size_t depth = net.depth;
  std::vector<Tensor> grads = zero_like(net.params);
  double loss = 0.0;

  for (const auto& ex : batch) {
    const RnnCache cache = rnn_forward(net, ex.xs);
    const size_t steps = ex.xs.size();
    if (ex.ys.size() != steps) {
      throw_data("E_DATA", "label sequence length does not match input sequence");
    }

    std::vector<double> dpred(steps, 0.0);
    if (net.mode == RnnMode::many_to_many) {
      for (size_t t = 0; t < steps; ++t) {
        const double err = cache.predictions[t] - ex.ys[t];
        loss += err * err / static_cast<double>(steps);
        dpred[t] = 2.0 * err / static_cast<double>(steps * batch.size());
      }
    } else {
      const double err = cache.predictions[steps - 1] - ex.ys[steps - 1];
      loss += err * err;
      dpred[steps - 1] = 2.0 * err / static_cast<double>(batch.size());
    }

    Tensor& gw_read = grads[3 * depth];
    Tensor& gb_read = grads[3 * depth + 1];
    const Tensor& w_read = net.params[3 * depth];

    // dh[t][l] accumulates downstream gradients for the full cell output.
    std::vector<std::vector<std::vector<double>>> dh(
        steps, std::vector<std::vector<double>>(depth,
                                                std::vector<double>(net.hidden_width, 0.0)));
    for (size_t t = steps; t-- > 0;) {
      if (dpred[t] != 0.0) {
        for (size_t c = 0; c < net.hidden_width; ++c) {
          gw_read.data[c] += dpred[t] * cache.h[t][depth - 1][c];
          dh[t][depth - 1][c] += dpred[t] * w_read.data[c];
        }
        gb_read.data[0] += dpred[t];
      }
      for (size_t l = depth; l-- > 0;) {
        const std::vector<double>& cell = cache.cell[t][l];
        std::vector<double> dz(net.hidden_width);
        for (size_t j = 0; j < net.hidden_width; ++j) {
          dz[j] = dh[t][l][j] * (1.0 - cell[j] * cell[j]);
        }
        Tensor& gwx = grads[3 * l];
        Tensor& gwh = grads[3 * l + 1];
        Tensor& gb = grads[3 * l + 2];
        accumulate_affine_grads(gwx, gb, dz, cache.in[t][l]);
        if (t > 0) {
          const std::vector<double>& h_prev = cache.h[t - 1][l];
          const size_t width = net.hidden_width;
          for (size_t j = 0; j < width; ++j) {
            if (dz[j] == 0.0) continue;
            double* row = gwh.data.data() + j * width;
            for (size_t k = 0; k < width; ++k) row[k] += dz[j] * h_prev[k];
          }
          add_matvec_transposed(net.params[3 * l + 1], dz, dh[t - 1][l]);
        }
        if (l > 0) {
          add_matvec_transposed(net.params[3 * l], dz, dh[t][l - 1]);
          if (rnn_wrap(net, l)) {
            for (size_t j = 0; j < net.hidden_width; ++j) dh[t][l - 1][j] += dh[t][l][j];
          }
        }
      }
    }
  }
  if (loss_out != nullptr) *loss_out = loss / static_cast<double>(batch.size());
  return grads;
}

AdamState make_adam_state(const std::vector<Tensor>& params) {
  AdamState state;
  state.m = zero_like(params);
  state.v = zero_like(params);
  return state;
}

void adam_step(std::vector<Tensor>& params, const std::vector<Tensor>& grads, AdamState& state,
               const AdamHyper& hyper) {
  if (grads.size() != params.size() || state.m.size() != params.size()) {
    throw_data("E_DATA", "Adam state does not match parameter shapes");
  }
  state.step += 1;
  const double bc1 = 1.0 - std::pow(hyper.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(hyper.beta2, static_cast<double>(state.step));
  for (size_t i = 0; i < params.size(); ++i) {
    if (grads[i].size() != params[i].size()) {
      throw_data("E_DATA", "gradient shape does not match parameters");
    }
    for (size_t k = 0; k < params[i].size(); ++k) {
      const double g = grads[i].data[k];
      double& m = state.m[i].data[k];
      double& v = state.v[i].data[k];
      m = hyper.beta1 * m + (1.0 - hyper.beta1) * g;
      v = hyper.beta2 * v + (1.0 - hyper.beta2) * g * g;
      const double m_hat = m / bc1;
      const double v_hat = v / bc2;
      params[i].data[k] -= hyper.lr * m_hat / (std::sqrt(v_hat) + hyper.eps);
    }
  }
}

double mse(const DenseNet& net, const std::vector<FlatExample>& examples) {
  if (examples.empty()) return 0.0;
  double loss = 0.0;
  for (const auto& ex : examples) {
    const double err = net.predict_transformed(ex.x) - ex.y;
    loss += err * err;
  }
  return loss / static_cast<double>(examples.size());
}

double mse(const RecurrentNet& net, const std::vector<SeqExample>& examples) {
  if (examples.empty()) return 0.0;
  double loss = 0.0;
  for (const auto& ex : examples) {
    const std::vector<double> preds = net.predict_transformed(ex.xs);
    if (net.mode == RnnMode::many_to_many) {
      double example_loss = 0.0;
      for (size_t t = 0; t < preds.size(); ++t) {
        const double err = preds[t] - ex.ys[t];
        example_loss += err * err;
      }
      loss += example_loss / static_cast<double>(preds.size());
    } else {
      const double err = preds.back() - ex.ys.back();
      loss += err * err;
    }
  }
  return loss / static_cast<double>(examples.size());
}

namespace {

template <typename Net, typename Example>
std::vector<FeatureVector> standardizer_rows(const std::vector<Example>& examples);

template <>
std::vector<FeatureVector> standardizer_rows<DenseNet, FlatExample>(
    const std::vector<FlatExample>& examples) {
  std::vector<FeatureVector> rows;
  rows.reserve(examples.size());
  for (const auto& ex : examples) rows.push_back(ex.x);
  return rows;
}

template <>
std::vector<FeatureVector> standardizer_rows<RecurrentNet, SeqExample>(
    const std::vector<SeqExample>& examples) {
  std::vector<FeatureVector> rows;
  for (const auto& ex : examples) {
    for (const auto& x : ex.xs) rows.push_back(x);
  }
  return rows;
}

template <typename Net, typename Example>
TrainReport train_impl(Net& net, const std::vector<Example>& train_set,
                       const std::vector<Example>& validation_set, const TrainHyper& hyper,
                       uint64_t seed) {
  if (train_set.empty()) throw_data("E_DATA", "training set must be nonempty");
  if (validation_set.empty()) throw_data("E_DATA", "validation set must be nonempty");
  if (hyper.batch == 0 || hyper.batch > train_set.size()) {
    throw_data("E_DATA", "batch size must be in 1..|train|");
  }
  if (!net.standardizer.fitted()) {
    net.standardizer.fit(standardizer_rows<Net, Example>(train_set));
  }

  const auto started = std::chrono::steady_clock::now();
  TrainReport report;
  report.stopping_reason = "max_epochs";

  AdamState state = make_adam_state(net.params);
  AdamHyper adam;
  adam.lr = hyper.lr;

  std::vector<Tensor> best_params = net.params;
  double best_val = std::numeric_limits<double>::infinity();
  size_t epochs_since_improvement = 0;

  std::vector<size_t> order(train_set.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (size_t epoch = 1; epoch <= hyper.max_epochs; ++epoch) {
    Rng rng(derive_seed(seed, "epoch", epoch));
    rng.shuffle(order);

    double loss_sum = 0.0;
    size_t batches = 0;
    for (size_t start = 0; start < order.size(); start += hyper.batch) {
      const size_t end = std::min(start + hyper.batch, order.size());
      std::vector<Example> batch;
      batch.reserve(end - start);
      for (size_t i = start; i < end; ++i) batch.push_back(train_set[order[i]]);
      double batch_loss = 0.0;
      std::vector<Tensor> grads = gradients(net, batch, &batch_loss);
      if (!std::isfinite(batch_loss)) {
        throw_diverged("non-finite training loss at epoch " + std::to_string(epoch));
      }
      if (hyper.weight_decay != 0.0) {
        for (size_t i = 0; i < grads.size(); ++i) {
          for (size_t k = 0; k < grads[i].size(); ++k) {
            grads[i].data[k] += hyper.weight_decay * net.params[i].data[k];
          }
        }
      }
      adam_step(net.params, grads, state, adam);
      loss_sum += batch_loss;
      ++batches;
    }

    const double train_mse = loss_sum / static_cast<double>(batches);
    const double val_mse = mse(net, validation_set);
    if (!std::isfinite(val_mse)) {
      throw_diverged("non-finite validation loss at epoch " + std::to_string(epoch));
    }
    report.train_mse.push_back(train_mse);
    report.validation_mse.push_back(val_mse);
    report.epochs = epoch;

    const bool meaningful = best_val == std::numeric_limits<double>::infinity() ||
                            (best_val - val_mse) > hyper.min_delta * best_val;
    if (val_mse < best_val) {
      best_val = val_mse;
      best_params = net.params;
    }
    if (meaningful) {
      epochs_since_improvement = 0;
    } else {
      ++epochs_since_improvement;
    }
    if (epochs_since_improvement >= hyper.patience) {
      report.stopping_reason = "patience";
      break;
    }
  }

  if (report.epochs > 0) net.params = best_params;
  report.best_validation_mse =
      best_val == std::numeric_limits<double>::infinity() ? 0.0 : best_val;
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return report;
}

}  // namespace

TrainReport train(DenseNet& net, const std::vector<FlatExample>& train_set,
                  const std::vector<FlatExample>& validation_set, const TrainHyper& hyper,
                  uint64_t seed) {
  return train_impl(net, train_set, validation_set, hyper, seed);
}

TrainReport train(RecurrentNet& net, const std::vector<SeqExample>& train_set,
                  const std::vector<SeqExample>& validation_set, const TrainHyper& hyper,
                  uint64_t seed) {
  return train_impl(net, train_set, validation_set, hyper, seed);
}

namespace {

int64_t scale_to_cardinality(const LabelTransform& transform, double transformed,
                             double cartesian_rows) {
  const double selectivity = transform.invert(transformed);
  const double estimate = std::clamp(selectivity * cartesian_rows, 0.0, cartesian_rows);
  return static_cast<int64_t>(std::llround(estimate));
}

}  // namespace

int64_t predict_cardinality(const DenseNet& net, const FeatureVector& x, double cartesian_rows) {
  return scale_to_cardinality(net.label_transform, net.predict_transformed(x), cartesian_rows);
}

int64_t predict_cardinality(const RecurrentNet& net, const FeatureSequence& xs,
                            double cartesian_rows) {
  return scale_to_cardinality(net.label_transform, net.predict_transformed(xs).back(),
                              cartesian_rows);
}

namespace {

using nlohmann::json;

json tensors_to_json(const std::vector<Tensor>& params) {
  json out = json::array();
  for (const auto& p : params) out.push_back(json{{"shape", p.shape}, {"data", p.data}});
  return out;
}

std::vector<Tensor> tensors_from_json(const json& doc) {
  std::vector<Tensor> params;
  for (const auto& p : doc) {
    Tensor t;
    t.shape = p.at("shape").get<std::vector<size_t>>();
    t.data = p.at("data").get<std::vector<double>>();
    size_t expected = 1;
    for (size_t s : t.shape) expected *= s;
    if (expected != t.data.size()) throw_data("E_PARSE", "tensor shape does not match data size");
    params.push_back(std::move(t));
  }
  return params;
}

json standardizer_to_json(const Standardizer& s) {
  return json{{"mean", s.mean}, {"stddev", s.stddev}};
}

Standardizer standardizer_from_json(const json& doc) {
  Standardizer s;
  s.mean = doc.at("mean").get<std::vector<double>>();
  s.stddev = doc.at("stddev").get<std::vector<double>>();
  return s;
}

json label_transform_to_json(const LabelTransform& t) {
  return json{{"mean", t.mean}, {"std", t.std}, {"floor", t.floor}};
}

LabelTransform label_transform_from_json(const json& doc) {
  LabelTransform t;
  t.mean = doc.at("mean").get<double>();
  t.std = doc.at("std").get<double>();
  t.floor = doc.at("floor").get<double>();
  return t;
}

json parse_model_json(const std::string& text, const std::string& expected_kind) {
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

std::string dense_to_json_text(const DenseNet& net) {
  json doc;
  doc["format_version"] = 1;
  doc["kind"] = "dense";
  doc["input_width"] = net.input_width;
  doc["hidden_widths"] = net.hidden_widths;
  doc["residual"] = net.residual;
  doc["standardizer"] = standardizer_to_json(net.standardizer);
  doc["label_transform"] = label_transform_to_json(net.label_transform);
  doc["params"] = tensors_to_json(net.params);
  return doc.dump(2) + "\n";
}

DenseNet dense_from_json_text(const std::string& text) {
  const json doc = parse_model_json(text, "dense");
  try {
    DenseNet net;
    net.input_width = doc.at("input_width").get<size_t>();
    net.hidden_widths = doc.at("hidden_widths").get<std::vector<size_t>>();
    net.residual = doc.at("residual").get<bool>();
    net.standardizer = standardizer_from_json(doc.at("standardizer"));
    net.label_transform = label_transform_from_json(doc.at("label_transform"));
    net.params = tensors_from_json(doc.at("params"));
    if (net.params.size() != 2 * net.hidden_widths.size() + 2) {
      throw_data("E_PARSE", "dense model has wrong parameter tensor count");
    }
    return net;
  } catch (const json::exception& e) {
    throw_data("E_PARSE", std::string("malformed dense model: ") + e.what());
  }
}

std::string recurrent_to_json_text(const RecurrentNet& net) {
  json doc;
  doc["format_version"] = 1;
  doc["kind"] = "recurrent";
  doc["input_width"] = net.input_width;
  doc["hidden_width"] = net.hidden_width;
  doc["depth"] = net.depth;
  doc["mode"] = net.mode == RnnMode::many_to_many ? "many_to_many" : "many_to_one";
  doc["standardizer"] = standardizer_to_json(net.standardizer);
  doc["label_transform"] = label_transform_to_json(net.label_transform);
  doc["params"] = tensors_to_json(net.params);
  return doc.dump(2) + "\n";
}

RecurrentNet recurrent_from_json_text(const std::string& text) {
  const json doc = parse_model_json(text, "recurrent");
  try {
    RecurrentNet net;
    net.input_width = doc.at("input_width").get<size_t>();
    net.hidden_width = doc.at("hidden_width").get<size_t>();
    net.depth = doc.at("depth").get<size_t>();
    const std::string mode = doc.at("mode").get<std::string>();
    if (mode == "many_to_many") {
      net.mode = RnnMode::many_to_many;
    } else if (mode == "many_to_one") {
      net.mode = RnnMode::many_to_one;
    } else {
      throw_data("E_PARSE", "unknown recurrent mode '" + mode + "'");
    }
    net.standardizer = standardizer_from_json(doc.at("standardizer"));
    net.label_transform = label_transform_from_json(doc.at("label_transform"));
    net.params = tensors_from_json(doc.at("params"));
    if (net.params.size() != 3 * net.depth + 2) {
      throw_data("E_PARSE", "recurrent model has wrong parameter tensor count");
    }
    return net;
  } catch (const json::exception& e) {
    throw_data("E_PARSE", std::string("malformed recurrent model: ") + e.what());
  }
}

}  // namespace cardlab
