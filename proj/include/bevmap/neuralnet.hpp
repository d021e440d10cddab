// Copyright 2026 The bevmap Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef BEVMAP_NEURALNET_HPP
#define BEVMAP_NEURALNET_HPP

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <limits>
#include <numeric>
#include <random>
#include <string>
#include <string_view>
#include <utility>
#include <type_traits>
#include <vector>

#include "bevmap/errors.hpp"

namespace bevmap::nn {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

enum class Activation { relu, tanh, linear };

std::string_view to_string(Activation a);
Activation parse_activation(std::string_view text);

/// Affine layer followed by an activation and (in training) inverted dropout.
struct LayerSpec {
  int in_dim = 0;
  int out_dim = 0;
  Activation activation = Activation::relu;
  double dropout_p = 0.0;

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

/// Two-branch dense topology. The encoder stack consumes the coordinate
/// input; the decoder consumes the concatenation [side ; encoder output].
/// With side_dim = 0 and an empty encoder this is a plain MLP on the
/// coordinates.
struct NetworkSpec {
  int coord_dim = 4;
  int side_dim = 0;
  std::vector<LayerSpec> encoder;
  std::vector<LayerSpec> decoder;

  std::size_t layer_count() const { return encoder.size() + decoder.size(); }
  const LayerSpec& layer(std::size_t i) const {
    return i < encoder.size() ? encoder[i] : decoder[i - encoder.size()];
  }
  int encoding_dim() const { return encoder.empty() ? coord_dim : encoder.back().out_dim; }
  int output_dim() const { return decoder.empty() ? encoding_dim() : decoder.back().out_dim; }
  std::size_t parameter_count() const;

  friend bool operator==(const NetworkSpec&, const NetworkSpec&) = default;
};

/// Throws ShapeError when consecutive layer widths disagree.
void validate(const NetworkSpec& spec);

template <typename Scalar>
struct DenseParams {
  Matrix<Scalar> w;  // out x in
  Vector<Scalar> b;
};

template <typename Scalar>
struct AdamMoments {
  Matrix<Scalar> m_w, v_w;
  Vector<Scalar> m_b, v_b;
};

/// Trained parameters (encoder layers first) and Adam state. `generation`
/// changes on every update so stale forward caches can be detected.
template <typename Scalar>
struct NetworkState {
  std::vector<DenseParams<Scalar>> layers;
  std::vector<AdamMoments<Scalar>> moments;
  std::int64_t step = 0;
  std::uint64_t generation = 0;
};

/// Glorot-uniform weights, zero biases, zero Adam moments.
template <typename Scalar>
NetworkState<Scalar> init_state(const NetworkSpec& spec, std::uint64_t seed) {
  validate(spec);
  std::mt19937_64 rng(seed);
  NetworkState<Scalar> state;
  for (std::size_t i = 0; i < spec.layer_count(); ++i) {
    const LayerSpec& l = spec.layer(i);
    const double limit = std::sqrt(6.0 / double(l.in_dim + l.out_dim));
    std::uniform_real_distribution<double> u(-limit, limit);
    DenseParams<Scalar> p{Matrix<Scalar>(l.out_dim, l.in_dim), Vector<Scalar>::Zero(l.out_dim)};
    for (Eigen::Index c = 0; c < p.w.cols(); ++c)
      for (Eigen::Index r = 0; r < p.w.rows(); ++r) p.w(r, c) = Scalar(u(rng));
    state.moments.push_back({Matrix<Scalar>::Zero(l.out_dim, l.in_dim),
                             Matrix<Scalar>::Zero(l.out_dim, l.in_dim),
                             Vector<Scalar>::Zero(l.out_dim), Vector<Scalar>::Zero(l.out_dim)});
    state.layers.push_back(std::move(p));
  }
  return state;
}

/// Converts parameters and Adam moments to another scalar type.
template <typename To, typename From>
NetworkState<To> cast_state(const NetworkState<From>& s) {
  NetworkState<To> out;
  out.step = s.step;
  out.generation = s.generation;
  for (const auto& l : s.layers) out.layers.push_back({l.w.template cast<To>(), l.b.template cast<To>()});
  for (const auto& m : s.moments)
    out.moments.push_back({m.m_w.template cast<To>(), m.v_w.template cast<To>(),
                           m.m_b.template cast<To>(), m.v_b.template cast<To>()});
  return out;
}

template <typename Scalar>
std::size_t parameter_count(const NetworkState<Scalar>& state) {
  std::size_t n = 0;
  for (const auto& l : state.layers) n += std::size_t(l.w.size() + l.b.size());
  return n;
}

/// Column-major batch: one sample per column.
template <typename Scalar>
struct Batch {
  Matrix<Scalar> coords;
  Matrix<Scalar> side;  // side_dim x n; zero rows when unused

  Eigen::Index size() const { return coords.cols(); }
};

/// One mask per layer, entries 0 or 1 / (1 - p); empty for layers without
/// dropout.
template <typename Scalar>
using DropoutMasks = std::vector<Matrix<Scalar>>;

/// Inverted-dropout masks (0 or 1/(1-p)) for every layer with p > 0,
/// written into `masks` and reusing its storage.
template <typename Scalar>
void sample_dropout_masks(const NetworkSpec& spec, Eigen::Index batch, std::mt19937_64& rng,
                          DropoutMasks<Scalar>& masks) {
  masks.resize(spec.layer_count());
  for (std::size_t i = 0; i < spec.layer_count(); ++i) {
    const LayerSpec& l = spec.layer(i);
    if (l.dropout_p <= 0) {
      masks[i].resize(0, 0);
      continue;
    }
    // Two keep decisions per draw, each from 32 uniform bits.
    const auto threshold = std::uint64_t(std::llround((1.0 - l.dropout_p) * 4294967296.0));
    const Scalar scale = Scalar(1) / Scalar(1.0 - l.dropout_p);
    masks[i].resize(l.out_dim, batch);
    Scalar* out = masks[i].data();
    const Eigen::Index size = masks[i].size();
    for (Eigen::Index k = 0; k < size; k += 2) {
      const std::uint64_t bits = rng();
      out[k] = (bits & 0xffffffffULL) < threshold ? scale : Scalar(0);
      if (k + 1 < size) out[k + 1] = (bits >> 32) < threshold ? scale : Scalar(0);
    }
  }
}

template <typename Scalar>
DropoutMasks<Scalar> sample_dropout_masks(const NetworkSpec& spec, Eigen::Index batch,
                                          std::mt19937_64& rng) {
  DropoutMasks<Scalar> masks;
  sample_dropout_masks(spec, batch, rng, masks);
  return masks;
}

template <typename Scalar>
struct ForwardCache {
  std::uint64_t generation = 0;
  std::vector<Matrix<Scalar>> inputs;       // layer inputs
  std::vector<Matrix<Scalar>> activations;  // post-activation, pre-dropout
  DropoutMasks<Scalar> masks;
  bool valid = false;
};

namespace detail {

template <typename Scalar>
void activate(Matrix<Scalar>& z, Activation a) {
  switch (a) {
    case Activation::relu: z = z.cwiseMax(Scalar(0)); break;
    case Activation::tanh: z = z.array().tanh().matrix(); break;
    case Activation::linear: break;
  }
}

template <typename Scalar>
void check_batch(const NetworkSpec& spec, const Batch<Scalar>& in) {
  if (in.coords.rows() != spec.coord_dim)
    throw ShapeError("forward: coordinate input has " + std::to_string(in.coords.rows()) +
                     " rows, network expects " + std::to_string(spec.coord_dim));
  if (in.side.rows() != spec.side_dim || (spec.side_dim > 0 && in.side.cols() != in.coords.cols()))
    throw ShapeError("forward: side input has shape " + std::to_string(in.side.rows()) + "x" +
                     std::to_string(in.side.cols()) + ", network expects " +
                     std::to_string(spec.side_dim) + " rows");
}

}  // namespace detail

/// Runs the network. Pass dropout masks for training-mode behavior (inverted
/// dropout) or nullptr for evaluation. When `cache` is given, everything
/// needed by backward() is stored in it.
template <typename Scalar>
Matrix<Scalar> forward(const NetworkSpec& spec, const NetworkState<Scalar>& state,
                       const Batch<Scalar>& in,
                       const std::type_identity_t<DropoutMasks<Scalar>>* masks = nullptr,
                       ForwardCache<Scalar>* cache = nullptr) {
  detail::check_batch(spec, in);
  if (state.layers.size() != spec.layer_count())
    throw ShapeError("forward: state does not match network spec");
  if (masks && masks->size() != spec.layer_count())
    throw ShapeError("forward: one dropout mask slot per layer is required");
  const std::size_t n_layers = spec.layer_count();
  const std::size_t n_enc = spec.encoder.size();
  const Eigen::Index n = in.coords.cols();
  // Layer inputs and activations live in the cache when one is given, so
  // repeated training steps reuse their storage.
  std::vector<Matrix<Scalar>> local_inputs, local_acts;
  std::vector<Matrix<Scalar>>& inputs = cache ? cache->inputs : local_inputs;
  std::vector<Matrix<Scalar>>& acts = cache ? cache->activations : local_acts;
  inputs.resize(n_layers);
  acts.resize(n_layers);
  if (cache) {
    cache->generation = state.generation;
    cache->masks.resize(n_layers);
    for (std::size_t i = 0; i < n_layers; ++i) {
      if (masks && (*masks)[i].size() > 0)
        cache->masks[i] = (*masks)[i];
      else
        cache->masks[i].resize(0, 0);
    }
    cache->valid = true;
  }

  // Writes a layer output into `dst`, placing the side input above it at
  // the encoder/decoder junction.
  auto store = [&](std::size_t next, Matrix<Scalar>& dst, const auto& value) {
    if (next == n_enc && spec.side_dim > 0) {
      dst.resize(spec.side_dim + value.rows(), n);
      dst.topRows(spec.side_dim) = in.side;
      dst.bottomRows(value.rows()) = value;
    } else {
      dst = value;
    }
  };

  store(0, inputs[0], in.coords);
  Matrix<Scalar> out;
  for (std::size_t i = 0; i < n_layers; ++i) {
    const LayerSpec& l = spec.layer(i);
    const DenseParams<Scalar>& p = state.layers[i];
    Matrix<Scalar>& z = acts[i];
    z.resize(p.w.rows(), n);
    z.noalias() = p.w * inputs[i];
    z.colwise() += p.b;
    detail::activate(z, l.activation);
    Matrix<Scalar>& dst = i + 1 < n_layers ? inputs[i + 1] : out;
    if (masks && (*masks)[i].size() > 0) {
      if ((*masks)[i].rows() != z.rows() || (*masks)[i].cols() != z.cols())
        throw ShapeError("forward: dropout mask shape mismatch");
      store(i + 1, dst, z.cwiseProduct((*masks)[i]));
    } else {
      store(i + 1, dst, z);
    }
  }
  return out;
}

template <typename Scalar>
struct Gradients {
  std::vector<DenseParams<Scalar>> layers;
  Matrix<Scalar> coords;  // d loss / d coordinate input
  Matrix<Scalar> side;    // d loss / d side input
};

/// Reverse-mode pass through the cached forward computation, writing into
/// `g` and reusing its storage. Throws Error when the cache is stale
/// (parameters updated since forward()).
template <typename Scalar>
void backward(const NetworkSpec& spec, const NetworkState<Scalar>& state,
              const ForwardCache<Scalar>& cache,
              const std::type_identity_t<Matrix<Scalar>>& upstream, Gradients<Scalar>& g) {
  if (!cache.valid || cache.inputs.size() != spec.layer_count())
    throw Error("backward: cache does not come from this network");
  if (cache.generation != state.generation)
    throw Error("backward: stale cache, parameters changed since forward");
  const Eigen::Index n = cache.inputs.front().cols();
  if (upstream.rows() != spec.output_dim() || upstream.cols() != n)
    throw ShapeError("backward: upstream gradient shape mismatch");

  g.layers.resize(spec.layer_count());
  Matrix<Scalar> d = upstream, dx;
  for (std::size_t i = spec.layer_count(); i-- > 0;) {
    const LayerSpec& l = spec.layer(i);
    if (cache.masks[i].size() > 0) d.array() *= cache.masks[i].array();
    const Matrix<Scalar>& a = cache.activations[i];
    switch (l.activation) {
      case Activation::relu: d.array() *= (a.array() > Scalar(0)).template cast<Scalar>(); break;
      case Activation::tanh: d.array() *= Scalar(1) - a.array().square(); break;
      case Activation::linear: break;
    }
    g.layers[i].w.resize(state.layers[i].w.rows(), state.layers[i].w.cols());
    g.layers[i].w.noalias() = d * cache.inputs[i].transpose();
    g.layers[i].b = d.rowwise().sum();
    dx.resize(state.layers[i].w.cols(), n);
    dx.noalias() = state.layers[i].w.transpose() * d;
    // At the junction the upper rows belong to the side input.
    if (i == spec.encoder.size() && spec.side_dim > 0) {
      g.side = dx.topRows(spec.side_dim);
      d = dx.bottomRows(dx.rows() - spec.side_dim);
    } else {
      std::swap(d, dx);
    }
  }
  if (spec.side_dim == 0) g.side.resize(0, n);
  g.coords = std::move(d);
}

template <typename Scalar>
Gradients<Scalar> backward(const NetworkSpec& spec, const NetworkState<Scalar>& state,
                           const ForwardCache<Scalar>& cache,
                           const std::type_identity_t<Matrix<Scalar>>& upstream) {
  Gradients<Scalar> g;
  backward(spec, state, cache, upstream, g);
  return g;
}

template <typename Scalar>
struct Loss {
  Scalar value;
  Matrix<Scalar> gradient;  // d value / d pred
};

/// Mean squared error over every element of the batch.
template <typename Scalar>
Loss<Scalar> mse_loss(const Matrix<Scalar>& pred, const std::type_identity_t<Matrix<Scalar>>& target) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols())
    throw ShapeError("mse_loss: prediction and target shapes differ");
  if (pred.size() == 0) throw ShapeError("mse_loss: empty batch");
  const Matrix<Scalar> diff = pred - target;
  const Scalar count(pred.size());
  return {diff.squaredNorm() / count, Scalar(2) * diff / count};
}

struct Hyper {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int batch_size = 128;
  int max_epochs = 100;
  int patience = 10;
  std::uint64_t rng_seed = 0;
};

void validate(const Hyper& h);

namespace detail {

template <typename Derived>
void check_finite(const Eigen::MatrixBase<Derived>& m, std::size_t layer, const char* tensor) {
  if (m.allFinite()) return;
  for (Eigen::Index c = 0; c < m.cols(); ++c)
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      if (!std::isfinite(double(m(r, c))))
        throw NonFiniteError("adam_step: non-finite gradient in layer " + std::to_string(layer) +
                             " " + tensor + " at (" + std::to_string(r) + ", " +
                             std::to_string(c) + ")");
}

template <typename Scalar, typename Param, typename Grad>
void adam_update(Param& theta, Param& m, Param& v, const Grad& g, const Hyper& h, Scalar c1,
                 Scalar c2) {
  using Array = Eigen::Array<Scalar, Eigen::Dynamic, 1>;
  const Scalar b1(h.beta1), b2(h.beta2), lr(h.lr), eps(h.epsilon);
  // Chunked so the three passes stay in cache.
  constexpr Eigen::Index kChunk = 4096;
  const Eigen::Index size = theta.size();
  for (Eigen::Index s = 0; s < size; s += kChunk) {
    const Eigen::Index len = std::min(kChunk, size - s);
    Eigen::Map<Array> t(theta.data() + s, len), mm(m.data() + s, len), vv(v.data() + s, len);
    const Eigen::Map<const Array> gg(g.data() + s, len);
    mm = b1 * mm + (Scalar(1) - b1) * gg;
    vv = b2 * vv + (Scalar(1) - b2) * gg * gg;
    t -= lr * (mm / c1) / ((vv / c2).sqrt() + eps);
  }
}

}  // namespace detail

/// Adam with bias correction. Throws NonFiniteError naming the offending
/// parameter before any state is modified.
template <typename Scalar>
void adam_step(NetworkState<Scalar>& state, const Gradients<Scalar>& grads, const Hyper& h) {
  if (grads.layers.size() != state.layers.size())
    throw ShapeError("adam_step: gradient does not match state");
  for (std::size_t i = 0; i < grads.layers.size(); ++i) {
    if (grads.layers[i].w.rows() != state.layers[i].w.rows() ||
        grads.layers[i].w.cols() != state.layers[i].w.cols() ||
        grads.layers[i].b.size() != state.layers[i].b.size())
      throw ShapeError("adam_step: gradient shape mismatch in layer " + std::to_string(i));
    detail::check_finite(grads.layers[i].w, i, "weight");
    detail::check_finite(grads.layers[i].b, i, "bias");
  }
  ++state.step;
  ++state.generation;
  const Scalar c1 = Scalar(1) - std::pow(Scalar(h.beta1), Scalar(state.step));
  const Scalar c2 = Scalar(1) - std::pow(Scalar(h.beta2), Scalar(state.step));
  for (std::size_t i = 0; i < state.layers.size(); ++i) {
    auto& p = state.layers[i];
    auto& m = state.moments[i];
    detail::adam_update(p.w, m.m_w, m.v_w, grads.layers[i].w, h, c1, c2);
    detail::adam_update(p.b, m.m_b, m.v_b, grads.layers[i].b, h, c1, c2);
  }
}

/// Inputs and regression targets, one sample per column.
template <typename Scalar>
struct TrainingData {
  Batch<Scalar> inputs;
  Matrix<Scalar> targets;

  Eigen::Index size() const { return targets.cols(); }

  TrainingData subset(const std::vector<Eigen::Index>& idx) const {
    TrainingData out;
    out.inputs.coords = inputs.coords(Eigen::all, idx);
    out.inputs.side = inputs.side.rows() > 0 ? Matrix<Scalar>(inputs.side(Eigen::all, idx))
                                             : Matrix<Scalar>(0, Eigen::Index(idx.size()));
    out.targets = targets(Eigen::all, idx);
    return out;
  }
};

template <typename To, typename From>
TrainingData<To> cast_data(const TrainingData<From>& d) {
  TrainingData<To> out;
  out.inputs.coords = d.inputs.coords.template cast<To>();
  out.inputs.side = d.inputs.side.template cast<To>();
  out.targets = d.targets.template cast<To>();
  return out;
}

struct EpochStats {
  int epoch = 0;
  double train_loss = 0;
  double val_loss = 0;
};

template <typename Scalar>
struct TrainResult {
  NetworkState<Scalar> state;  // parameters of the best validation epoch
  std::vector<EpochStats> history;
  int best_epoch = 0;
};

class TrainingDivergedError : public NonFiniteError {
 public:
  TrainingDivergedError(const std::string& what, std::vector<EpochStats> history)
      : NonFiniteError(what), history_(std::move(history)) {}
  const std::vector<EpochStats>& history() const { return history_; }

 private:
  std::vector<EpochStats> history_;
};

/// Evaluation-mode mean loss, computed in batches.
template <typename Scalar>
double evaluate_loss(const NetworkSpec& spec, const NetworkState<Scalar>& state,
                     const TrainingData<Scalar>& data, int batch_size) {
  double total = 0;
  const Eigen::Index n = data.size();
  for (Eigen::Index start = 0; start < n; start += batch_size) {
    const Eigen::Index len = std::min<Eigen::Index>(batch_size, n - start);
    Batch<Scalar> b{data.inputs.coords.middleCols(start, len),
                    data.inputs.side.rows() > 0 ? Matrix<Scalar>(data.inputs.side.middleCols(start, len))
                                                : Matrix<Scalar>(0, len)};
    const Matrix<Scalar> pred = forward(spec, state, b);
    total += double((pred - data.targets.middleCols(start, len)).squaredNorm());
  }
  return total / double(n * data.targets.rows());
}

/// Mini-batch Adam on MSE with per-epoch shuffling and early stopping:
/// training stops once `patience` consecutive epochs fail to improve the
/// validation loss (or the training loss when `val` is empty). Deterministic
/// for a fixed hyper.rng_seed.
template <typename Scalar>
TrainResult<Scalar> train(const NetworkSpec& spec, const TrainingData<Scalar>& train_set,
                          const TrainingData<Scalar>& val, const Hyper& hyper,
                          const std::function<void(const EpochStats&)>& on_epoch = {}) {
  validate(hyper);
  if (train_set.size() == 0) throw InsufficientDataError("train: empty training set");
  if (train_set.targets.rows() != spec.output_dim())
    throw ShapeError("train: target width does not match network output");

  TrainResult<Scalar> result;
  NetworkState<Scalar> state = init_state<Scalar>(spec, hyper.rng_seed);
  std::mt19937_64 shuffle_rng(hyper.rng_seed ^ 0x5eed5eed5eed5eedULL);
  std::mt19937_64 dropout_rng(hyper.rng_seed ^ 0xd0d0d0d0d0d0d0d0ULL);
  std::vector<Eigen::Index> order(train_set.size());
  std::iota(order.begin(), order.end(), Eigen::Index(0));

  double best = std::numeric_limits<double>::infinity();
  int since_best = 0;
  result.state = state;
  ForwardCache<Scalar> cache;
  DropoutMasks<Scalar> masks;
  Gradients<Scalar> grads;
  for (int epoch = 1; epoch <= hyper.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double sum = 0;
    for (std::size_t start = 0; start < order.size(); start += std::size_t(hyper.batch_size)) {
      const std::size_t len = std::min<std::size_t>(hyper.batch_size, order.size() - start);
      const std::vector<Eigen::Index> idx(order.begin() + start, order.begin() + start + len);
      const TrainingData<Scalar> batch = train_set.subset(idx);
      sample_dropout_masks(spec, Eigen::Index(len), dropout_rng, masks);
      const Matrix<Scalar> pred = forward(spec, state, batch.inputs, &masks, &cache);
      const Loss<Scalar> loss = mse_loss(pred, batch.targets);
      if (!std::isfinite(double(loss.value)))
        throw TrainingDivergedError("train: non-finite loss in epoch " + std::to_string(epoch),
                                    result.history);
      sum += double(loss.value) * double(len);
      backward(spec, state, cache, loss.gradient, grads);
      adam_step(state, grads, hyper);
    }
    EpochStats stats;
    stats.epoch = epoch;
    stats.train_loss = sum / double(order.size());
    stats.val_loss = val.size() > 0 ? evaluate_loss(spec, state, val, std::max(hyper.batch_size, 256))
                                    : stats.train_loss;
    if (!std::isfinite(stats.val_loss))
      throw TrainingDivergedError("train: non-finite validation loss in epoch " +
                                      std::to_string(epoch),
                                  result.history);
    result.history.push_back(stats);
    if (on_epoch) on_epoch(stats);
    if (stats.val_loss < best) {
      best = stats.val_loss;
      since_best = 0;
      result.state = state;
      result.best_epoch = epoch;
    } else {
      ++since_best;
    }
    if (since_best >= hyper.patience) break;
  }
  return result;
}

/// Tensor container. Layout: a text header
///   bevmap-net 1 / coord_dim / side_dim / encoder <n> / layer lines /
///   decoder <n> / layer lines / step <t> / tensors <k> / end
/// followed by k tensors, each as u32 rows, u32 cols and rows*cols
/// little-endian float64 values in row-major order. Per layer the tensors
/// are w, b, m_w, v_w, m_b, v_b.
void write_network(std::ostream& out, const NetworkSpec& spec, const NetworkState<double>& state);
std::pair<NetworkSpec, NetworkState<double>> read_network(std::istream& in);

}  // namespace bevmap::nn

#endif  // BEVMAP_NEURALNET_HPP
