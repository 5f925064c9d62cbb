#ifndef MCDIMPUTE_NN_HPP
#define MCDIMPUTE_NN_HPP

// Dense multilayer perceptron core: layers, activations, inverted dropout,
// MSE loss, reverse-mode gradients and Adam. Everything is templated on the
// scalar type; the rest of the library instantiates it with double.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <functional>
#include <istream>
#include <numeric>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mcdimpute/errors.hpp"
#include "mcdimpute/rng.hpp"

namespace mcdi::nn {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using RowVectorX = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

using Matrix = MatrixX<double>;
using Vector = VectorX<double>;

enum class Activation { linear, relu, sigmoid };

inline std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::linear: return "linear";
    case Activation::relu: return "relu";
    case Activation::sigmoid: return "sigmoid";
  }
  return "?";
}

inline Activation activation_from_string(std::string_view s) {
  if (s == "linear") return Activation::linear;
  if (s == "relu") return Activation::relu;
  if (s == "sigmoid") return Activation::sigmoid;
  throw DataError("unknown activation '" + std::string(s) + "'");
}

template <typename Scalar>
struct DenseLayer {
  MatrixX<Scalar> weights;  // out x in
  VectorX<Scalar> bias;     // out
  Activation activation = Activation::linear;
  Scalar dropout_p = 0;     // applied to this layer's output when enabled

  Eigen::Index in() const { return weights.cols(); }
  Eigen::Index out() const { return weights.rows(); }
  Eigen::Index parameter_count() const { return weights.size() + bias.size(); }
};

template <typename Scalar>
using Network = std::vector<DenseLayer<Scalar>>;

/// Glorot-uniform weights in +-sqrt(6 / (in + out)), zero bias.
template <typename Scalar>
DenseLayer<Scalar> make_dense(Eigen::Index in, Eigen::Index out, Activation activation,
                              Scalar dropout_p, RngStream& rng) {
  if (!(dropout_p >= 0 && dropout_p < 1)) throw UsageError("dropout_p must be in [0,1)");
  DenseLayer<Scalar> layer;
  const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
  layer.weights.resize(out, in);
  for (Eigen::Index i = 0; i < layer.weights.size(); ++i)
    layer.weights.data()[i] = static_cast<Scalar>((2.0 * rng.uniform() - 1.0) * limit);
  layer.bias = VectorX<Scalar>::Zero(out);
  layer.activation = activation;
  layer.dropout_p = dropout_p;
  return layer;
}

template <typename Scalar>
Eigen::Index parameter_count(std::span<const DenseLayer<Scalar>> layers) {
  Eigen::Index n = 0;
  for (const auto& l : layers) n += l.parameter_count();
  return n;
}

template <typename Derived>
auto activate(const Eigen::MatrixBase<Derived>& z, Activation a) {
  using Scalar = typename Derived::Scalar;
  MatrixX<Scalar> out = z;
  switch (a) {
    case Activation::linear: break;
    case Activation::relu: out = out.cwiseMax(Scalar(0)); break;
    case Activation::sigmoid:
      out = (Scalar(1) + (-out.array()).exp()).inverse().matrix();
      break;
  }
  return out;
}

/// Derivative of the activation expressed through its output.
template <typename Scalar>
MatrixX<Scalar> activation_derivative(const MatrixX<Scalar>& output, Activation a) {
  switch (a) {
    case Activation::relu:
      return (output.array() > Scalar(0)).template cast<Scalar>().matrix();
    case Activation::sigmoid:
      return (output.array() * (Scalar(1) - output.array())).matrix();
    case Activation::linear: break;
  }
  return MatrixX<Scalar>::Ones(output.rows(), output.cols());
}

/// activation(x W^T + b). Dropout is not applied here.
template <typename Scalar>
MatrixX<Scalar> dense_forward(const DenseLayer<Scalar>& layer, const MatrixX<Scalar>& x) {
  if (x.cols() != layer.in())
    throw std::invalid_argument("dense_forward: input has " + std::to_string(x.cols()) +
                                " columns, layer expects " + std::to_string(layer.in()));
  MatrixX<Scalar> z = x * layer.weights.transpose();
  z.rowwise() += layer.bias.transpose();
  return activate(z, layer.activation);
}

template <typename Scalar>
struct DropoutResult {
  MatrixX<Scalar> output;
  MatrixX<Scalar> mask;  // 0 for dropped units, 1/(1-p) for kept ones
};

/// Inverted dropout: kept units are scaled by 1/(1-p) so the expectation is x.
template <typename Scalar>
DropoutResult<Scalar> dropout_apply(const MatrixX<Scalar>& x, Scalar p, RngStream& rng,
                                    bool training) {
  if (!(p >= 0 && p < 1)) throw std::invalid_argument("dropout_apply: p must be in [0,1)");
  if (!training || p == 0) return {x, MatrixX<Scalar>::Ones(x.rows(), x.cols())};
  const Scalar scale = Scalar(1) / (Scalar(1) - p);
  MatrixX<Scalar> mask(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < mask.size(); ++i)
    mask.data()[i] = rng.uniform() < static_cast<double>(p) ? Scalar(0) : scale;
  return {x.cwiseProduct(mask), std::move(mask)};
}

template <typename Scalar>
Scalar mse_loss(const MatrixX<Scalar>& pred, const MatrixX<Scalar>& target) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols())
    throw std::invalid_argument("mse_loss: shape mismatch");
  return (pred - target).squaredNorm() / static_cast<Scalar>(pred.size());
}

template <typename Scalar>
MatrixX<Scalar> mse_gradient(const MatrixX<Scalar>& pred, const MatrixX<Scalar>& target) {
  return (Scalar(2) / static_cast<Scalar>(pred.size())) * (pred - target);
}

template <typename Scalar>
struct LayerGrad {
  MatrixX<Scalar> weights;
  VectorX<Scalar> bias;
};

template <typename Scalar>
using Gradients = std::vector<LayerGrad<Scalar>>;

/// Activations recorded by a forward pass. outputs[i] is layer i's activation
/// before dropout; masks[i] is empty when dropout was not applied.
template <typename Scalar>
struct ForwardCache {
  std::vector<MatrixX<Scalar>> inputs;
  std::vector<MatrixX<Scalar>> outputs;
  std::vector<MatrixX<Scalar>> masks;

  bool empty() const { return inputs.empty(); }
};

/// Runs the network. With `dropout` set, every layer with dropout_p > 0 draws
/// a fresh mask from rng.
template <typename Scalar>
MatrixX<Scalar> forward(std::span<const DenseLayer<Scalar>> net, const MatrixX<Scalar>& x,
                        bool dropout, RngStream* rng, ForwardCache<Scalar>* cache = nullptr) {
  if (cache) {
    cache->inputs.clear();
    cache->outputs.clear();
    cache->masks.clear();
  }
  MatrixX<Scalar> h = x;
  for (const auto& layer : net) {
    MatrixX<Scalar> a = dense_forward(layer, h);
    MatrixX<Scalar> mask;
    if (dropout && layer.dropout_p > 0) {
      if (!rng) throw std::invalid_argument("forward: dropout requested without a random stream");
      auto d = dropout_apply(a, layer.dropout_p, *rng, true);
      mask = std::move(d.mask);
      if (cache) {
        cache->inputs.push_back(std::move(h));
        cache->outputs.push_back(std::move(a));
        cache->masks.push_back(mask);
      }
      h = std::move(d.output);
      continue;
    }
    if (cache) {
      cache->inputs.push_back(std::move(h));
      cache->outputs.push_back(a);
      cache->masks.emplace_back();
    }
    h = std::move(a);
  }
  return h;
}

template <typename Scalar>
MatrixX<Scalar> forward(const Network<Scalar>& net, const MatrixX<Scalar>& x, bool dropout,
                        RngStream* rng, ForwardCache<Scalar>* cache = nullptr) {
  return forward(std::span<const DenseLayer<Scalar>>(net), x, dropout, rng, cache);
}

/// Reverse pass given dLoss/dOutput. Writes one LayerGrad per layer into
/// `grads` (resized as needed) and returns dLoss/dInput.
template <typename Scalar>
MatrixX<Scalar> backprop(std::span<const DenseLayer<Scalar>> net, const ForwardCache<Scalar>& cache,
                         MatrixX<Scalar> d_output, std::span<LayerGrad<Scalar>> grads) {
  if (cache.empty() || cache.inputs.size() != net.size())
    throw std::logic_error("backprop: missing recorded activations");
  if (grads.size() != net.size()) throw std::logic_error("backprop: gradient slot count mismatch");
  for (std::size_t k = net.size(); k-- > 0;) {
    const auto& layer = net[k];
    if (cache.masks[k].size() != 0) d_output.array() *= cache.masks[k].array();
    d_output.array() *= activation_derivative(cache.outputs[k], layer.activation).array();
    grads[k].weights.noalias() = d_output.transpose() * cache.inputs[k];
    grads[k].bias = d_output.colwise().sum().transpose();
    MatrixX<Scalar> d_input = d_output * layer.weights;
    d_output = std::move(d_input);
  }
  return d_output;
}

template <typename Scalar>
struct LossAndGradients {
  Scalar loss = 0;
  Gradients<Scalar> grads;
};

/// MSE loss and exact gradients for a network whose forward pass was recorded
/// in `cache` (dropout masks are constants).
template <typename Scalar>
LossAndGradients<Scalar> backward(const Network<Scalar>& net, const MatrixX<Scalar>& target,
                                  const ForwardCache<Scalar>& cache) {
  if (cache.empty()) throw std::logic_error("backward: missing recorded activations");
  const std::size_t last = cache.outputs.size() - 1;
  MatrixX<Scalar> pred = cache.outputs[last];
  if (cache.masks[last].size() != 0) pred.array() *= cache.masks[last].array();
  LossAndGradients<Scalar> out;
  out.loss = mse_loss(pred, target);
  out.grads.resize(net.size());
  backprop(std::span<const DenseLayer<Scalar>>(net), cache, mse_gradient(pred, target),
           std::span<LayerGrad<Scalar>>(out.grads));
  return out;
}

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

template <typename Scalar>
struct AdamState {
  AdamConfig config;
  std::int64_t step = 0;
  Gradients<Scalar> first_moment;
  Gradients<Scalar> second_moment;
};

template <typename Scalar>
bool all_finite(std::span<const LayerGrad<Scalar>> grads) {
  for (const auto& g : grads)
    if (!g.weights.allFinite() || !g.bias.allFinite()) return false;
  return true;
}

/// Bias-corrected Adam update of `params` in place. Throws DivergenceError on
/// non-finite gradients without touching the parameters.
template <typename Scalar>
void adam_step(std::span<DenseLayer<Scalar>* const> params, std::span<const LayerGrad<Scalar>> grads,
               AdamState<Scalar>& state) {
  if (params.size() != grads.size()) throw std::invalid_argument("adam_step: shape mismatch");
  if (!all_finite(grads)) throw DivergenceError("divergence");
  if (state.first_moment.empty()) {
    for (const auto* p : params) {
      state.first_moment.push_back({MatrixX<Scalar>::Zero(p->out(), p->in()), VectorX<Scalar>::Zero(p->out())});
      state.second_moment.push_back(state.first_moment.back());
    }
  }
  if (state.first_moment.size() != params.size()) throw std::invalid_argument("adam_step: state mismatch");
  const auto& c = state.config;
  ++state.step;
  const Scalar b1 = static_cast<Scalar>(c.beta1), b2 = static_cast<Scalar>(c.beta2);
  const Scalar corr1 = Scalar(1) - static_cast<Scalar>(std::pow(c.beta1, static_cast<double>(state.step)));
  const Scalar corr2 = Scalar(1) - static_cast<Scalar>(std::pow(c.beta2, static_cast<double>(state.step)));
  const Scalar lr = static_cast<Scalar>(c.learning_rate), eps = static_cast<Scalar>(c.epsilon);

  auto update = [&](auto& param, const auto& g, auto& m, auto& v) {
    if (param.rows() != g.rows() || param.cols() != g.cols())
      throw std::invalid_argument("adam_step: gradient shape mismatch");
    m = b1 * m + (Scalar(1) - b1) * g;
    v = b2 * v + (Scalar(1) - b2) * g.cwiseAbs2();
    param.array() -= lr * (m.array() / corr1) / ((v.array() / corr2).sqrt() + eps);
  };
  for (std::size_t k = 0; k < params.size(); ++k) {
    update(params[k]->weights, grads[k].weights, state.first_moment[k].weights, state.second_moment[k].weights);
    update(params[k]->bias, grads[k].bias, state.first_moment[k].bias, state.second_moment[k].bias);
  }
}

template <typename Scalar>
std::vector<DenseLayer<Scalar>*> parameters_of(Network<Scalar>& net) {
  std::vector<DenseLayer<Scalar>*> out;
  for (auto& l : net) out.push_back(&l);
  return out;
}

template <typename Scalar>
struct TrainOptions {
  int epochs = 300;
  int batch_size = 32;
  AdamConfig adam;
  /// Applied to each mini-batch's inputs before the forward pass.
  std::function<void(MatrixX<Scalar>&, RngStream&)> corrupt;
};

/// Anything with trainable dense layers and a batch objective.
template <typename M, typename Scalar>
concept Trainable = requires(M m, const MatrixX<Scalar>& x, RngStream& rng, Gradients<Scalar>& g) {
  { m.parameters() } -> std::same_as<std::vector<DenseLayer<Scalar>*>>;
  { m.loss_and_gradients(x, x, rng, g) } -> std::convertible_to<Scalar>;
};

/// Shuffled mini-batch training with Adam. Returns the mean training loss of
/// every epoch.
template <typename Scalar, Trainable<Scalar> Model>
std::vector<Scalar> fit(Model& model, const MatrixX<Scalar>& inputs, const MatrixX<Scalar>& targets,
                        const TrainOptions<Scalar>& options, RngStream& rng) {
  if (options.epochs < 1) throw std::invalid_argument("train: epochs must be >= 1");
  if (options.batch_size < 1) throw std::invalid_argument("train: batch_size must be >= 1");
  if (inputs.rows() != targets.rows()) throw std::invalid_argument("train: inputs and targets not row-aligned");
  const Eigen::Index n = inputs.rows();
  if (n == 0) throw std::invalid_argument("train: no rows");

  AdamState<Scalar> adam{options.adam, 0, {}, {}};
  const auto params = model.parameters();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::vector<Scalar> history;
  history.reserve(static_cast<std::size_t>(options.epochs));
  Gradients<Scalar> grads(params.size());
  MatrixX<Scalar> xb, yb;

  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::shuffle(order.begin(), order.end(), rng.engine());
    Scalar total = 0;
    for (Eigen::Index start = 0; start < n; start += options.batch_size) {
      const Eigen::Index b = std::min<Eigen::Index>(options.batch_size, n - start);
      xb.resize(b, inputs.cols());
      yb.resize(b, targets.cols());
      for (Eigen::Index r = 0; r < b; ++r) {
        xb.row(r) = inputs.row(order[static_cast<std::size_t>(start + r)]);
        yb.row(r) = targets.row(order[static_cast<std::size_t>(start + r)]);
      }
      if (options.corrupt) options.corrupt(xb, rng);
      const Scalar loss = model.loss_and_gradients(xb, yb, rng, grads);
      if (!std::isfinite(static_cast<double>(loss)))
        throw DivergenceError("divergence: non-finite loss in epoch " + std::to_string(epoch + 1), epoch + 1);
      try {
        adam_step(std::span<DenseLayer<Scalar>* const>(params), std::span<const LayerGrad<Scalar>>(grads), adam);
      } catch (const DivergenceError&) {
        throw DivergenceError("divergence: non-finite gradient in epoch " + std::to_string(epoch + 1), epoch + 1);
      }
      total += loss * static_cast<Scalar>(b);
    }
    history.push_back(total / static_cast<Scalar>(n));
  }
  return history;
}

/// Plain MLP regressor trained on MSE; dropout active during training.
template <typename Scalar>
struct MseNetwork {
  Network<Scalar>& net;

  std::vector<DenseLayer<Scalar>*> parameters() { return parameters_of(net); }

  Scalar loss_and_gradients(const MatrixX<Scalar>& x, const MatrixX<Scalar>& y, RngStream& rng,
                            Gradients<Scalar>& grads) {
    ForwardCache<Scalar> cache;
    forward(net, x, true, &rng, &cache);
    auto lg = backward(net, y, cache);
    grads = std::move(lg.grads);
    return lg.loss;
  }
};

template <typename Scalar>
std::vector<Scalar> train(Network<Scalar>& net, const MatrixX<Scalar>& inputs, const MatrixX<Scalar>& targets,
                          const TrainOptions<Scalar>& options, RngStream& rng) {
  MseNetwork<Scalar> objective{net};
  return fit<Scalar>(objective, inputs, targets, options, rng);
}

// Text persistence. Parameters are written as hex floats so a save/load
// round trip is bit-exact.
inline constexpr int kNetworkFormatVersion = 1;

void write_network(std::ostream& os, const Network<double>& net);
Network<double> read_network(std::istream& is);
void write_layer(std::ostream& os, const DenseLayer<double>& layer);
DenseLayer<double> read_layer(std::istream& is);

}  // namespace mcdi::nn

#endif  // MCDIMPUTE_NN_HPP
