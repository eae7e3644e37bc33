#include "triage/nn/layers.hpp"

#include <algorithm>
#include <cmath>

#include "triage/error.hpp"
#include "triage/nn/kernels.hpp"

namespace triage::nn {

PoolResult maxpool_over_time(const Tensor& x) {
  if (x.rank() != 2) throw ShapeError("maxpool expects an L x M matrix");
  if (x.dim(0) == 0) throw ShapeError("maxpool over an empty sequence");
  const std::size_t rows = x.dim(0), cols = x.dim(1);
  PoolResult r{Tensor::vector(cols), std::vector<std::size_t>(cols, 0)};
  for (std::size_t m = 0; m < cols; ++m) {
    double best = x.at(0, m);
    std::size_t arg = 0;
    for (std::size_t i = 1; i < rows; ++i) {
      if (x.at(i, m) > best) best = x.at(i, m), arg = i;
    }
    r.values[m] = best;
    r.argmax[m] = arg;
  }
  return r;
}

Tensor maxpool_backward(const std::vector<std::size_t>& argmax, std::size_t rows, const Tensor& dy) {
  if (dy.size() != argmax.size()) throw ShapeError("maxpool backward: gradient length mismatch");
  Tensor dx = Tensor::matrix(rows, argmax.size());
  for (std::size_t m = 0; m < argmax.size(); ++m) dx.at(argmax[m], m) = dy[m];
  return dx;
}

Tensor relu(const Tensor& x) {
  Tensor y = x;
  for (double& v : y.data()) v = v > 0.0 ? v : 0.0;
  return y;
}

Tensor relu_backward(const Tensor& pre_activation, const Tensor& dy) {
  if (!pre_activation.same_shape(dy)) throw ShapeError("relu backward: gradient shape mismatch");
  Tensor dx = dy;
  for (std::size_t i = 0; i < dx.size(); ++i) {
    if (!(pre_activation[i] > 0.0)) dx[i] = 0.0;
  }
  return dx;
}

DropoutResult dropout(const Tensor& x, double rate, Mode mode, Rng& rng) {
  if (!(rate >= 0.0 && rate < 1.0)) throw ConfigError("dropout rate must be in [0, 1)");
  DropoutResult r{x, Tensor(x.shape(), 1.0)};
  if (mode == Mode::eval || rate == 0.0) return r;
  const double scale = 1.0 / (1.0 - rate);
  for (std::size_t i = 0; i < x.size(); ++i) {
    r.mask[i] = rng.uniform01() < rate ? 0.0 : scale;
    r.values[i] = x[i] * r.mask[i];
  }
  return r;
}

Tensor dropout_backward(const Tensor& mask, const Tensor& dy) {
  if (!mask.same_shape(dy)) throw ShapeError("dropout backward: gradient shape mismatch");
  Tensor dx = dy;
  for (std::size_t i = 0; i < dx.size(); ++i) dx[i] *= mask[i];
  return dx;
}

Tensor softmax(const Tensor& logits) {
  Tensor p = logits;
  const double top = *std::max_element(p.data().begin(), p.data().end());
  double total = 0.0;
  for (double& v : p.data()) total += (v = std::exp(v - top));
  for (double& v : p.data()) v /= total;
  return p;
}

double softmax_xent(const Tensor& logits, std::size_t target) {
  if (target >= logits.size()) throw ShapeError("target class out of range");
  const double top = *std::max_element(logits.data().begin(), logits.data().end());
  double total = 0.0;
  for (double v : logits.data()) total += std::exp(v - top);
  return -(logits[target] - top - std::log(total));
}

Tensor softmax_xent_backward(const Tensor& probabilities, std::size_t target) {
  if (target >= probabilities.size()) throw ShapeError("target class out of range");
  Tensor d = probabilities;
  d[target] -= 1.0;
  return d;
}

void glorot_uniform(Tensor& t, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (double& v : t.data()) v = rng.uniform(-limit, limit);
}

namespace {

const Tensor& cached(const std::optional<Tensor>& t, const char* layer) {
  if (!t) throw StateError(std::string(layer) + ": backward called before forward");
  return *t;
}

}  // namespace

Conv1dLayer::Conv1dLayer(std::size_t width, std::size_t height, std::size_t filters, Rng& rng)
    : filters_("filters", Tensor({filters, height, width})), bias_("bias", Tensor::vector(filters)) {
  glorot_uniform(filters_.value, height * width, height * filters, rng);
}

Tensor Conv1dLayer::forward(const Tensor& x) {
  require_finite(x, "conv1d input");
  input_ = x;
  return kernels::conv1d_forward(x, filters_.value, bias_.value);
}

Tensor Conv1dLayer::backward(const Tensor& dy) {
  return kernels::conv1d_backward(cached(input_, "conv1d"), filters_.value, dy, filters_.grad, bias_.grad);
}

DenseLayer::DenseLayer(std::size_t in, std::size_t out, Rng& rng)
    : weight_("weight", Tensor::matrix(out, in)), bias_("bias", Tensor::vector(out)) {
  glorot_uniform(weight_.value, in, out, rng);
}

Tensor DenseLayer::forward(const Tensor& x) {
  require_finite(x, "dense input");
  input_ = x;
  return kernels::dense_forward(x, weight_.value, bias_.value);
}

Tensor DenseLayer::backward(const Tensor& dy) {
  return kernels::dense_backward(cached(input_, "dense"), weight_.value, dy, weight_.grad, bias_.grad);
}

Tensor ReluLayer::forward(const Tensor& x) {
  require_finite(x, "relu input");
  input_ = x;
  return relu(x);
}

Tensor ReluLayer::backward(const Tensor& dy) { return relu_backward(cached(input_, "relu"), dy); }

Tensor MaxPoolLayer::forward(const Tensor& x) {
  require_finite(x, "maxpool input");
  cache_ = maxpool_over_time(x);
  rows_ = x.dim(0);
  return cache_->values;
}

Tensor MaxPoolLayer::backward(const Tensor& dy) {
  if (!cache_) throw StateError("maxpool: backward called before forward");
  return maxpool_backward(cache_->argmax, rows_, dy);
}

DropoutLayer::DropoutLayer(double rate, std::uint64_t seed) : rate_(rate), rng_(seed) {
  if (!(rate >= 0.0 && rate < 1.0)) throw ConfigError("dropout rate must be in [0, 1)");
}

Tensor DropoutLayer::forward(const Tensor& x) {
  require_finite(x, "dropout input");
  if (frozen_ && mask_ && mask_->same_shape(x)) {
    Tensor y = x;
    for (std::size_t i = 0; i < y.size(); ++i) y[i] *= (*mask_)[i];
    return y;
  }
  auto r = dropout(x, rate_, mode_, rng_);
  mask_ = std::move(r.mask);
  return std::move(r.values);
}

Tensor DropoutLayer::backward(const Tensor& dy) { return dropout_backward(cached(mask_, "dropout"), dy); }

Tensor SoftmaxXentLayer::forward(const Tensor& logits) {
  require_finite(logits, "softmax input");
  probabilities_ = softmax(logits);
  return Tensor::vector(1, softmax_xent(logits, target_));
}

Tensor SoftmaxXentLayer::backward(const Tensor& dy) {
  Tensor d = softmax_xent_backward(cached(probabilities_, "softmax_xent"), target_);
  for (double& v : d.data()) v *= dy[0];
  return d;
}

}  // namespace triage::nn
