#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "triage/nn/tensor.hpp"
#include "triage/rng.hpp"

namespace triage::nn {

enum class Mode { train, eval };

// Max over rows of an L x M matrix. argmax holds the first row attaining the
// maximum of each column.
struct PoolResult {
  Tensor values;                   // M
  std::vector<std::size_t> argmax;  // M
};
PoolResult maxpool_over_time(const Tensor& x);
// Routes dy[m] to row argmax[m]; returns an L x M gradient.
Tensor maxpool_backward(const std::vector<std::size_t>& argmax, std::size_t rows, const Tensor& dy);

Tensor relu(const Tensor& x);
Tensor relu_backward(const Tensor& pre_activation, const Tensor& dy);

// Inverted dropout. In train mode each element is kept with probability
// 1 - rate and scaled by 1 / (1 - rate); mask holds the applied factor.
struct DropoutResult {
  Tensor values;
  Tensor mask;
};
DropoutResult dropout(const Tensor& x, double rate, Mode mode, Rng& rng);
Tensor dropout_backward(const Tensor& mask, const Tensor& dy);

Tensor softmax(const Tensor& logits);
// Cross-entropy of softmax(logits) against a class index.
double softmax_xent(const Tensor& logits, std::size_t target);
// d loss / d logits = softmax(logits) - onehot(target).
Tensor softmax_xent_backward(const Tensor& probabilities, std::size_t target);

// Glorot uniform with limit sqrt(6 / (fan_in + fan_out)).
void glorot_uniform(Tensor& t, std::size_t fan_in, std::size_t fan_out, Rng& rng);

// Stateful layers with a forward cache, used where a layer is exercised on
// its own (gradient checks, the gradcheck subcommand). backward() before
// forward() throws StateError.
class Layer {
 public:
  virtual ~Layer() = default;
  virtual std::string name() const = 0;
  virtual Tensor forward(const Tensor& x) = 0;
  virtual Tensor backward(const Tensor& dy) = 0;
  virtual std::vector<Parameter*> parameters() { return {}; }
  void zero_grad() {
    for (auto* p : parameters()) p->zero_grad();
  }
};

class Conv1dLayer : public Layer {
 public:
  Conv1dLayer(std::size_t width, std::size_t height, std::size_t filters, Rng& rng);
  std::string name() const override { return "conv1d"; }
  Tensor forward(const Tensor& x) override;
  Tensor backward(const Tensor& dy) override;
  std::vector<Parameter*> parameters() override { return {&filters_, &bias_}; }

 private:
  Parameter filters_, bias_;
  std::optional<Tensor> input_;
};

class DenseLayer : public Layer {
 public:
  DenseLayer(std::size_t in, std::size_t out, Rng& rng);
  std::string name() const override { return "dense"; }
  Tensor forward(const Tensor& x) override;
  Tensor backward(const Tensor& dy) override;
  std::vector<Parameter*> parameters() override { return {&weight_, &bias_}; }

 private:
  Parameter weight_, bias_;
  std::optional<Tensor> input_;
};

class ReluLayer : public Layer {
 public:
  std::string name() const override { return "relu"; }
  Tensor forward(const Tensor& x) override;
  Tensor backward(const Tensor& dy) override;

 private:
  std::optional<Tensor> input_;
};

class MaxPoolLayer : public Layer {
 public:
  std::string name() const override { return "maxpool"; }
  Tensor forward(const Tensor& x) override;
  Tensor backward(const Tensor& dy) override;

 private:
  std::optional<PoolResult> cache_;
  std::size_t rows_ = 0;
};

class DropoutLayer : public Layer {
 public:
  DropoutLayer(double rate, std::uint64_t seed);
  std::string name() const override { return "dropout"; }
  void set_mode(Mode mode) { mode_ = mode; }
  // When set, forward() reuses the previous mask instead of drawing a new one.
  void freeze_mask(bool frozen) { frozen_ = frozen; }
  Tensor forward(const Tensor& x) override;
  Tensor backward(const Tensor& dy) override;

 private:
  double rate_;
  Mode mode_ = Mode::train;
  bool frozen_ = false;
  Rng rng_;
  std::optional<Tensor> mask_;
};

// Maps logits to a one-element loss tensor for a fixed target class.
class SoftmaxXentLayer : public Layer {
 public:
  explicit SoftmaxXentLayer(std::size_t target) : target_(target) {}
  std::string name() const override { return "softmax_xent"; }
  Tensor forward(const Tensor& logits) override;
  Tensor backward(const Tensor& dy) override;

 private:
  std::size_t target_;
  std::optional<Tensor> probabilities_;
};

}  // namespace triage::nn
