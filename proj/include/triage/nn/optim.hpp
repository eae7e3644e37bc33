#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "triage/nn/tensor.hpp"

namespace triage::nn {

struct AdamConfig {
  double learning_rate = 1e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::uint64_t step = 0;
};

// One bias-corrected Adam update. state.m / state.v are sized on first use.
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state, const AdamConfig& cfg);

class Optimizer {
 public:
  virtual ~Optimizer() = default;
  virtual void step(std::span<Parameter* const> params) = 0;
};

class Adam : public Optimizer {
 public:
  explicit Adam(AdamConfig cfg) : cfg_(cfg) {}
  void step(std::span<Parameter* const> params) override;
  std::uint64_t steps() const { return states_.empty() ? 0 : states_.front().step; }

 private:
  AdamConfig cfg_;
  std::vector<AdamState> states_;
};

class Sgd : public Optimizer {
 public:
  explicit Sgd(double learning_rate) : lr_(learning_rate) {}
  void step(std::span<Parameter* const> params) override;

 private:
  double lr_;
};

}  // namespace triage::nn
