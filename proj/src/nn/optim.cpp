#include "triage/nn/optim.hpp"

#include <cmath>

#include "triage/error.hpp"

namespace triage::nn {

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state, const AdamConfig& cfg) {
  if (params.size() != grads.size()) throw ShapeError("adam: parameter and gradient sizes differ");
  if (state.m.empty() && state.v.empty()) {
    state.m.assign(params.size(), 0.0);
    state.v.assign(params.size(), 0.0);
  }
  if (state.m.size() != params.size() || state.v.size() != params.size()) {
    throw ShapeError("adam: optimizer state does not match parameter size");
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
    state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g;
    const double m_hat = state.m[i] / c1;
    const double v_hat = state.v[i] / c2;
    params[i] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
  }
}

void Adam::step(std::span<Parameter* const> params) {
  if (states_.empty()) states_.resize(params.size());
  if (states_.size() != params.size()) throw ShapeError("adam: parameter list changed between steps");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i]->grad.same_shape(params[i]->value)) throw ShapeError("adam: gradient shape mismatch for " + params[i]->name);
    adam_step(params[i]->value.data(), params[i]->grad.data(), states_[i], cfg_);
  }
}

void Sgd::step(std::span<Parameter* const> params) {
  for (auto* p : params) {
    if (!p->grad.same_shape(p->value)) throw ShapeError("sgd: gradient shape mismatch for " + p->name);
    for (std::size_t i = 0; i < p->value.size(); ++i) p->value[i] -= lr_ * p->grad[i];
  }
}

}  // namespace triage::nn
