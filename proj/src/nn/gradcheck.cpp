#include "triage/nn/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace triage::nn {

double relative_error(double analytic, double numeric) {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), kGradCheckFloor});
  return std::abs(analytic - numeric) / scale;
}

void GradCheckResult::merge(const GradCheckResult& other) {
  if (worst.empty() || other.max_rel_error > max_rel_error) {
    max_rel_error = other.max_rel_error;
    worst = other.worst;
  }
  checked += other.checked;
}

GradCheckResult check_coordinates(const std::function<double()>& loss, std::span<double> coords,
                                  std::span<const double> analytic, const std::string& label, double eps) {
  GradCheckResult r;
  for (std::size_t i = 0; i < coords.size(); ++i) {
    const double saved = coords[i];
    coords[i] = saved + eps;
    const double up = loss();
    coords[i] = saved - eps;
    const double down = loss();
    coords[i] = saved;
    const double err = relative_error(analytic[i], (up - down) / (2.0 * eps));
    if (r.worst.empty() || err > r.max_rel_error) {
      r.max_rel_error = err;
      r.worst = label + "[" + std::to_string(i) + "]";
    }
    ++r.checked;
  }
  return r;
}

GradCheckResult grad_check(Layer& layer, const Tensor& input, Rng& rng, double eps) {
  Tensor x = input;
  const Tensor y0 = layer.forward(x);
  Tensor w(y0.shape());
  for (double& v : w.data()) v = rng.uniform(-1.0, 1.0);

  auto loss = [&] {
    const Tensor y = layer.forward(x);
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) s += w[i] * y[i];
    return s;
  };

  layer.zero_grad();
  layer.forward(x);
  const Tensor dx = layer.backward(w);
  std::vector<Tensor> param_grads;
  for (auto* p : layer.parameters()) param_grads.push_back(p->grad);

  GradCheckResult result = check_coordinates(loss, x.data(), dx.data(), layer.name() + ".input", eps);
  auto params = layer.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) {
    result.merge(check_coordinates(loss, params[i]->value.data(), param_grads[i].data(),
                                   layer.name() + "." + params[i]->name, eps));
  }
  return result;
}

}  // namespace triage::nn
