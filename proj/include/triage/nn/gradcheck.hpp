#pragma once

#include <functional>
#include <span>
#include <string>

#include "triage/nn/layers.hpp"
#include "triage/rng.hpp"

namespace triage::nn {

inline constexpr double kGradCheckEps = 1e-3;
inline constexpr double kGradCheckTolerance = 1e-4;
// Denominator floor so that two gradients that are both ~0 (dead units,
// unused filters) compare by absolute difference instead of blowing up.
inline constexpr double kGradCheckFloor = 1e-7;

double relative_error(double analytic, double numeric);

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst;  // "<tensor>[index]"
  std::size_t checked = 0;

  void merge(const GradCheckResult& other);
  bool passed(double tolerance = kGradCheckTolerance) const { return max_rel_error < tolerance; }
};

// Compares analytic[i] with (loss(x + eps e_i) - loss(x - eps e_i)) / (2 eps)
// for every coordinate of `coords`, restoring each coordinate afterwards.
GradCheckResult check_coordinates(const std::function<double()>& loss, std::span<double> coords,
                                  std::span<const double> analytic, const std::string& label,
                                  double eps = kGradCheckEps);

// Checks d/dinput and d/dparams of sum(w * layer(input)) for a random fixed
// projection w. The caller keeps the input away from kinks.
GradCheckResult grad_check(Layer& layer, const Tensor& input, Rng& rng, double eps = kGradCheckEps);

}  // namespace triage::nn
