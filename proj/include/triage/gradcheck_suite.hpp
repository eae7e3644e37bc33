#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "triage/nn/gradcheck.hpp"

namespace triage::kmcnn {

// Desk-scale gradient checks of every layer type and of the full model.
struct GradCheckSuiteConfig {
  std::size_t trials = 100;
  std::size_t n = 16;
  std::size_t k = 12;
  std::size_t filters = 4;
  std::size_t hidden_dim = 8;
  std::uint64_t seed = 1;
  double eps = nn::kGradCheckEps;
  double tolerance = nn::kGradCheckTolerance;
};

struct GradCheckEntry {
  std::string name;  // "conv1d[h=2]", "dense", ..., "model"
  nn::GradCheckResult result;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  std::size_t resampled = 0;  // model trials redrawn after hitting a kink
  double tolerance = nn::kGradCheckTolerance;

  bool passed() const;
};

GradCheckReport run_grad_checks(const GradCheckSuiteConfig& cfg);

}  // namespace triage::kmcnn
