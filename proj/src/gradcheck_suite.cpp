#include "triage/gradcheck_suite.hpp"

#include <algorithm>
#include <cmath>

#include "triage/error.hpp"
#include "triage/kmcnn.hpp"
#include "triage/nn/layers.hpp"
#include "triage/rng.hpp"

namespace triage::kmcnn {

namespace {

using nn::Tensor;

constexpr std::size_t kMaxResamples = 50;

Tensor normal_tensor(std::vector<std::size_t> shape, Rng& rng) {
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = rng.normal();
  return t;
}

// Values bounded away from zero, so a +-eps step never crosses the ReLU kink.
Tensor off_kink_tensor(std::vector<std::size_t> shape, Rng& rng) {
  Tensor t(std::move(shape));
  for (double& v : t.data()) {
    const double mag = 0.1 + std::abs(rng.normal());
    v = rng.bernoulli(0.5) ? mag : -mag;
  }
  return t;
}

// Columns whose largest entry leads the runner-up by a clear margin, so the
// argmax is stable under perturbation.
Tensor pool_input(std::size_t rows, std::size_t cols, Rng& rng) {
  Tensor t = normal_tensor({rows, cols}, rng);
  for (std::size_t c = 0; c < cols; ++c) {
    std::size_t best = 0;
    for (std::size_t r = 1; r < rows; ++r) {
      if (t.at(r, c) > t.at(best, c)) best = r;
    }
    t.at(best, c) += 0.5;
  }
  return t;
}

}  // namespace

bool GradCheckReport::passed() const {
  return std::all_of(entries.begin(), entries.end(),
                     [&](const GradCheckEntry& e) { return e.result.passed(tolerance); });
}

GradCheckReport run_grad_checks(const GradCheckSuiteConfig& cfg) {
  if (cfg.trials == 0) throw ConfigError("gradcheck needs at least one trial");
  if (cfg.n < 3) throw ConfigError("gradcheck needs n >= 3 for filter width 3");
  if (cfg.k < 2) throw ConfigError("gradcheck needs k >= 2");
  if (cfg.filters == 0 || cfg.hidden_dim == 0) throw ConfigError("gradcheck needs filters and hidden_dim >= 1");

  GradCheckReport report;
  report.tolerance = cfg.tolerance;
  const std::vector<std::size_t> widths{1, 2, 3};
  for (auto h : widths) report.entries.push_back({"conv1d[h=" + std::to_string(h) + "]", {}});
  for (const char* name : {"dense", "relu", "maxpool", "dropout", "softmax_xent", "model"}) {
    report.entries.push_back({name, {}});
  }
  auto entry = [&](std::string_view name) -> nn::GradCheckResult& {
    for (auto& e : report.entries) {
      if (e.name == name) return e.result;
    }
    throw LookupError("no gradcheck entry " + std::string(name));
  };

  const std::size_t feature = widths.size() * cfg.filters;
  const std::size_t dk = cfg.k / 3;
  ModelConfig model_cfg;
  model_cfg.n = cfg.n;
  model_cfg.dw = cfg.k - dk;
  model_cfg.dk = dk;
  model_cfg.channels = 2;
  model_cfg.filter_widths = widths;
  model_cfg.filters = cfg.filters;
  model_cfg.hidden_dim = cfg.hidden_dim;

  for (std::size_t trial = 0; trial < cfg.trials; ++trial) {
    Rng rng(derive_seed(cfg.seed, trial));
    for (std::size_t i = 0; i < widths.size(); ++i) {
      nn::Conv1dLayer conv(cfg.k, widths[i], cfg.filters, rng);
      report.entries[i].result.merge(nn::grad_check(conv, normal_tensor({cfg.n, cfg.k}, rng), rng, cfg.eps));
    }
    nn::DenseLayer dense(feature, cfg.hidden_dim, rng);
    entry("dense").merge(nn::grad_check(dense, normal_tensor({feature}, rng), rng, cfg.eps));

    nn::ReluLayer relu;
    entry("relu").merge(nn::grad_check(relu, off_kink_tensor({cfg.n, cfg.filters}, rng), rng, cfg.eps));

    nn::MaxPoolLayer pool;
    entry("maxpool").merge(nn::grad_check(pool, pool_input(cfg.n, cfg.filters, rng), rng, cfg.eps));

    nn::DropoutLayer dropout(0.5, derive_seed(cfg.seed, trial, 7));
    const Tensor drop_in = normal_tensor({cfg.hidden_dim}, rng);
    dropout.forward(drop_in);
    dropout.freeze_mask(true);
    entry("dropout").merge(nn::grad_check(dropout, drop_in, rng, cfg.eps));

    nn::SoftmaxXentLayer xent(rng.below(2));
    entry("softmax_xent").merge(nn::grad_check(xent, normal_tensor({2}, rng), rng, cfg.eps));

    model_cfg.seed = derive_seed(cfg.seed, trial, 11);
    Model model(model_cfg);
    const std::size_t target = rng.below(2);
    for (std::size_t attempt = 0;; ++attempt) {
      std::vector<Tensor> inputs{normal_tensor({cfg.n, cfg.k}, rng), normal_tensor({cfg.n, cfg.k}, rng)};
      auto check = grad_check(model, inputs, target, rng, cfg.eps);
      if (!check.kink_hit) {
        entry("model").merge(check.result);
        break;
      }
      ++report.resampled;
      if (attempt + 1 == kMaxResamples) {
        throw StateError("model gradcheck kept landing on activation kinks after " +
                         std::to_string(kMaxResamples) + " draws");
      }
    }
  }
  return report;
}

}  // namespace triage::kmcnn
