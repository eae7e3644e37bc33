// Serial reference vs OpenMP kernels. Run with OMP_NUM_THREADS set to the
// thread count of interest; both paths produce identical results.

#include <benchmark/benchmark.h>

#include "triage/kg.hpp"
#include "triage/nn/kernels.hpp"
#include "triage/rng.hpp"

using namespace triage;
using nn::Tensor;

namespace {

Tensor random(std::vector<std::size_t> shape, std::uint64_t seed) {
  Rng rng(seed);
  Tensor t(std::move(shape));
  for (auto& v : t.data()) v = rng.uniform(-1, 1);
  return t;
}

// Sequence length n, input width k (dw + dk), M filters of width 3.
struct ConvCase {
  Tensor x, f, b, dy;
  explicit ConvCase(std::size_t n, std::size_t k = 124, std::size_t m = 64)
      : x(random({n, k}, 1)), f(random({m, 3, k}, 2)), b(random({m}, 3)), dy(random({n - 2, m}, 4)) {}
};

void BM_ConvForward(benchmark::State& s) {
  ConvCase c(static_cast<std::size_t>(s.range(0)));
  for (auto _ : s) benchmark::DoNotOptimize(nn::kernels::conv1d_forward(c.x, c.f, c.b));
}

void BM_ConvForwardSerial(benchmark::State& s) {
  ConvCase c(static_cast<std::size_t>(s.range(0)));
  for (auto _ : s) benchmark::DoNotOptimize(nn::kernels::conv1d_forward_serial(c.x, c.f, c.b));
}

void BM_ConvBackward(benchmark::State& s) {
  ConvCase c(static_cast<std::size_t>(s.range(0)));
  Tensor df(c.f.shape()), db(c.b.shape());
  for (auto _ : s) benchmark::DoNotOptimize(nn::kernels::conv1d_backward(c.x, c.f, c.dy, df, db));
}

void BM_ConvBackwardSerial(benchmark::State& s) {
  ConvCase c(static_cast<std::size_t>(s.range(0)));
  Tensor df(c.f.shape()), db(c.b.shape());
  for (auto _ : s) benchmark::DoNotOptimize(nn::kernels::conv1d_backward_serial(c.x, c.f, c.dy, df, db));
}

void BM_Dense(benchmark::State& s) {
  const auto in = static_cast<std::size_t>(s.range(0));
  const auto x = random({in}, 5), w = random({100, in}, 6), b = random({100}, 7);
  for (auto _ : s) benchmark::DoNotOptimize(nn::kernels::dense_forward(x, w, b));
}

void BM_DenseSerial(benchmark::State& s) {
  const auto in = static_cast<std::size_t>(s.range(0));
  const auto x = random({in}, 5), w = random({100, in}, 6), b = random({100}, 7);
  for (auto _ : s) benchmark::DoNotOptimize(nn::kernels::dense_forward_serial(x, w, b));
}

kg::KnowledgeGraph random_graph(std::size_t n) {
  Rng rng(8);
  kg::GraphBuilder builder;
  for (std::size_t i = 0; i < n; ++i) builder.add_concept("c" + std::to_string(i), "c", "t" + std::to_string(rng.below(20)));
  for (std::size_t i = 0; i < 4 * n; ++i) {
    const auto a = rng.below(n), b = rng.below(n);
    if (a != b) builder.add_edge("c" + std::to_string(a), "c" + std::to_string(b));
  }
  return builder.build();
}

void structural_index(benchmark::State& s, kg::StructuralIndex::Options options) {
  const auto g = random_graph(static_cast<std::size_t>(s.range(0)));
  for (auto _ : s) benchmark::DoNotOptimize(kg::StructuralIndex(g, 0.1, options));
}

void BM_StructuralIndex(benchmark::State& s) { structural_index(s, {kg::Execution::parallel, false}); }
void BM_StructuralIndexSerial(benchmark::State& s) { structural_index(s, {kg::Execution::serial, false}); }
void BM_StructuralIndexProjection(benchmark::State& s) { structural_index(s, {kg::Execution::parallel, true}); }

}  // namespace

BENCHMARK(BM_ConvForward)->Arg(128)->Arg(1000);
BENCHMARK(BM_ConvForwardSerial)->Arg(128)->Arg(1000);
BENCHMARK(BM_ConvBackward)->Arg(128)->Arg(1000);
BENCHMARK(BM_ConvBackwardSerial)->Arg(128)->Arg(1000);
BENCHMARK(BM_Dense)->Arg(192)->Arg(6144);
BENCHMARK(BM_DenseSerial)->Arg(192)->Arg(6144);
BENCHMARK(BM_StructuralIndex)->Arg(1000)->Arg(4000);
BENCHMARK(BM_StructuralIndexSerial)->Arg(1000)->Arg(4000);
BENCHMARK(BM_StructuralIndexProjection)->Arg(1000)->Arg(4000);

BENCHMARK_MAIN();
