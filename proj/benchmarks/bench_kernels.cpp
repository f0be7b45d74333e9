#include <benchmark/benchmark.h>

#include "anr/attention.hpp"
#include "anr/ops.hpp"
#include "anr/representation.hpp"
#include "anr/sampling.hpp"
#include "anr/spectral.hpp"
#include "anr/training.hpp"

using namespace anr;

namespace {

Tensor random_tensor(Shape shape, Prng& rng) {
  Tensor t(std::move(shape));
  for (double& v : t.data) v = rng.normal();
  return t;
}

void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Prng rng(1);
  const Tensor a = random_tensor({n, n}, rng), b = random_tensor({n, n}, rng);
  for (auto _ : state) {
    Tape t;
    benchmark::DoNotOptimize(ops::matmul(t.constant(a), t.constant(b)).value().data.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n * n));
}
BENCHMARK(BM_Matmul)->Arg(32)->Arg(128)->Arg(256);

// Forward and backward of one localized attention layer: q queries over 64 tokens.
void BM_LalForwardBackward(benchmark::State& state) {
  const auto q = static_cast<std::size_t>(state.range(0));
  Prng rng(2);
  Tensor qs = random_tensor({q, 32}, rng), ks = random_tensor({64, 32}, rng), vs = random_tensor({64, 32}, rng);
  for (auto _ : state) {
    Tape t;
    Var out = attention::lal_forward(t.leaf(qs), t.leaf(ks), t.leaf(vs), attention::kDefaultThreshold);
    t.backward(ops::sum(out));
    qs.clear_grad();
    ks.clear_grad();
    vs.clear_grad();
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(q));
}
BENCHMARK(BM_LalForwardBackward)->Arg(256)->Arg(1024);

// One training step of the image-fit ANR on a 32x32 grid.
void BM_AnrFitStep(benchmark::State& state) {
  Prng rng(3);
  repr::AnrConfig cfg;
  cfg.pe_sigma = 8.0;
  cfg.converter.width = 64;
  repr::AnrInstance model(cfg, rng);
  const Tensor coords = sampling::make_grid(sampling::GridSpec::image(32, 32));
  Tensor target(Shape{1024, 3});
  for (double& v : target.data) v = rng.uniform();
  train::FitOptions opt;
  opt.steps = 1;
  for (auto _ : state) benchmark::DoNotOptimize(train::fit_instance(model, coords, target, opt).final_mse);
}
BENCHMARK(BM_AnrFitStep)->Unit(benchmark::kMillisecond);

void BM_Dft(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Prng rng(4);
  std::vector<double> x(n);
  for (double& v : x) v = rng.normal();
  for (auto _ : state) benchmark::DoNotOptimize(spectral::dft(x).data());
}
BENCHMARK(BM_Dft)->Arg(400)->Arg(512)->Arg(4096);

}  // namespace
BENCHMARK_MAIN();
