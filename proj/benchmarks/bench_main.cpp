#include <benchmark/benchmark.h>

#include <random>

#include "niso/autodiff.hpp"
#include "niso/isometry_solver.hpp"
#include "niso/linalg.hpp"
#include "niso/trainer.hpp"

namespace {

niso::Tensor gaussian(std::size_t r, std::size_t c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  niso::Tensor t({r, c});
  for (double& x : t.storage()) x = g(rng);
  return t;
}

void BM_Svd(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const niso::Tensor a = gaussian(n, n, 1);
  for (auto _ : state) benchmark::DoNotOptimize(niso::svd(a));
}
BENCHMARK(BM_Svd)->Arg(8)->Arg(16)->Arg(32)->Arg(64);

void BM_ProcrustesForwardBackward(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  niso::Tensor a = gaussian(n, n, 2);
  a.requires_grad = true;
  for (auto _ : state) {
    a.zero_grad();
    niso::Tape tape;
    tape.backward(niso::sum(niso::procrustes_project(tape.watch(a))));
    benchmark::DoNotOptimize(a.grad.data());
  }
}
BENCHMARK(BM_ProcrustesForwardBackward)->Arg(8)->Arg(16)->Arg(32)->Arg(64);

void BM_EstimateMap(benchmark::State& state) {
  const auto k = static_cast<std::size_t>(state.range(0));
  const niso::Tensor ca = gaussian(k, 64, 3), cb = gaussian(k, 64, 4);
  niso::Tensor eig({k});
  for (std::size_t i = 0; i < k; ++i) eig[i] = static_cast<double>(i / 2);
  for (auto _ : state) {
    niso::Tape tape;
    benchmark::DoNotOptimize(niso::estimate_map(tape.constant(ca), tape.constant(cb),
                                                niso::eigenvalue_mask(tape.constant(eig), niso::MaskMode::fuzzy)));
  }
}
BENCHMARK(BM_EstimateMap)->Arg(16)->Arg(32)->Arg(64);

void BM_TrainStep(benchmark::State& state) {
  niso::TrainConfig c;
  c.steps = 1000000;
  c.k = static_cast<std::size_t>(state.range(0));
  c.init.eigval_scale = 3.0;
  niso::Trainer trainer(c);
  for (auto _ : state) benchmark::DoNotOptimize(trainer.step());
}
BENCHMARK(BM_TrainStep)->Arg(16)->Arg(32)->Unit(benchmark::kMicrosecond);

}  // namespace
BENCHMARK_MAIN();
