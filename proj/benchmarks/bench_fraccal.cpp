#include <benchmark/benchmark.h>

#include <random>

#include "fraccal/forward.hpp"
#include "fraccal/harness.hpp"
#include "fraccal/stencil.hpp"
#include "fraccal/toeplitz.hpp"

using namespace fraccal;

namespace {

std::vector<double> random_vector(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

void BM_ApplyOperator(benchmark::State& state, int dim) {
  const int N = static_cast<int>(state.range(0));
  const Grid g = Grid::make(dim, 1.0, 3.0, N);
  const auto sym = stencil_symbol(StencilParams{dim, 0.4, 2.0, 1.0, 3.0, N});
  FastOperator op(sym, g, random_vector(g.interior_count(), 1));
  const auto x = random_vector(g.interior_count(), 2);
  for (auto _ : state) benchmark::DoNotOptimize(op.apply(x));
  state.SetItemsProcessed(state.iterations() * static_cast<long>(g.interior_count()));
}

void BM_Apply1D(benchmark::State& state) { BM_ApplyOperator(state, 1); }
void BM_Apply2D(benchmark::State& state) { BM_ApplyOperator(state, 2); }

void BM_KrylovSolve(benchmark::State& state) {
  const int N = static_cast<int>(state.range(0));
  const int dim = static_cast<int>(state.range(1));
  const Grid g = Grid::make(dim, 1.0, 3.0, N);
  const auto sym = stencil_symbol(StencilParams{dim, 0.4, 2.0, 1.0, 3.0, N});
  auto q = random_vector(g.interior_count(), 3);
  for (auto& v : q) v = 1.0 + v;
  FastOperator op(sym, g, q);
  const auto b = random_vector(g.interior_count(), 4);
  for (auto _ : state) {
    std::vector<double> x(b.size(), 0.0);
    benchmark::DoNotOptimize(krylov_solve(op, b, x, {1e-10, 0, KrylovMethod::CG}));
  }
}

void BM_StencilBuild(benchmark::State& state) {
  const int N = static_cast<int>(state.range(0));
  const int dim = static_cast<int>(state.range(1));
  for (auto _ : state) {
    const StencilParams p{dim, 0.4, 2.0, 1.0, 3.0, N};
    benchmark::DoNotOptimize(dim == 1 ? weights_1d(p) : weights_2d(p));
  }
}

void BM_ForwardSolveEx44(benchmark::State& state) {
  const int N = static_cast<int>(state.range(0));
  const auto pr = make_preset(PresetId::Ex44);
  auto spec = build_spec(pr, N, pr.eps);
  ForwardModel model(spec);
  for (auto _ : state) benchmark::DoNotOptimize(model.solve(spec.q));
}

}  // namespace

BENCHMARK(BM_Apply1D)->RangeMultiplier(4)->Range(64, 4096);
BENCHMARK(BM_Apply2D)->RangeMultiplier(2)->Range(16, 128);
BENCHMARK(BM_KrylovSolve)->Args({256, 1})->Args({1024, 1})->Args({32, 2})->Args({64, 2})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_StencilBuild)->Args({256, 1})->Args({16, 2})->Args({64, 2})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ForwardSolveEx44)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
