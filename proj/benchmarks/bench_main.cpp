#include <benchmark/benchmark.h>

#include <vector>

#include "mplab/dense.hpp"
#include "mplab/generate.hpp"
#include "mplab/prec.hpp"
#include "mplab/qilu.hpp"
#include "mplab/sparse.hpp"

using namespace mplab;

namespace {

const Format& format_arg(int64_t i) {
  static const Format fmts[] = {fp16, bf16, fp32, fp64};
  return fmts[i];
}

void BM_RoundValue(benchmark::State& state) {
  const Format& fmt = format_arg(state.range(0));
  Rng rng(1);
  std::vector<double> xs(4096);
  for (auto& x : xs) x = rng.normal();
  for (auto _ : state) {
    double acc = 0.0;
    for (double x : xs) acc += round_value(x, fmt);
    benchmark::DoNotOptimize(acc);
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(xs.size()));
  state.SetLabel(format_name(fmt));
}
BENCHMARK(BM_RoundValue)->DenseRange(0, 3);

void BM_RoundStochastic(benchmark::State& state) {
  const Format fmt = fp16.with_rounding(Rounding::stochastic);
  Rng rng(2);
  std::vector<double> xs(4096);
  for (auto& x : xs) x = rng.normal();
  for (auto _ : state) {
    double acc = 0.0;
    for (double x : xs) acc += round_value(x, fmt, &rng);
    benchmark::DoNotOptimize(acc);
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(xs.size()));
}
BENCHMARK(BM_RoundStochastic);

void BM_LuEmulated(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Format& fmt = format_arg(state.range(1));
  Rng rng(3);
  const DenseMatrix a = randsvd(n, n, 1e3, rng);
  for (auto _ : state) benchmark::DoNotOptimize(lu_emulated(a, fmt));
  state.SetLabel(format_name(fmt));
}
BENCHMARK(BM_LuEmulated)
    ->ArgsProduct({{50, 100, 200}, {0, 2, 3}})
    ->Unit(benchmark::kMillisecond);

void BM_QiluFactor(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(4);
  const DenseMatrix a = randsvd(n, n, 1e2, rng);
  for (auto _ : state) benchmark::DoNotOptimize(qilu_factor(a, 10));
}
BENCHMARK(BM_QiluFactor)->Arg(100)->Arg(200)->Arg(500)->Unit(benchmark::kMillisecond);

void BM_Spmv(benchmark::State& state) {
  const CsrMatrix a = laplacian2d(static_cast<std::size_t>(state.range(0)));
  const Format& fmt = format_arg(state.range(1));
  Rng rng(5);
  std::vector<double> x(a.rows());
  for (auto& v : x) v = rng.uniform(-1.0, 1.0);
  for (auto _ : state) benchmark::DoNotOptimize(spmv(a, x, fmt));
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(a.nnz()));
  state.SetLabel(format_name(fmt));
}
BENCHMARK(BM_Spmv)->ArgsProduct({{64, 256}, {0, 2, 3}});

void BM_SpmvClustered(benchmark::State& state) {
  const CsrMatrix a = laplacian2d(256);
  Rng rng(6);
  const ClusteredCsr m = compress_clustered(a, 8, 1e-3, rng);
  std::vector<double> x(a.rows(), 1.0);
  for (auto _ : state) benchmark::DoNotOptimize(spmv_clustered(m, x));
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(a.nnz()));
}
BENCHMARK(BM_SpmvClustered);

}  // namespace

BENCHMARK_MAIN();
