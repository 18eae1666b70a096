// Parallel kernels against their serial reference versions.

#include <benchmark/benchmark.h>

#include <vector>

#include "setfeat/kernels.hpp"
#include "setfeat/rng.hpp"

using namespace setfeat;
using kernels::Trans;

namespace {

std::vector<float> noise(std::size_t n, std::uint64_t stream) {
  Rng rng(11, stream);
  std::vector<float> v(n);
  for (auto& x : v) x = static_cast<float>(rng.normal());
  return v;
}

template <bool Reference>
void BM_gemm(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = noise(n * n, 1), b = noise(n * n, 2);
  std::vector<float> c(n * n);
  for (auto _ : state) {
    if constexpr (Reference)
      kernels::reference::gemm(Trans::no, Trans::no, n, n, n, 1.0f, a.data(), n, b.data(), n, 0.0f, c.data(), n);
    else
      kernels::gemm(Trans::no, Trans::no, n, n, n, 1.0f, a.data(), n, b.data(), n, 0.0f, c.data(), n);
    benchmark::DoNotOptimize(c.data());
  }
  state.counters["GFLOPS"] =
      benchmark::Counter(2.0 * n * n * n * state.iterations(), benchmark::Counter::kIsRate, benchmark::Counter::kIs1000);
}

// Batch of 64 images, 64 -> 64 channels, 3x3 kernel.
template <bool Reference>
void BM_conv3x3(benchmark::State& state) {
  const auto hw = static_cast<std::size_t>(state.range(0));
  const std::size_t batch = 64, ch = 64;
  const auto x = noise(batch * ch * hw * hw, 3), w = noise(ch * ch * 9, 4);
  std::vector<float> y(batch * ch * hw * hw);
  for (auto _ : state) {
    if constexpr (Reference)
      kernels::reference::conv2d_forward(x.data(), batch, ch, hw, hw, w.data(), ch, 3, static_cast<const float*>(nullptr), y.data());
    else
      kernels::conv2d_forward(x.data(), batch, ch, hw, hw, w.data(), ch, 3, static_cast<const float*>(nullptr), y.data());
    benchmark::DoNotOptimize(y.data());
  }
  state.counters["GFLOPS"] = benchmark::Counter(2.0 * batch * ch * ch * 9 * hw * hw * state.iterations(),
                                                benchmark::Counter::kIsRate, benchmark::Counter::kIs1000);
}

}  // namespace

BENCHMARK(BM_gemm<false>)->Name("gemm/parallel")->Arg(64)->Arg(256)->Arg(512);
BENCHMARK(BM_gemm<true>)->Name("gemm/reference")->Arg(64)->Arg(256)->Arg(512);
BENCHMARK(BM_conv3x3<false>)->Name("conv3x3/parallel")->Arg(8)->Arg(16);
BENCHMARK(BM_conv3x3<true>)->Name("conv3x3/reference")->Arg(8)->Arg(16);

BENCHMARK_MAIN();
