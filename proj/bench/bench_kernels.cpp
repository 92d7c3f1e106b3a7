// Serial reference vs OpenMP kernels on layer shapes of the desk profile.
// Thread count follows DASC_THREADS (default: OpenMP's choice).

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "dasc/kernels.hpp"

namespace k = dasc::kernels;

namespace {

std::vector<double> random_values(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> v(n);
  for (double& x : v) x = u(rng);
  return v;
}

struct ConvCase {
  k::Conv2dGeometry g;
  std::vector<double> x, w, y;

  explicit ConvCase(const benchmark::State& state) {
    const auto batch = static_cast<std::size_t>(state.range(0));
    const auto cin = static_cast<std::size_t>(state.range(1));
    const auto cout = static_cast<std::size_t>(state.range(2));
    g = k::conv2d_geometry({batch, 32, 16, cin}, {3, 3, cin, cout}, 1, 1, k::Padding::same);
    x = random_values(batch * 32 * 16 * cin, 1);
    w = random_values(9 * cin * cout, 2);
    y.assign(batch * g.out_h * g.out_w * cout, 0.0);
  }
};

template <bool Parallel>
void BM_Conv2dForward(benchmark::State& state) {
  ConvCase c(state);
  for (auto _ : state) {
    if constexpr (Parallel)
      k::omp::conv2d_forward(c.g, c.x, c.w, c.y);
    else
      k::serial::conv2d_forward(c.g, c.x, c.w, c.y);
    benchmark::DoNotOptimize(c.y.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(c.y.size()));
}

template <bool Parallel>
void BM_Conv2dBackwardKernel(benchmark::State& state) {
  ConvCase c(state);
  std::vector<double> dw(c.w.size());
  for (auto _ : state) {
    std::fill(dw.begin(), dw.end(), 0.0);
    if constexpr (Parallel)
      k::omp::conv2d_backward_kernel(c.g, c.x, c.y, dw);
    else
      k::serial::conv2d_backward_kernel(c.g, c.x, c.y, dw);
    benchmark::DoNotOptimize(dw.data());
  }
}

template <bool Parallel>
void BM_DenseForward(benchmark::State& state) {
  const auto rows = static_cast<std::size_t>(state.range(0));
  const k::DenseGeometry g{rows, 1024, 64};
  const auto x = random_values(rows * g.in, 3);
  const auto w = random_values(g.in * g.out, 4);
  const auto b = random_values(g.out, 5);
  std::vector<double> y(rows * g.out);
  for (auto _ : state) {
    if constexpr (Parallel)
      k::omp::dense_forward(g, x, w, b, y);
    else
      k::serial::dense_forward(g, x, w, b, y);
    benchmark::DoNotOptimize(y.data());
  }
}

void conv_args(benchmark::internal::Benchmark* b) {
  b->Args({32, 1, 8})->Args({32, 8, 16})->Args({32, 32, 64})->Unit(benchmark::kMicrosecond);
}

}  // namespace

BENCHMARK(BM_Conv2dForward<false>)->Name("conv2d_forward/serial")->Apply(conv_args);
BENCHMARK(BM_Conv2dForward<true>)->Name("conv2d_forward/omp")->Apply(conv_args);
BENCHMARK(BM_Conv2dBackwardKernel<false>)->Name("conv2d_backward_kernel/serial")->Apply(conv_args);
BENCHMARK(BM_Conv2dBackwardKernel<true>)->Name("conv2d_backward_kernel/omp")->Apply(conv_args);
BENCHMARK(BM_DenseForward<false>)->Name("dense_forward/serial")->Arg(32)->Arg(256);
BENCHMARK(BM_DenseForward<true>)->Name("dense_forward/omp")->Arg(32)->Arg(256);

int main(int argc, char** argv) {
  k::configure_threads_from_env();
  benchmark::Initialize(&argc, argv);
  if (benchmark::ReportUnrecognizedArguments(argc, argv)) return 1;
  benchmark::RunSpecifiedBenchmarks();
  benchmark::Shutdown();
  return 0;
}
