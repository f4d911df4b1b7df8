// Reference vs parallel kernels on generator-sized layers.
#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "singlegan/kernels.hpp"

namespace k = singlegan::kernels;

namespace {

std::vector<float> random_buffer(std::size_t n, unsigned seed) {
  std::mt19937 gen(seed);
  std::normal_distribution<float> dist(0.0f, 1.0f);
  std::vector<float> v(n);
  for (auto& x : v) x = dist(gen);
  return v;
}

// Args: channels, spatial size, kernel, stride.
k::ConvGeometry conv_geometry(const benchmark::State& state) {
  k::ConvGeometry g;
  g.in_channels = g.out_channels = static_cast<std::size_t>(state.range(0));
  g.in_height = g.in_width = static_cast<std::size_t>(state.range(1));
  g.kernel = static_cast<std::size_t>(state.range(2));
  g.stride = static_cast<std::size_t>(state.range(3));
  g.pad = g.kernel / 2;
  return g;
}

template <bool Parallel>
void BM_ConvForward(benchmark::State& state) {
  const auto g = conv_geometry(state);
  const auto x = random_buffer(g.in_channels * g.in_height * g.in_width, 1);
  const auto w = random_buffer(g.out_channels * g.in_channels * g.kernel * g.kernel, 2);
  const auto b = random_buffer(g.out_channels, 3);
  std::vector<float> y(g.out_channels * g.out_height() * g.out_width());
  for (auto _ : state) {
    if constexpr (Parallel) {
      k::parallel::conv2d_forward<float>(g, x.data(), w.data(), b.data(), y.data());
    } else {
      k::reference::conv2d_forward<float>(g, x.data(), w.data(), b.data(), y.data());
    }
    benchmark::DoNotOptimize(y.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<long>(y.size() * g.in_channels * g.kernel * g.kernel));
}

template <bool Parallel>
void BM_ConvBackward(benchmark::State& state) {
  const auto g = conv_geometry(state);
  const auto x = random_buffer(g.in_channels * g.in_height * g.in_width, 1);
  const auto w = random_buffer(g.out_channels * g.in_channels * g.kernel * g.kernel, 2);
  const auto dy = random_buffer(g.out_channels * g.out_height() * g.out_width(), 3);
  std::vector<float> dx(x.size()), dw(w.size()), db(g.out_channels);
  for (auto _ : state) {
    if constexpr (Parallel) {
      k::parallel::conv2d_backward<float>(g, x.data(), w.data(), dy.data(), dx.data(), dw.data(), db.data());
    } else {
      k::reference::conv2d_backward<float>(g, x.data(), w.data(), dy.data(), dx.data(), dw.data(), db.data());
    }
    benchmark::DoNotOptimize(dw.data());
  }
}

template <bool Parallel>
void BM_ConvTransposeForward(benchmark::State& state) {
  k::TransposedConvGeometry g;
  g.in_channels = static_cast<std::size_t>(state.range(0));
  g.out_channels = g.in_channels / 2;
  g.in_height = g.in_width = static_cast<std::size_t>(state.range(1));
  g.kernel = 3;
  g.stride = 2;
  g.pad = 1;
  g.output_pad = 1;
  const auto x = random_buffer(g.in_channels * g.in_height * g.in_width, 1);
  const auto w = random_buffer(g.in_channels * g.out_channels * 9, 2);
  const auto b = random_buffer(g.out_channels, 3);
  std::vector<float> y(g.out_channels * g.out_height() * g.out_width());
  for (auto _ : state) {
    if constexpr (Parallel) {
      k::parallel::conv_transpose2d_forward<float>(g, x.data(), w.data(), b.data(), y.data());
    } else {
      k::reference::conv_transpose2d_forward<float>(g, x.data(), w.data(), b.data(), y.data());
    }
    benchmark::DoNotOptimize(y.data());
  }
}

// Args: planes, plane size.
template <bool Parallel>
void BM_InstanceNorm(benchmark::State& state) {
  const auto planes = static_cast<std::size_t>(state.range(0));
  const auto size = static_cast<std::size_t>(state.range(1));
  const auto x = random_buffer(planes * size, 1);
  std::vector<float> x_hat(x.size()), inv_std(planes);
  for (auto _ : state) {
    if constexpr (Parallel) {
      k::parallel::instance_norm_forward<float>(planes, size, x.data(), 1e-5f, x_hat.data(), inv_std.data());
    } else {
      k::reference::instance_norm_forward<float>(planes, size, x.data(), 1e-5f, x_hat.data(), inv_std.data());
    }
    benchmark::DoNotOptimize(x_hat.data());
  }
  state.SetBytesProcessed(state.iterations() * static_cast<long>(x.size() * sizeof(float)));
}

void BM_Gemm(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = random_buffer(n * n, 1), b = random_buffer(n * n, 2);
  std::vector<float> c(n * n);
  for (auto _ : state) {
    k::parallel::gemm<float>(false, false, n, n, n, 1.0f, a.data(), b.data(), 0.0f, c.data());
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<long>(2 * n * n * n));
}

void conv_args(benchmark::internal::Benchmark* b) {
  b->Args({16, 32, 7, 1})->Args({32, 32, 3, 2})->Args({64, 8, 3, 1})->Args({64, 32, 3, 1});
}

}  // namespace

BENCHMARK(BM_ConvForward<false>)->Name("conv_forward/reference")->Apply(conv_args);
BENCHMARK(BM_ConvForward<true>)->Name("conv_forward/parallel")->Apply(conv_args);
BENCHMARK(BM_ConvBackward<false>)->Name("conv_backward/reference")->Apply(conv_args);
BENCHMARK(BM_ConvBackward<true>)->Name("conv_backward/parallel")->Apply(conv_args);
BENCHMARK(BM_ConvTransposeForward<false>)->Name("conv_transpose_forward/reference")->Args({64, 8})->Args({32, 16});
BENCHMARK(BM_ConvTransposeForward<true>)->Name("conv_transpose_forward/parallel")->Args({64, 8})->Args({32, 16});
BENCHMARK(BM_InstanceNorm<false>)->Name("instance_norm/reference")->Args({64, 64})->Args({16, 1024});
BENCHMARK(BM_InstanceNorm<true>)->Name("instance_norm/parallel")->Args({64, 64})->Args({16, 1024});
BENCHMARK(BM_Gemm)->Name("gemm/parallel")->Arg(64)->Arg(256);

BENCHMARK_MAIN();
