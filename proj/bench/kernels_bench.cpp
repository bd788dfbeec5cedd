// Parallel kernels against the serial reference, at backbone-like shapes.
#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "siamtrack/kernels.hpp"

using namespace siamtrack::kernels;

namespace {

std::vector<float> random_vec(std::size_t n, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<float> u(-1.0f, 1.0f);
  std::vector<float> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

// args: channels in, channels out, input side, stride
ConvGeometry conv_shape(const benchmark::State& state) {
  return ConvGeometry::same(static_cast<int>(state.range(0)), static_cast<int>(state.range(2)),
                            static_cast<int>(state.range(2)), static_cast<int>(state.range(1)), 3,
                            static_cast<int>(state.range(3)));
}

template <bool Parallel>
void BM_ConvForward(benchmark::State& state) {
  const ConvGeometry g = conv_shape(state);
  const auto in = random_vec(static_cast<std::size_t>(g.in_channels) * g.in_height * g.in_width, 1);
  const auto w = random_vec(static_cast<std::size_t>(g.out_channels) * g.patch_size(), 2);
  const auto b = random_vec(g.out_channels, 3);
  std::vector<float> out(static_cast<std::size_t>(g.out_channels) * g.out_pixels());
  for (auto _ : state) {
    if constexpr (Parallel) {
      conv2d_forward<float>(g, in, w, b, out);
    } else {
      reference::conv2d_forward<float>(g, in, w, b, out);
    }
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * 2LL * g.out_channels * g.out_pixels() * g.patch_size());
}

template <bool Parallel>
void BM_ConvBackward(benchmark::State& state) {
  const ConvGeometry g = conv_shape(state);
  const auto in = random_vec(static_cast<std::size_t>(g.in_channels) * g.in_height * g.in_width, 1);
  const auto w = random_vec(static_cast<std::size_t>(g.out_channels) * g.patch_size(), 2);
  const auto go = random_vec(static_cast<std::size_t>(g.out_channels) * g.out_pixels(), 3);
  std::vector<float> gi(in.size()), gw(w.size()), gb(g.out_channels);
  for (auto _ : state) {
    if constexpr (Parallel) {
      conv2d_backward<float>(g, in, w, go, gi, gw, gb);
    } else {
      reference::conv2d_backward<float>(g, in, w, go, gi, gw, gb);
    }
    benchmark::DoNotOptimize(gw.data());
  }
  state.SetItemsProcessed(state.iterations() * 4LL * g.out_channels * g.out_pixels() * g.patch_size());
}

// args: channels, kernel side, search side
XcorrGeometry xcorr_shape(const benchmark::State& state) {
  const int c = static_cast<int>(state.range(0)), k = static_cast<int>(state.range(1)),
            s = static_cast<int>(state.range(2));
  return {c, k, k, s, s};
}

template <bool Parallel>
void BM_XcorrForward(benchmark::State& state) {
  const XcorrGeometry g = xcorr_shape(state);
  const auto k = random_vec(static_cast<std::size_t>(g.channels) * g.kernel_height * g.kernel_width, 1);
  const auto s = random_vec(static_cast<std::size_t>(g.channels) * g.height * g.width, 2);
  std::vector<float> out(s.size());
  for (auto _ : state) {
    if constexpr (Parallel) {
      xcorr_forward<float>(g, k, s, out);
    } else {
      reference::xcorr_forward<float>(g, k, s, out);
    }
    benchmark::DoNotOptimize(out.data());
  }
}

template <bool Parallel>
void BM_XcorrBackward(benchmark::State& state) {
  const XcorrGeometry g = xcorr_shape(state);
  const auto k = random_vec(static_cast<std::size_t>(g.channels) * g.kernel_height * g.kernel_width, 1);
  const auto s = random_vec(static_cast<std::size_t>(g.channels) * g.height * g.width, 2);
  const auto go = random_vec(s.size(), 3);
  std::vector<float> gk(k.size()), gs(s.size());
  for (auto _ : state) {
    if constexpr (Parallel) {
      xcorr_backward<float>(g, k, s, go, gk, gs);
    } else {
      reference::xcorr_backward<float>(g, k, s, go, gk, gs);
    }
    benchmark::DoNotOptimize(gs.data());
  }
}

void conv_args(benchmark::internal::Benchmark* b) {
  b->Args({3, 16, 128, 2})->Args({16, 32, 64, 2})->Args({32, 32, 32, 1})->Unit(benchmark::kMicrosecond);
}

void xcorr_args(benchmark::internal::Benchmark* b) { b->Args({32, 16, 32})->Unit(benchmark::kMicrosecond); }

}  // namespace

BENCHMARK(BM_ConvForward<true>)->Name("conv_forward/parallel")->Apply(conv_args);
BENCHMARK(BM_ConvForward<false>)->Name("conv_forward/reference")->Apply(conv_args);
BENCHMARK(BM_ConvBackward<true>)->Name("conv_backward/parallel")->Apply(conv_args);
BENCHMARK(BM_ConvBackward<false>)->Name("conv_backward/reference")->Apply(conv_args);
BENCHMARK(BM_XcorrForward<true>)->Name("xcorr_forward/parallel")->Apply(xcorr_args);
BENCHMARK(BM_XcorrForward<false>)->Name("xcorr_forward/reference")->Apply(xcorr_args);
BENCHMARK(BM_XcorrBackward<true>)->Name("xcorr_backward/parallel")->Apply(xcorr_args);
BENCHMARK(BM_XcorrBackward<false>)->Name("xcorr_backward/reference")->Apply(xcorr_args);

BENCHMARK_MAIN();
