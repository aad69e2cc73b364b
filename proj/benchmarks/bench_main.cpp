#include <benchmark/benchmark.h>

#include <random>

#include "tsnca/losses.hpp"
#include "tsnca/metrics.hpp"
#include "tsnca/nn.hpp"
#include "tsnca/ops.hpp"

namespace {

using namespace tsnca;

Tensor<float> noise(Shape shape, std::uint32_t seed, bool grad = false) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  std::vector<float> data(n);
  for (auto& v : data) v = u(rng);
  return Tensor<float>::from_data(std::move(shape), std::move(data), grad);
}

RgbImage noise_image(std::size_t size, std::uint32_t seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  RgbImage img(size, size);
  for (auto& p : img.planes)
    for (auto& v : p.values) v = u(rng);
  return img;
}

void BM_Conv2d(benchmark::State& state) {
  const auto size = static_cast<std::size_t>(state.range(0));
  const auto x = noise({1, 16, size, size}, 1);
  const auto w = noise({16, 16, 3, 3}, 2);
  const auto b = noise({16}, 3);
  for (auto _ : state) benchmark::DoNotOptimize(ops::conv2d(x, w, b, 1, 1));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(size * size));
}
BENCHMARK(BM_Conv2d)->Arg(32)->Arg(64)->Arg(128);

void BM_UNetForward(benchmark::State& state) {
  const auto size = static_cast<std::size_t>(state.range(0));
  const auto config = nn::UNetConfig::restorer(8, 3, true);
  const auto params = nn::init_params<float>(config, 1, false);
  const auto x = noise({1, 3, size, size}, 4);
  for (auto _ : state) benchmark::DoNotOptimize(nn::unet_forward(x, params, config));
}
BENCHMARK(BM_UNetForward)->Arg(64)->Arg(128);

void BM_UNetForwardBackward(benchmark::State& state) {
  const auto size = static_cast<std::size_t>(state.range(0));
  const auto config = nn::UNetConfig::restorer(8, 3, true);
  const auto params = nn::init_params<float>(config, 1, true);
  const auto x = noise({2, 3, size, size}, 5);
  for (auto _ : state) {
    for (const auto& [name, t] : params.entries()) {
      auto copy = t;
      copy.zero_grad();
    }
    ops::mean(nn::unet_forward(x, params, config)).backward();
  }
}
BENCHMARK(BM_UNetForwardBackward)->Arg(32)->Arg(64);

void BM_SsimLoss(benchmark::State& state) {
  const auto size = static_cast<std::size_t>(state.range(0));
  const auto a = noise({1, 3, size, size}, 6, true);
  const auto b = noise({1, 3, size, size}, 7);
  for (auto _ : state) losses::ssim(a, b).backward();
}
BENCHMARK(BM_SsimLoss)->Arg(64)->Arg(128);

void BM_DeltaE2000(benchmark::State& state) {
  const auto size = static_cast<std::size_t>(state.range(0));
  const auto a = noise_image(size, 8), b = noise_image(size, 9);
  for (auto _ : state) benchmark::DoNotOptimize(metrics::delta_e2000(a, b));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(size * size));
}
BENCHMARK(BM_DeltaE2000)->Arg(128)->Arg(256);

}  // namespace
BENCHMARK_MAIN();
