#include <benchmark/benchmark.h>

#include "voxelpaint/loss.hpp"
#include "voxelpaint/ops.hpp"
#include "voxelpaint/random.hpp"
#include "voxelpaint/unet.hpp"

using namespace voxelpaint;

namespace {

Tensor<float> random_tensor(Shape shape, Rng& rng, bool requires_grad = false) {
  std::vector<float> v(shape_numel(shape));
  for (auto& x : v) x = static_cast<float>(2.0 * uniform01(rng) - 1.0);
  return Tensor<float>(shape, std::move(v), requires_grad);
}

void BM_Conv3dForward(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto c = static_cast<std::size_t>(state.range(1));
  Rng rng(1);
  const auto x = random_tensor({1, c, n, n, n}, rng);
  const auto w = random_tensor({c, c, 3, 3, 3}, rng);
  const auto b = random_tensor({c}, rng);
  NoGradGuard no_grad;
  for (auto _ : state) benchmark::DoNotOptimize(conv3d(x, w, b, 1));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n * n * c * c * 27));
}
BENCHMARK(BM_Conv3dForward)->Args({16, 8})->Args({32, 16})->Args({32, 32})->Unit(benchmark::kMillisecond);

void BM_Conv3dBackward(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto c = static_cast<std::size_t>(state.range(1));
  Rng rng(2);
  const auto x = random_tensor({1, c, n, n, n}, rng, true);
  const auto w = random_tensor({c, c, 3, 3, 3}, rng, true);
  const auto b = random_tensor({c}, rng, true);
  for (auto _ : state) {
    sum(conv3d(x, w, b, 1)).backward();
  }
}
BENCHMARK(BM_Conv3dBackward)->Args({16, 8})->Args({32, 16})->Unit(benchmark::kMillisecond);

void BM_Ssim3d(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(3);
  const auto a = random_tensor({1, 1, n, n, n}, rng);
  const auto b = random_tensor({1, 1, n, n, n}, rng);
  const SsimParams params{7, 1.5, 2.0};
  NoGradGuard no_grad;
  for (auto _ : state) benchmark::DoNotOptimize(ssim3d(a, b, params));
}
BENCHMARK(BM_Ssim3d)->Arg(16)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_UNetForward(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  UNetConfig config;
  config.base_channels = static_cast<int>(state.range(1));
  Rng rng(4);
  const auto model = UNetModel<float>::build(config, rng);
  const auto voided = random_tensor({1, 1, n, n, n}, rng);
  const auto mask = Tensor<float>::full({1, 1, n, n, n}, 0.0f);
  NoGradGuard no_grad;
  for (auto _ : state) benchmark::DoNotOptimize(model.forward(voided, mask, false, rng));
}
BENCHMARK(BM_UNetForward)->Args({16, 8})->Args({32, 8})->Args({32, 32})->Unit(benchmark::kMillisecond);

void BM_UNetTrainStep(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  UNetConfig config;
  config.base_channels = 8;
  Rng rng(5);
  auto model = UNetModel<float>::build(config, rng);
  const auto voided = random_tensor({1, 1, n, n, n}, rng);
  const auto mask = Tensor<float>::full({1, 1, n, n, n}, 0.0f);
  for (auto _ : state) {
    model.zero_grad();
    sum(model.forward(voided, mask, true, rng)).backward();
  }
}
BENCHMARK(BM_UNetTrainStep)->Arg(16)->Arg(32)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
