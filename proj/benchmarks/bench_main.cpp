#include <benchmark/benchmark.h>

#include <torch/torch.h>

#include "dzsr/adastn.hpp"
#include "dzsr/config.hpp"
#include "dzsr/ref_matching.hpp"
#include "dzsr/runtime.hpp"
#include "dzsr/zooming.hpp"

namespace {

using namespace dzsr;

void BM_DeformableSample(benchmark::State& state) {
  const auto side = state.range(0);
  torch::manual_seed(0);
  const auto x = torch::randn({1, 24, side, side});
  const DeformableKernel k{torch::randn({24, 24, 9}), torch::randn({24})};
  const auto P = 1.5 * torch::randn({1, side, side, 2, 9});
  torch::NoGradGuard ng;
  for (auto _ : state) benchmark::DoNotOptimize(deformable_sample(x, k, P));
  state.SetItemsProcessed(state.iterations() * side * side);
}
BENCHMARK(BM_DeformableSample)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_DeformableSampleBackward(benchmark::State& state) {
  const auto side = state.range(0);
  torch::manual_seed(0);
  const auto x = torch::randn({1, 24, side, side}, torch::requires_grad());
  const DeformableKernel k{torch::randn({24, 24, 9}, torch::requires_grad()), torch::randn({24})};
  const auto P = (1.5 * torch::randn({1, side, side, 2, 9})).requires_grad_();
  for (auto _ : state) deformable_sample(x, k, P).sum().backward();
}
BENCHMARK(BM_DeformableSampleBackward)->Arg(32)->Unit(benchmark::kMillisecond);

void BM_PatchMatch(benchmark::State& state) {
  const auto side = state.range(0);
  torch::manual_seed(0);
  const auto q = torch::randn({1, 16, side, side});
  const auto r = torch::randn({1, 16, side, side});
  MatchConfig cfg;
  cfg.feature_channels = 16;
  for (auto _ : state) benchmark::DoNotOptimize(patch_correlation_match(q, r, cfg).index_map);
}
BENCHMARK(BM_PatchMatch)->Arg(16)->Arg(32)->Unit(benchmark::kMillisecond);

void BM_ZoomingInference(benchmark::State& state) {
  const auto side = state.range(0);
  TrainConfig cfg;
  ZoomingNet net(cfg);
  net->eval();
  torch::manual_seed(0);
  const auto lr = torch::rand({1, 3, side, side});
  const auto ref = torch::rand({1, 3, side, side});
  GraphOptions opts;
  opts.clamp = true;
  torch::NoGradGuard ng;
  for (auto _ : state) benchmark::DoNotOptimize(net->forward(lr, ref, lr, lr, opts));
}
BENCHMARK(BM_ZoomingInference)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_ZoomingTrainingStep(benchmark::State& state) {
  TrainConfig cfg;
  ZoomingNet net(cfg);
  torch::manual_seed(0);
  const auto lr = torch::rand({cfg.batch, 3, cfg.lr_patch, cfg.lr_patch});
  GraphOptions opts;
  opts.training = true;
  for (auto _ : state) {
    opts.seed += 1;
    net->forward(lr, lr, lr, lr, opts).mean().backward();
  }
}
BENCHMARK(BM_ZoomingTrainingStep)->Unit(benchmark::kMillisecond);

}  // namespace

int main(int argc, char** argv) {
  dzsr::configure_threads();
  benchmark::Initialize(&argc, argv);
  if (benchmark::ReportUnrecognizedArguments(argc, argv)) return 1;
  benchmark::RunSpecifiedBenchmarks();
  benchmark::Shutdown();
  return 0;
}
