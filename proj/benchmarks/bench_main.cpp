// Copyright 2026 The onegan Authors
// SPDX-License-Identifier: Apache-2.0
//
// Microbenchmarks for the hot paths: blocks, generation and autoencoding at
// desk scale, mask regularization, metrics and a tiny training step.

#include <benchmark/benchmark.h>
#include <torch/torch.h>

#include "onegan/blocks.hpp"
#include "onegan/eval.hpp"
#include "onegan/losses.hpp"
#include "onegan/paths.hpp"
#include "onegan/priors.hpp"
#include "onegan/training.hpp"

namespace {

using namespace onegan;

HyperParams desk_hp() {
  HyperParams hp;
  hp.n_child = 12;
  hp.n_parent = 3;
  hp.image_size = 64;
  hp.channel_scale = 0.5;
  return hp;
}

void BM_UpBlock(benchmark::State& state) {
  torch::NoGradGuard guard;
  const int64_t c = state.range(0);
  UpBlock blk(c, c, 32);
  auto x = torch::randn({8, c, 16, 16});
  for (auto _ : state) benchmark::DoNotOptimize(blk->forward(x));
}
BENCHMARK(BM_UpBlock)->Arg(64)->Arg(256)->Unit(benchmark::kMillisecond);

void BM_GenerationPath(benchmark::State& state) {
  torch::NoGradGuard guard;
  auto hp = desk_hp();
  GeneratorSet nets(hp);
  nets.train(false);
  auto gen = make_generator(0);
  auto priors = sample_priors(hp, state.range(0), gen);
  for (auto _ : state) benchmark::DoNotOptimize(generation_path(priors, nets).quad.image);
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_GenerationPath)->Arg(1)->Arg(20)->Unit(benchmark::kMillisecond);

void BM_AutoencodePath(benchmark::State& state) {
  torch::NoGradGuard guard;
  auto hp = desk_hp();
  GeneratorSet nets(hp);
  nets.train(false);
  auto gen = make_generator(0);
  const int64_t n = state.range(0);
  auto x = torch::rand({n, 3, 64, 64}) * 2 - 1;
  auto mix = MixupCoeffs::constant(n, 1.0, 1.0);
  for (auto _ : state) benchmark::DoNotOptimize(autoencode_path(x, nets, mix, gen).quad.mask);
  state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_AutoencodePath)->Arg(20)->Unit(benchmark::kMillisecond);

void BM_MaskRegularization(benchmark::State& state) {
  auto m = torch::rand({20, 1, 128, 128});
  for (auto _ : state) benchmark::DoNotOptimize(mask_regularization(m).total);
}
BENCHMARK(BM_MaskRegularization)->Unit(benchmark::kMicrosecond);

void BM_Nmi(benchmark::State& state) {
  auto gen = make_generator(1);
  const int64_t n = state.range(0);
  auto a = torch::randint(200, {n}, gen, torch::kLong);
  auto b = torch::randint(200, {n}, gen, torch::kLong);
  std::vector<int64_t> va(a.data_ptr<int64_t>(), a.data_ptr<int64_t>() + n);
  std::vector<int64_t> vb(b.data_ptr<int64_t>(), b.data_ptr<int64_t>() + n);
  for (auto _ : state) benchmark::DoNotOptimize(nmi(va, vb));
}
BENCHMARK(BM_Nmi)->Arg(1000)->Arg(10000)->Unit(benchmark::kMicrosecond);

void BM_Ami(benchmark::State& state) {
  auto gen = make_generator(2);
  const int64_t n = state.range(0);
  auto a = torch::randint(12, {n}, gen, torch::kLong);
  auto b = torch::randint(12, {n}, gen, torch::kLong);
  std::vector<int64_t> va(a.data_ptr<int64_t>(), a.data_ptr<int64_t>() + n);
  std::vector<int64_t> vb(b.data_ptr<int64_t>(), b.data_ptr<int64_t>() + n);
  for (auto _ : state) benchmark::DoNotOptimize(ami(va, vb));
}
BENCHMARK(BM_Ami)->Arg(200)->Arg(2000)->Unit(benchmark::kMillisecond);

void BM_Kmeans(benchmark::State& state) {
  torch::manual_seed(3);
  auto f = torch::randn({state.range(0), 48});
  for (auto _ : state) benchmark::DoNotOptimize(kmeans(f, 12, 0));
}
BENCHMARK(BM_Kmeans)->Arg(200)->Arg(2000)->Unit(benchmark::kMillisecond);

void BM_TrainingStepTiny(benchmark::State& state) {
  Config c;
  c.hp = desk_hp();
  c.hp.channel_scale = 1.0 / 16;
  c.hp.batch_size = 4;
  c.hp.phase1_iters = state.range(0) ? 0 : 1000;
  c.hp.real_recon_delay = 0;
  c.hp.encoder_warmup_iters = 0;
  torch::manual_seed(4);
  auto objects = torch::randint(256, {16, 3, 64, 64}, torch::kUInt8);
  auto backgrounds = torch::randint(256, {16, 3, 64, 64}, torch::kUInt8);
  Trainer trainer(c, objects, backgrounds);
  for (auto _ : state) benchmark::DoNotOptimize(trainer.train_iteration());
}
BENCHMARK(BM_TrainingStepTiny)->ArgName("phase2")->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace

int main(int argc, char** argv) {
  torch::set_num_threads(1);
  benchmark::Initialize(&argc, argv);
  if (benchmark::ReportUnrecognizedArguments(argc, argv)) return 1;
  benchmark::RunSpecifiedBenchmarks();
  benchmark::Shutdown();
  return 0;
}
