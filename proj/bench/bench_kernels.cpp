// Copyright 2026 The Moral IPD Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Parallel kernels against their serial references.

#include <benchmark/benchmark.h>

#include <filesystem>

#include "moral/evaluator.hpp"
#include "moral/experiment_io.hpp"

namespace {

using namespace moral;

Policy BenchPolicy() {
  RunConfig cfg;
  cfg.episodes = 200;
  cfg.seed = 3;
  return run_training(cfg).final_policy;
}

EvalProtocol BenchProtocol() {
  EvalProtocol p;
  p.episodes = 400;
  return p;
}

void BM_EvaluateParallel(benchmark::State& state) {
  const Policy policy = BenchPolicy();
  const TabularAgent agent(policy);
  const EvalProtocol prot = BenchProtocol();
  for (auto _ : state) benchmark::DoNotOptimize(evaluate(agent, prot));
}
BENCHMARK(BM_EvaluateParallel)->Unit(benchmark::kMillisecond);

void BM_EvaluateSerial(benchmark::State& state) {
  const Policy policy = BenchPolicy();
  const TabularAgent agent(policy);
  const EvalProtocol prot = BenchProtocol();
  for (auto _ : state) benchmark::DoNotOptimize(evaluate_serial(agent, prot));
}
BENCHMARK(BM_EvaluateSerial)->Unit(benchmark::kMillisecond);

SweepSpec BenchSweep(const std::string& name, int workers) {
  SweepSpec spec = ParseSweepSpec(
      "episodes = 100\nsweep.reward = game, deontological, utilitarian, game_deontological\n");
  spec.output_dir = (std::filesystem::temp_directory_path() / name).string();
  spec.workers = workers;
  return spec;
}

void BM_SweepParallel(benchmark::State& state) {
  const SweepSpec spec = BenchSweep("moral_bench_sweep_par", static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(run_sweep(spec));
  std::filesystem::remove_all(spec.output_dir);
}
BENCHMARK(BM_SweepParallel)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond);

void BM_SweepSerial(benchmark::State& state) {
  const SweepSpec spec = BenchSweep("moral_bench_sweep_ser", 1);
  for (auto _ : state) benchmark::DoNotOptimize(run_sweep_serial(spec));
  std::filesystem::remove_all(spec.output_dir);
}
BENCHMARK(BM_SweepSerial)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
