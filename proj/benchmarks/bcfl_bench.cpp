// Copyright 2026 The BCFL Simulator Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// =============================================================================

#include <cstdint>
#include <memory>
#include <vector>

#include <benchmark/benchmark.h>

#include "bcfl/chain.hpp"
#include "bcfl/compression.hpp"
#include "bcfl/convergence.hpp"
#include "bcfl/harness.hpp"
#include "bcfl/optimizer.hpp"
#include "bcfl/protocol.hpp"
#include "bcfl/random.hpp"
#include "bcfl/timecost.hpp"

namespace {

using namespace bcfl;

constexpr std::size_t kReferenceD = 122570;

std::vector<double> normal_vector(std::size_t d, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> g(d);
  for (double& x : g) x = rng.normal();
  return g;
}

timecost::NetworkEnv reference_env() {
  return timecost::NetworkEnv::homogeneous(50, 50, timecost::LinkModel{}.rate_bytes_per_s(),
                                           kReferenceD, 4.0, 0.2, 0.0, 0.1);
}

optimizer::Objective reference_objective() {
  convergence::ConvergenceParams p;
  p.L = 0.45;
  p.G2 = 0.15;
  p.Gamma2 = 0.00044;
  p.gap = 2.30;
  p.N = 50;
  return optimizer::Objective::from_model(convergence::bound_coefficients(p),
                                          timecost::h_coefficients(reference_env()), kReferenceD, 500.0);
}

void BM_TopK(benchmark::State& state) {
  const auto d = static_cast<std::size_t>(state.range(0));
  const auto g = normal_vector(d, 1);
  const std::size_t k = std::max<std::size_t>(1, d / 100);
  for (auto _ : state) benchmark::DoNotOptimize(compression::top_k(g, k));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(d));
}
BENCHMARK(BM_TopK)->Arg(9610)->Arg(kReferenceD)->Arg(1 << 20);

void BM_WireEncode(benchmark::State& state) {
  const auto g = normal_vector(kReferenceD, 2);
  auto u = compression::top_k(g, kReferenceD / 100);
  compression::round_to_wire(u, 4);
  for (auto _ : state) benchmark::DoNotOptimize(compression::encode(u, 4));
}
BENCHMARK(BM_WireEncode);

void BM_RoundTimeDirect(benchmark::State& state) {
  const auto env = reference_env();
  double k = 1000;
  for (auto _ : state) {
    benchmark::DoNotOptimize(timecost::h(k, 0.4, env));
    k = k < 5000 ? k + 1 : 1000;
  }
}
BENCHMARK(BM_RoundTimeDirect);

void BM_RoundTimeCoefficients(benchmark::State& state) {
  const auto coef = timecost::h_coefficients(reference_env());
  double k = 1000;
  for (auto _ : state) {
    benchmark::DoNotOptimize(coef.h(k, 0.4));
    k = k < 5000 ? k + 1 : 1000;
  }
}
BENCHMARK(BM_RoundTimeCoefficients);

void BM_AcsSolve(benchmark::State& state) {
  const auto obj = reference_objective();
  for (auto _ : state) benchmark::DoNotOptimize(optimizer::acs_solve(obj, 1226, 0.4));
}
BENCHMARK(BM_AcsSolve)->Unit(benchmark::kMicrosecond);

void BM_Sha256(benchmark::State& state) {
  const std::vector<std::uint8_t> bytes(static_cast<std::size_t>(state.range(0)), 0x5a);
  for (auto _ : state) benchmark::DoNotOptimize(chain::sha256(bytes));
  state.SetBytesProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Sha256)->Arg(64)->Arg(1 << 20);

void BM_MiningRace(benchmark::State& state) {
  const std::vector<double> speeds(50, 1.0);
  Rng rng(3);
  for (auto _ : state) benchmark::DoNotOptimize(chain::run_mining_race(speeds, 0.4, 0.01, rng));
}
BENCHMARK(BM_MiningRace);

void BM_SimulationRound(benchmark::State& state) {
  harness::ExperimentConfig cfg;
  cfg.data.per_client = static_cast<std::size_t>(state.range(0));
  const auto work = harness::build_workload(cfg);
  const std::size_t k = work->dim() / 50;
  auto sys = work->system(cfg, k, 0.5, 1e18);
  protocol::Simulation sim(sys, work->env, work->objectives, work->w0);
  for (auto _ : state) benchmark::DoNotOptimize(sim.run_round());
}
BENCHMARK(BM_SimulationRound)->Arg(40)->Arg(1000)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
