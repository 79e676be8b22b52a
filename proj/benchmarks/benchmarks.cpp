#include <cstdint>
#include <vector>

#include <benchmark/benchmark.h>

#include "hbopt/gamma.hpp"
#include "hbopt/niab.hpp"
#include "hbopt/rng.hpp"
#include "hbopt/search_space.hpp"
#include "hbopt/sha.hpp"
#include "hbopt/theory.hpp"

namespace {

const char* kLenetSpace = R"({
  "params": [
    {"name": "learning_rate", "kind": "continuous", "scale": "log", "min": 1e-3, "max": 1e-1},
    {"name": "batch_size", "kind": "integer", "scale": "log", "min": 10, "max": 1000},
    {"name": "layer2_kernels", "kind": "integer", "scale": "linear", "min": 10, "max": 60},
    {"name": "layer1_kernels", "kind": "integer", "scale": "linear", "min": 5, "max_ref": "layer2_kernels"}
  ]
})";

void BM_rung_schedule(benchmark::State& state) {
  for (auto _ : state) {
    benchmark::DoNotOptimize(hbopt::rung_schedule(81, 1, 4, 3, 81));
  }
}
BENCHMARK(BM_rung_schedule);

void BM_space_sample(benchmark::State& state) {
  hbopt::space::SearchSpace space = hbopt::space::parse_space(kLenetSpace);
  hbopt::SplitMix64 rng(1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(hbopt::space::sample(space, rng, 1));
  }
}
BENCHMARK(BM_space_sample);

void BM_envelope_arm_loss(benchmark::State& state) {
  hbopt::sim::TheoryInstance inst;
  inst.family = hbopt::sim::Family::beta_continuous;
  inst.alpha = 2;
  inst.beta = 2;
  hbopt::ArmPtr arm = hbopt::sim::make_envelope_arm(inst, 0.25, 0);
  std::int64_t level = 1;
  for (auto _ : state) {
    benchmark::DoNotOptimize(arm->synthetic->loss(level));
    level = level % 4096 + 1;
  }
}
BENCHMARK(BM_envelope_arm_loss);

void BM_gamma_inv(benchmark::State& state) {
  for (auto _ : state) {
    benchmark::DoNotOptimize(hbopt::theory::gamma_inv(2.5, 1e-3));
  }
}
BENCHMARK(BM_gamma_inv);

void BM_counter_hash(benchmark::State& state) {
  std::uint64_t idx = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(hbopt::counter_uniform01(42, 7, idx++));
  }
}
BENCHMARK(BM_counter_hash);

void BM_sha_infinite(benchmark::State& state) {
  hbopt::sim::TheoryInstance inst;
  inst.family = hbopt::sim::Family::beta_continuous;
  inst.alpha = 1;
  inst.beta = 1;
  hbopt::SplitMix64 rng(3);
  std::vector<hbopt::ArmPtr> arms = hbopt::sim::make_arms(inst, rng, 64);
  hbopt::sim::SimOracle oracle;
  for (auto _ : state) {
    std::vector<hbopt::ArmPtr> clones;
    clones.reserve(arms.size());
    for (const auto& arm : arms) clones.push_back(hbopt::sim::clone_arm(arm));
    hbopt::BudgetLedger ledger;
    hbopt::RunContext ctx;
    ctx.oracle = &oracle;
    ctx.ledger = &ledger;
    benchmark::DoNotOptimize(hbopt::sha_infinite(ctx, std::move(clones), 16384));
  }
}
BENCHMARK(BM_sha_infinite);

}  // namespace

BENCHMARK_MAIN();
