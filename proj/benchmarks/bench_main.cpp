// Micro-benchmarks for the hot paths of one hr-step.

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "hrmesh/baselines.hpp"
#include "hrmesh/domain.hpp"
#include "hrmesh/env.hpp"
#include "hrmesh/features.hpp"
#include "hrmesh/fem.hpp"
#include "hrmesh/mesh.hpp"
#include "hrmesh/policy.hpp"

using namespace hrmesh;

namespace {

// Unit square refined uniformly to roughly 30 * 4^rounds elements.
Mesh square_mesh(int rounds) { return uniform_refine(generate_domain(DomainSpec::unit_square(), 30, 1), rounds); }

std::vector<std::uint8_t> flags(std::size_t n, double p, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution coin(p);
  std::vector<std::uint8_t> f(n);
  for (auto& x : f) x = coin(rng);
  return f;
}

void BM_RgbRefine(benchmark::State& state) {
  const Mesh m = square_mesh(static_cast<int>(state.range(0)));
  const auto f = flags(m.num_elements(), 0.25, 7);
  for (auto _ : state) benchmark::DoNotOptimize(rgb_refine(m, f));
  state.counters["elements"] = static_cast<double>(m.num_elements());
}
BENCHMARK(BM_RgbRefine)->DenseRange(1, 4)->Unit(benchmark::kMicrosecond);

void BM_SolvePoisson(benchmark::State& state) {
  const auto inst = fem::sample_poisson_instance(3, 30);
  const Mesh m = uniform_refine(env::initial_mesh(inst), static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(fem::solve_poisson(m, inst));
  state.counters["elements"] = static_cast<double>(m.num_elements());
}
BENCHMARK(BM_SolvePoisson)->DenseRange(0, 4)->Unit(benchmark::kMicrosecond);

void BM_Indicators(benchmark::State& state) {
  const auto data = env::prepare_instance(fem::sample_poisson_instance(3, 30), static_cast<int>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(fem::compute_indicators(data->initial_mesh, data->initial_field, *data->ref));
  }
  state.counters["ref_elements"] = static_cast<double>(data->ref->mesh.num_elements());
}
BENCHMARK(BM_Indicators)->DenseRange(3, 5)->Unit(benchmark::kMicrosecond);

void BM_BuildState(benchmark::State& state) {
  const auto inst = fem::sample_poisson_instance(3, 30);
  const Mesh m = uniform_refine(env::initial_mesh(inst), static_cast<int>(state.range(0)));
  const fem::Field u = fem::solve(m, inst);
  for (auto _ : state) benchmark::DoNotOptimize(features::build_state(m, u, 1, 1e-3, inst));
  state.counters["elements"] = static_cast<double>(m.num_elements());
}
BENCHMARK(BM_BuildState)->DenseRange(0, 3)->Unit(benchmark::kMicrosecond);

void BM_PolicyInference(benchmark::State& state) {
  const auto inst = fem::sample_poisson_instance(3, 30);
  const Mesh m = uniform_refine(env::initial_mesh(inst), static_cast<int>(state.range(0)));
  const auto raw = features::build_state(m, fem::solve(m, inst), 1, 1e-3, inst);
  const policy::PolicyParams p = policy::init_params(policy::PolicyConfig{});
  for (auto _ : state) benchmark::DoNotOptimize(policy::inference_act(p, raw, m));
  state.counters["elements"] = static_cast<double>(m.num_elements());
}
BENCHMARK(BM_PolicyInference)->DenseRange(0, 3)->Unit(benchmark::kMillisecond);

void BM_PolicyBackward(benchmark::State& state) {
  const auto inst = fem::sample_poisson_instance(3, 30);
  const Mesh m = uniform_refine(env::initial_mesh(inst), static_cast<int>(state.range(0)));
  const auto raw = features::build_state(m, fem::solve(m, inst), 1, 1e-3, inst);
  const policy::PolicyParams p = policy::init_params(policy::PolicyConfig{});
  const auto s = policy::prepare_state(p, raw);
  for (auto _ : state) {
    const policy::PolicyOutput out = policy::forward(p, s, m);
    ad::sum(out.vertex_mean).backward();
  }
  state.counters["elements"] = static_cast<double>(m.num_elements());
}
BENCHMARK(BM_PolicyBackward)->DenseRange(0, 2)->Unit(benchmark::kMillisecond);

void BM_ZzEstimate(benchmark::State& state) {
  const auto inst = fem::sample_poisson_instance(3, 30);
  const Mesh m = uniform_refine(env::initial_mesh(inst), static_cast<int>(state.range(0)));
  const fem::Field u = fem::solve(m, inst);
  for (auto _ : state) benchmark::DoNotOptimize(baselines::zz_estimate(m, u));
  state.counters["elements"] = static_cast<double>(m.num_elements());
}
BENCHMARK(BM_ZzEstimate)->DenseRange(0, 4)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
