#include <benchmark/benchmark.h>

#include "flip/harness.hpp"

namespace {

void BM_SimulateRequest(benchmark::State& state) {
  auto topo = std::make_shared<const flip::Topology>(flip::build_experiment_topology());
  auto requests = flip::requests_r1_r9();
  const auto& r = requests[std::size_t(state.range(0))];
  auto p = flip::build_plan(r.request, *topo, {});
  flip::Workload w;
  w.epochs = 20;
  auto trace = flip::generate_workload(w, p.sources, 1);
  for (auto _ : state) {
    auto result = flip::simulate_plan(p, topo, trace);
    benchmark::DoNotOptimize(result.total_hops);
  }
  state.SetItemsProcessed(state.iterations() * std::int64_t(trace.samples.size()));
}
BENCHMARK(BM_SimulateRequest)->DenseRange(0, 8)->Unit(benchmark::kMillisecond);

void BM_Suite(benchmark::State& state) {
  auto topo = std::make_shared<const flip::Topology>(flip::build_experiment_topology());
  auto requests = flip::requests_r1_r9();
  flip::Workload w;
  w.epochs = 10;
  for (auto _ : state) {
    auto report = flip::run_suite(topo, requests, w, 1);
    benchmark::DoNotOptimize(report.rows.size());
  }
}
BENCHMARK(BM_Suite)->Unit(benchmark::kMillisecond);

}  // namespace
