#include <benchmark/benchmark.h>

#include <random>

#include "flip/harness.hpp"
#include "flip/steiner.hpp"

namespace {

flip::Topology grid(int side) {
  std::vector<std::pair<flip::NodeId, flip::NodeKind>> nodes;
  std::vector<flip::Link> links;
  std::mt19937_64 rng(7);
  auto name = [](int r, int c) { return flip::NodeId("sw" + std::to_string(r) + "_" + std::to_string(c)); };
  for (int r = 0; r < side; ++r) {
    for (int c = 0; c < side; ++c) {
      nodes.emplace_back(name(r, c), flip::NodeKind::Switch);
      if (r > 0) links.push_back({name(r - 1, c), name(r, c), double(1 + rng() % 5)});
      if (c > 0) links.push_back({name(r, c - 1), name(r, c), double(1 + rng() % 5)});
    }
  }
  return flip::Topology::build(std::move(nodes), std::move(links));
}

void BM_SteinerGrid(benchmark::State& state) {
  const int side = int(state.range(0));
  auto topo = grid(side);
  std::vector<flip::NodeId> terminals;
  for (int i = 0; i < side; ++i) terminals.emplace_back("sw" + std::to_string(i) + "_" + std::to_string((i * 3) % side));
  for (auto _ : state) {
    auto tree = flip::steiner_tree(topo, terminals);
    benchmark::DoNotOptimize(tree.weight());
  }
  state.SetComplexityN(side * side);
}
BENCHMARK(BM_SteinerGrid)->Arg(4)->Arg(8)->Arg(16)->Arg(24)->Complexity();

void BM_PlanR1R9(benchmark::State& state) {
  auto topo = flip::build_experiment_topology();
  auto requests = flip::requests_r1_r9();
  for (auto _ : state) {
    for (const auto& r : requests) {
      auto p = flip::build_plan(r.request, topo, {});
      benchmark::DoNotOptimize(p.rules.size());
    }
  }
}
BENCHMARK(BM_PlanR1R9);

}  // namespace
