#include <gtest/gtest.h>

#include <random>

#include <nlohmann/json.hpp>

#include "flip/errors.hpp"
#include "flip/harness.hpp"
#include "flip/topology.hpp"
#include "oracles.hpp"

using namespace flip;

namespace {

Topology five_switch() { return load_topology_file(FLIP_DATA_DIR "/five_switch_topology.json"); }

Topology single_switch() {
  return load_topology_text(R"({"nodes": [{"id": "sw1", "kind": "switch"},
    {"id": "bs1", "kind": "basestation", "switch": "sw1"},
    {"id": "user", "kind": "destination", "switch": "sw1"}], "links": []})");
}

}  // namespace

TEST(Topology, FiveSwitchCounts) {
  auto t = five_switch();
  EXPECT_EQ(t.nodes_of_kind(NodeKind::Switch).size(), 5u);
  EXPECT_EQ(t.nodes_of_kind(NodeKind::Engine).size(), 5u);
  EXPECT_EQ(t.nodes_of_kind(NodeKind::BaseStation).size(), 300u);
  EXPECT_EQ(t.engine_of(NodeId("sw3")), NodeId("e-sw3"));
}

TEST(Topology, ConnectedSwitch) {
  auto t = five_switch();
  EXPECT_EQ(t.connected_switch(NodeId("bs1")), NodeId("sw1"));
  EXPECT_EQ(t.connected_switch(NodeId("bs150")), NodeId("sw3"));
  EXPECT_EQ(t.connected_switch(NodeId("e-sw4")), NodeId("sw4"));
  EXPECT_EQ(single_switch().connected_switch(NodeId("bs1")), NodeId("sw1"));
  EXPECT_THROW(t.connected_switch(NodeId("sw1")), NotFound);
}

TEST(Topology, ExperimentBaseStationsReadBack) {
  auto doc = nlohmann::json::parse(experiment_topology_json());
  auto t = build_experiment_topology();
  std::map<NodeId, NodeId> declared;
  for (const auto& n : doc["nodes"]) {
    if (n.value("kind", "") != "basestation") continue;
    if (n.contains("range")) {
      auto r = n["range"].get<std::string>();
      auto colon = r.find(':');
      for (const auto& id : expand_id_range(r.substr(0, colon), r.substr(colon + 1))) declared[id] = NodeId(n["switch"].get<std::string>());
    } else {
      declared[NodeId(n["id"].get<std::string>())] = NodeId(n["switch"].get<std::string>());
    }
  }
  ASSERT_EQ(declared.size(), 78u);
  for (const auto& [bs, sw] : declared) EXPECT_EQ(t.connected_switch(bs), sw) << bs;
  EXPECT_EQ(t.connected_switch(NodeId("bs45")), declared.at(NodeId("bs45")));
}

TEST(Topology, AdjacentSwitchMatchesBruteForce) {
  auto t = five_switch();
  for (const auto& sw : t.nodes_of_kind(NodeKind::Switch)) {
    std::optional<std::pair<double, NodeId>> best;
    for (const auto& l : t.links()) {
      NodeId other = l.a == sw ? l.b : l.b == sw ? l.a : NodeId();
      if (other.empty() || t.kind(other) != NodeKind::Switch) continue;
      std::pair<double, NodeId> c{l.delay_ms, other};
      if (!best || c < *best) best = c;
    }
    ASSERT_TRUE(best);
    EXPECT_EQ(t.adjacent_switch(sw, {}), best->second);
    EXPECT_EQ(t.adjacent_switch(sw, {}), t.adjacent_switch(sw, {}));
  }
  EXPECT_EQ(t.adjacent_switch(NodeId("sw4"), {}), NodeId("sw5"));
}

TEST(Topology, AdjacentSwitchExhausted) {
  EXPECT_THROW(single_switch().adjacent_switch(NodeId("sw1"), {}), NotFound);
  auto t = five_switch();
  EXPECT_THROW(t.adjacent_switch(NodeId("sw3"), {NodeId("sw1"), NodeId("sw2"), NodeId("sw5")}), NotFound);
}

TEST(Topology, ShortestPathTrivial) {
  auto t = five_switch();
  auto p = t.shortest_path(NodeId("sw1"), NodeId("sw1"));
  EXPECT_EQ(p.nodes, std::vector<NodeId>{NodeId("sw1")});
  EXPECT_EQ(p.delay_ms, 0.0);
  auto line = load_topology_text(R"({"nodes": [{"id": "a", "kind": "switch"}, {"id": "m", "kind": "switch"},
    {"id": "b", "kind": "switch"}], "links": [{"a": "a", "b": "m", "delay_ms": 1}, {"a": "m", "b": "b", "delay_ms": 2}]})");
  auto q = line.shortest_path(NodeId("a"), NodeId("b"));
  EXPECT_EQ(q.nodes, (std::vector<NodeId>{NodeId("a"), NodeId("m"), NodeId("b")}));
  EXPECT_EQ(q.delay_ms, 3.0);
}

TEST(Topology, ShortestPathMatchesExhaustiveSearch) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 30; ++trial) {
    auto t = load_topology(oracle::random_switch_graph(rng, 8, 0.3));
    const auto& ids = t.nodes();
    for (const auto& a : ids) {
      for (const auto& b : ids) {
        auto p = t.shortest_path(a, b);
        EXPECT_DOUBLE_EQ(p.delay_ms, oracle::shortest_delay(t, a, b));
        EXPECT_DOUBLE_EQ(p.delay_ms, t.shortest_path(b, a).delay_ms);
        double sum = 0;
        for (std::size_t i = 1; i < p.nodes.size(); ++i) sum += *t.link_delay(p.nodes[i - 1], p.nodes[i]);
        EXPECT_DOUBLE_EQ(sum, p.delay_ms);
      }
    }
  }
}

TEST(Topology, Validation) {
  EXPECT_THROW(load_topology_text(R"({"nodes": [{"id": "bs1", "kind": "basestation"}], "links": []})"), Error);
  EXPECT_THROW(load_topology_text(R"({"nodes": [{"id": "a", "kind": "switch"}, {"id": "b", "kind": "switch"}], "links": []})"),
               Error);
  EXPECT_THROW(load_topology_text("{not json"), Error);
  EXPECT_THROW(expand_id_range("bs5", "bs2"), EmptyRange);
  EXPECT_EQ(expand_id_range("bs7", "bs7").size(), 1u);
  EXPECT_EQ(expand_id_range("bs1", "10").size(), 10u);
}

TEST(Topology, ExperimentShape) {
  auto t = build_experiment_topology();
  EXPECT_EQ(t.nodes_of_kind(NodeKind::Switch).size(), 12u);
  EXPECT_EQ(t.nodes_of_kind(NodeKind::Engine).size(), 12u);
  EXPECT_EQ(t.nodes_of_kind(NodeKind::BaseStation).size(), 78u);
  EXPECT_EQ(t.nodes_of_kind(NodeKind::Destination).size() + t.nodes_of_kind(NodeKind::Cloud).size(), 2u);
  for (const auto& bs : t.nodes_of_kind(NodeKind::BaseStation)) {
    auto n = t.neighbors(bs);
    ASSERT_EQ(n.size(), 1u);
    EXPECT_EQ(t.kind(n.front()), NodeKind::Switch);
  }
  for (const auto& x : t.nodes()) EXPECT_NO_THROW(t.shortest_path(NodeId("user"), x));
}

TEST(Topology, EmbeddedExperimentMatchesDataFile) {
  auto file = load_topology_file(FLIP_DATA_DIR "/experiment_topology.json");
  EXPECT_EQ(file.to_json(), build_experiment_topology().to_json());
}
