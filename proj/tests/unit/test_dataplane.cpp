#include <gtest/gtest.h>

#include <sstream>

#include <nlohmann/json.hpp>

#include "flip/dataplane.hpp"
#include "flip/errors.hpp"
#include "flip/planner.hpp"
#include "flip/workload.hpp"
#include "oracles.hpp"

using namespace flip;

namespace {

// bs1 - sw1 - sw2 - sw3 - user, bs1 link 2 ms, switch links 1 ms
std::shared_ptr<const Topology> line() {
  return std::make_shared<const Topology>(load_topology_text(R"({"nodes": [
    {"id": "sw1", "kind": "switch"}, {"id": "sw2", "kind": "switch"}, {"id": "sw3", "kind": "switch"},
    {"id": "bs1", "kind": "basestation", "switch": "sw1", "delay_ms": 2},
    {"id": "bs2", "kind": "basestation", "switch": "sw1"},
    {"id": "user", "kind": "destination", "switch": "sw3"}],
    "links": [{"a": "sw1", "b": "sw2"}, {"a": "sw2", "b": "sw3"}]})"));
}

std::shared_ptr<const Topology> five_switch() {
  return std::make_shared<const Topology>(load_topology_file(FLIP_DATA_DIR "/five_switch_topology.json"));
}

PacketRecord packet(const char* source, const char* dest, double t) {
  PacketRecord p;
  p.source = NodeId(source);
  p.final_destination = NodeId(dest);
  p.timestamp_ms = t;
  p.payload = Payload::scalar(1);
  return p;
}

FlowRule rule(const char* sw, const char* dest, std::vector<NodeId> sources, FlowAction a) {
  return FlowRule{NodeId(sw), FlowMatch{NodeId(dest), std::move(sources)}, std::move(a)};
}

std::vector<FlowRule> line_rules() {
  std::vector<NodeId> s{NodeId("bs1"), NodeId("bs2")};
  return {rule("sw1", "user", s, FlowAction::forward_to(NodeId("sw2"))),
          rule("sw2", "user", s, FlowAction::forward_to(NodeId("sw3"))),
          rule("sw3", "user", s, FlowAction::deliver())};
}

void expect_conserved(const Fabric& f) {
  auto s = f.stats();
  EXPECT_EQ(s.created, s.delivered + s.dropped + s.absorbed + s.in_flight);
}

}  // namespace

TEST(Fabric, FreshIsZero) {
  Fabric f(line(), std::make_shared<ConfigStore>());
  auto s = f.stats();
  EXPECT_EQ(s.total_packet_hops, 0u);
  EXPECT_EQ(s.created + s.delivered + s.dropped + s.absorbed + s.in_flight, 0u);
  for (const auto& [sw, c] : s.switches) EXPECT_EQ(c.packets, 0u);
  EXPECT_EQ(f.install_rules({}), 0u);
}

TEST(Fabric, InstallValidation) {
  Fabric f(line(), std::make_shared<ConfigStore>());
  auto rules = line_rules();
  rules.push_back(rule("sw99", "user", {NodeId("bs1")}, FlowAction::deliver()));
  EXPECT_THROW(f.install_rules(rules), UnknownSwitch);
  EXPECT_TRUE(f.flows(NodeId("sw1")).empty());
  EXPECT_EQ(f.install_rules(line_rules()), 3u);
  EXPECT_EQ(f.install_rules(line_rules()), 0u);
  EXPECT_EQ(f.flows(NodeId("sw1")).size(), 1u);
  EXPECT_THROW(f.install_rules({rule("sw1", "user", {NodeId("bs1")}, FlowAction::forward_to(NodeId("sw3")))}), Error);
}

TEST(Fabric, SpecificBeforeWildcard) {
  Fabric f(line(), std::make_shared<ConfigStore>());
  f.install_rules({rule("sw1", "*", {NodeId("bs1")}, FlowAction::deliver())});
  f.install_rules({rule("sw1", "user", {NodeId("bs1")}, FlowAction::forward_to(NodeId("sw2")))});
  EXPECT_EQ(f.flows(NodeId("sw1")).front().rule.match.final_destination, NodeId("user"));
}

TEST(Fabric, TimingAndOrdering) {
  Fabric f(line(), std::make_shared<ConfigStore>());
  f.install_rules(line_rules());
  std::vector<TraceEntry> trace;
  f.set_trace_callback([&](const TraceEntry& e) { trace.push_back(e); });
  auto first = f.inject(packet("bs2", "user", 0), NodeId("bs2"));
  auto second = f.inject(packet("bs2", "user", 0), NodeId("bs2"));
  auto slow = f.inject(packet("bs1", "user", 0), NodeId("bs1"));
  f.run();
  ASSERT_GE(trace.size(), 3u);
  EXPECT_EQ(trace[0].node, NodeId("sw1"));
  EXPECT_EQ(trace[0].packet, first);
  EXPECT_EQ(trace[1].packet, second);
  EXPECT_EQ(trace[0].time_ms, 1.0);
  for (const auto& e : trace) {
    if (e.packet == slow && e.node == NodeId("sw1")) EXPECT_EQ(e.time_ms, 2.0);
    if (e.packet == first && e.node == NodeId("sw2")) EXPECT_EQ(e.time_ms, 2.0);
  }
  for (std::size_t i = 1; i < trace.size(); ++i) EXPECT_LE(trace[i - 1].time_ms, trace[i].time_ms);
  ASSERT_EQ(f.deliveries().size(), 3u);
  EXPECT_EQ(f.deliveries()[0].time_ms, 4.0);
  EXPECT_EQ(f.deliveries()[0].packet.hop_count, 4u);
}

TEST(Fabric, ThreeSwitchCounts) {
  Fabric f(line(), std::make_shared<ConfigStore>());
  f.install_rules(line_rules());
  f.inject(packet("bs2", "user", 0), NodeId("bs2"));
  f.run();
  auto s = f.stats(NodeId("user"));
  for (const char* sw : {"sw1", "sw2", "sw3"}) EXPECT_EQ(s.switches.at(NodeId(sw)).packets, 1u);
  EXPECT_EQ(s.total_packet_hops, 3u);
  EXPECT_EQ(f.stats(NodeId("cloud")).total_packet_hops, 0u);
  EXPECT_EQ(s.switches.at(NodeId("sw2")).ports.at(NodeId("sw1")).rx, 1u);
  EXPECT_EQ(s.switches.at(NodeId("sw2")).ports.at(NodeId("sw3")).tx, 1u);
  EXPECT_EQ(f.flows(NodeId("sw2")).front().hits, 1u);
  auto csv = s.to_csv();
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "switch,id,count");
  EXPECT_NE(csv.find("sw2,packets,1"), std::string::npos);
}

TEST(Fabric, TableMissAndBadOrigin) {
  Fabric f(line(), std::make_shared<ConfigStore>());
  f.inject(packet("bs1", "user", 0), NodeId("bs1"));
  f.run();
  auto s = f.stats();
  EXPECT_EQ(s.dropped, 1u);
  EXPECT_EQ(s.switches.at(NodeId("sw1")).table_misses, 1u);
  EXPECT_THROW(f.inject(packet("user", "bs1", 5), NodeId("user")), UnknownNode);
  EXPECT_THROW(f.inject(packet("sw1", "user", 5), NodeId("sw1")), UnknownNode);
  expect_conserved(f);
}

TEST(Fabric, LoopIsDropped) {
  Fabric f(line(), std::make_shared<ConfigStore>());
  f.install_rules({rule("sw1", "user", {NodeId("bs1")}, FlowAction::forward_to(NodeId("sw2"))),
                   rule("sw2", "user", {NodeId("bs1")}, FlowAction::forward_to(NodeId("sw1")))});
  f.inject(packet("bs1", "user", 0), NodeId("bs1"));
  f.run();
  EXPECT_EQ(f.stats().dropped, 1u);
  expect_conserved(f);
}

TEST(Fabric, FiveSwitchRunConservationAndValues) {
  auto t = five_switch();
  auto store = std::make_shared<ConfigStore>();
  Fabric f(t, store);
  const char* text =
      "datapath_a(max(avg(bs1:bs10),avg(bs11:bs100),max(min(bs101:bs200),min(bs201:bs300))),destination<-user)";
  auto request = parse_request(text);
  auto plan = build_plan(request, *t, {});
  f.install_rules(plan.rules);
  for (const auto& c : plan.engine_configs) store->set_config(c);
  Workload w;
  w.epochs = 5;
  auto trace = generate_workload(w, plan.sources, 9);
  inject_workload(f, trace, NodeId("user"), "default");

  std::ostringstream jsonl;
  f.set_trace(&jsonl);
  std::map<std::uint64_t, double> last_seen;
  std::uint64_t last_hops = 0;
  while (auto e = f.step()) {
    expect_conserved(f);
    auto s = f.stats();
    EXPECT_GE(s.total_packet_hops, last_hops);
    last_hops = s.total_packet_hops;
    if (e->packet) {
      auto [it, fresh] = last_seen.try_emplace(e->packet, e->time_ms);
      EXPECT_LE(it->second, e->time_ms);
      it->second = e->time_ms;
    }
  }
  auto s = f.stats();
  EXPECT_EQ(s.dropped, 0u);
  EXPECT_EQ(s.in_flight, 0u);
  ASSERT_EQ(f.deliveries().size(), 5u);
  for (const auto& d : f.deliveries()) {
    EXPECT_LE(d.packet.hop_count, t->size());
    EXPECT_EQ(d.packet.payload.as_scalar(), oracle::evaluate(request.expr, oracle::epoch_values(trace, d.packet.epoch)));
  }
  std::istringstream lines(jsonl.str());
  std::size_t n = 0;
  for (std::string line; std::getline(lines, line); ++n) EXPECT_TRUE(nlohmann::json::parse(line).contains("event"));
  EXPECT_GT(n, 1500u);
}

TEST(Fabric, ModifyAndDelete) {
  Fabric f(line(), std::make_shared<ConfigStore>());
  f.install_rules(line_rules());
  auto r = line_rules()[2];
  r.action = FlowAction::forward_to(NodeId("sw2"));
  EXPECT_EQ(f.modify_rules({r}), 1u);
  EXPECT_EQ(f.flows(NodeId("sw3")).front().rule.action, r.action);
  EXPECT_EQ(f.delete_rules({r}), 1u);
  EXPECT_TRUE(f.flows(NodeId("sw3")).empty());
  EXPECT_EQ(f.delete_all_rules(NodeId("sw1")), 1u);
  EXPECT_EQ(f.delete_all_rules(NodeId("sw1")), 0u);
}
