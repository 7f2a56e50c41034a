// Acceptance checks AC1..AC7. Prints one PASS/FAIL line per criterion and
// exits non-zero when any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>

#include "flip/control.hpp"
#include "flip/errors.hpp"
#include "flip/harness.hpp"
#include "flip/steiner.hpp"
#include "oracles.hpp"

using namespace flip;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
  void fail(const std::string& why) {
    if (pass) detail = why;
    pass = false;
  }
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double a, double b = 0, double c = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

Outcome ac1_steiner_quality() {
  Outcome o;
  auto t0 = Clock::now();
  std::mt19937_64 rng(2024);
  int graphs = 0;
  double worst_ratio = 1.0;
  for (; graphs < 150; ++graphs) {
    const int n = 5 + int(rng() % 5);
    auto topo = load_topology(oracle::random_switch_graph(rng, n, 0.3));
    auto ids = topo.nodes();
    std::shuffle(ids.begin(), ids.end(), rng);
    const std::size_t k = std::min<std::size_t>(3 + rng() % 3, ids.size());
    ids.resize(k);
    auto tree = steiner_tree(topo, ids);
    const double opt = oracle::steiner_optimum(topo, ids);
    const double bound = (2.0 - 2.0 / double(k)) * opt;
    if (!tree.is_tree_spanning_terminals()) o.fail("not a spanning tree on graph " + std::to_string(graphs));
    if (tree.weight() < opt - 1e-9 || tree.weight() > bound + 1e-9) {
      o.fail(fmt("weight %.0f outside [%.0f, %.2f]", tree.weight(), opt, bound));
    }
    worst_ratio = std::max(worst_ratio, tree.weight() / opt);
  }
  const double secs = seconds_since(t0);
  if (secs > 30) o.fail(fmt("took %.1f s", secs));
  if (o.pass) o.detail = std::to_string(graphs) + " graphs, worst ratio " + fmt("%.3f", worst_ratio) + fmt(", %.2f s", secs);
  return o;
}

Outcome ac2_placement() {
  Outcome o;
  auto topo = load_topology_file(FLIP_DATA_DIR "/five_switch_topology.json");
  auto request = parse_request(
      "datapath_a(max(avg(bs1:bs10),avg(bs11:bs100),max(min(bs101:bs200),min(bs201:bs300))),destination<-user)");
  auto graph = expand_sources(request, topo, {});
  // (op kind, leftmost source) identifies each operation independently of naming
  std::map<std::pair<OpKind, std::string>, std::string> expected{
      {{OpKind::Min, "bs101"}, "sw3"}, {{OpKind::Min, "bs201"}, "sw4"}, {{OpKind::Max, "bs101"}, "sw5"},
      {{OpKind::Avg, "bs1"}, "sw1"},   {{OpKind::Avg, "bs11"}, "sw2"},  {{OpKind::Max, "bs1"}, "sw3"}};
  std::string first_run;
  for (int run = 0; run < 3; ++run) {
    auto placements = place_operations(graph, topo);
    std::ostringstream dump;
    for (const auto& p : placements) dump << p.op << '=' << p.switch_id << '/' << p.engine << ';';
    if (run == 0) first_run = dump.str();
    else if (dump.str() != first_run) o.fail("placements differ between runs");
    if (placements.size() != 6) o.fail("expected 6 placements");
    for (const auto& p : placements) {
      auto idx = graph.find(p.op);
      std::size_t leaf = *idx;
      while (graph.node(leaf).kind != TaskGraph::Kind::Source) leaf = graph.leftmost_child(leaf);
      auto it = expected.find({*graph.node(*idx).op, graph.node(leaf).node.str()});
      if (it == expected.end()) o.fail("unexpected operation " + p.op);
      else if (p.switch_id.str() != it->second) o.fail(p.op + " on " + p.switch_id.str() + ", expected " + it->second);
    }
  }
  if (o.pass) o.detail = first_run;
  return o;
}

bool has_avg(const Expr& e) {
  if (!e.is_operation()) return false;
  if (*e.op == OpKind::Avg) return true;
  return std::any_of(e.args.begin(), e.args.end(), has_avg);
}

Outcome ac3_oracle_equivalence() {
  Outcome o;
  auto topo = std::make_shared<const Topology>(build_experiment_topology());
  auto requests = requests_r1_r9();
  std::size_t checked = 0;
  double worst_rel = 0;
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    for (const auto& nr : requests) {
      auto plan = build_plan(nr.request, *topo, {});
      Workload w;
      auto trace = generate_workload(w, plan.sources, seed * 1000 + checked % 9);
      auto run = simulate_plan(plan, topo, trace);
      if (run.delivered.size() != w.epochs) {
        o.fail(nr.name + fmt(" seed %.0f: %.0f epochs delivered", double(seed), double(run.delivered.size())));
        continue;
      }
      const bool tolerant = has_avg(nr.request.expr);
      for (const auto& [epoch, packets] : run.delivered) {
        if (packets.size() != 1) {
          o.fail(nr.name + " duplicate delivery");
          continue;
        }
        const double got = packets.front().payload.as_scalar();
        const double want = oracle::evaluate(nr.request.expr, oracle::epoch_values(trace, epoch));
        const double rel = want == 0 ? std::abs(got) : std::abs(got - want) / std::abs(want);
        worst_rel = std::max(worst_rel, rel);
        if (tolerant ? rel > 1e-9 : got != want) {
          o.fail(nr.name + fmt(" epoch %.0f: got %.17g want %.17g", double(epoch), got, want));
        }
        ++checked;
      }
    }
  }
  if (o.pass) o.detail = std::to_string(checked) + " epoch values match, worst relative error " + fmt("%.3g", worst_rel);
  return o;
}

Outcome ac4_traffic_reduction() {
  Outcome o;
  auto t0 = Clock::now();
  auto topo = std::make_shared<const Topology>(build_experiment_topology());
  auto report = run_suite(topo, requests_r1_r9(), Workload{}, 1);
  std::ostringstream d;
  for (const auto& row : report.rows) {
    d << row.name << '=' << fmt("%.1f", row.reduction_pct) << ' ';
    if (row.reduction_pct < 40.0 || row.reduction_pct > 80.0) o.fail(row.name + fmt(" reduction %.2f%%", row.reduction_pct));
    if (row.flip_total_hops >= row.baseline_total_hops) o.fail(row.name + " not strictly below baseline");
    for (const auto& sw : row.non_edge_datapath_switches()) {
      auto count = [&](const std::map<NodeId, std::uint64_t>& m) {
        auto it = m.find(sw);
        return it == m.end() ? std::uint64_t{0} : it->second;
      };
      if (count(row.flip_switch_counts) > count(row.baseline_switch_counts)) {
        o.fail(row.name + " " + sw.str() + fmt(": flip %.0f > baseline %.0f", double(count(row.flip_switch_counts)),
                                                double(count(row.baseline_switch_counts))));
      }
    }
  }
  const double secs = seconds_since(t0);
  if (secs > 60) o.fail(fmt("suite took %.1f s", secs));
  if (o.pass) o.detail = d.str() + fmt("(%.2f s)", secs);
  return o;
}

Outcome ac5_rate_jitter() {
  Outcome o;
  auto topo = std::make_shared<const Topology>(load_topology_file(FLIP_DATA_DIR "/five_switch_topology.json"));
  {
    auto store = std::make_shared<ConfigStore>();
    Fabric fabric(topo, store);
    auto plan = build_plan(parse_request("datapath_m(bs1,bs2,switch<-sw1,compute<-sum,destination<-user,"
                                         "requirement<-{rate=1s})"),
                           *topo, {});
    fabric.install_rules(plan.rules);
    for (const auto& c : plan.engine_configs) store->set_config(c);
    Workload w;  // 100 ms period, 100 epochs: 10 s horizon
    auto trace = generate_workload(w, {NodeId("bs1"), NodeId("bs2")}, 5);
    inject_workload(fabric, trace, NodeId("user"), "default");
    fabric.run();
    const auto c = fabric.engine_counters().at(NodeId("e-sw1"));
    const double per_source = double(c.arrivals - c.rate_drops) / 2.0;
    const double expected = std::ceil(w.horizon_ms() / 1000.0);
    if (std::abs(per_source - expected) > 1.0) o.fail(fmt("%.1f packets per source passed, expected %.0f +- 1", per_source, expected));
    o.detail = fmt("rate: %.1f of %.0f per source pass", per_source, double(w.epochs));
  }
  {
    auto store = std::make_shared<ConfigStore>();
    Fabric fabric(topo, store);
    auto plan = build_plan(parse_request("datapath_m(bs1,bs2,switch<-sw1,compute<-sum,destination<-user,"
                                         "requirement<-{jitter=5ms})"),
                           *topo, {});
    fabric.install_rules(plan.rules);
    for (const auto& c : plan.engine_configs) store->set_config(c);
    auto send = [&](const char* bs, double t, std::uint64_t epoch, double v) {
      PacketRecord p;
      p.source = NodeId(bs);
      p.final_destination = NodeId("user");
      p.timestamp_ms = t;
      p.epoch = epoch;
      p.payload = Payload::scalar(v);
      fabric.inject(p, NodeId(bs));
    };
    send("bs1", 100, 1, 1.0);
    send("bs2", 110, 1, 2.0);  // 10 ms behind the leader
    send("bs1", 300, 3, 4.0);
    send("bs2", 303, 3, 8.0);  // 3 ms behind the leader
    fabric.run();
    const auto c = fabric.engine_counters().at(NodeId("e-sw1"));
    std::map<std::uint64_t, double> got;
    for (const auto& d : fabric.deliveries()) got[d.packet.epoch] = d.packet.payload.as_scalar();
    if (c.jitter_discards != 1) o.fail(fmt("%.0f jitter discards, expected 1", double(c.jitter_discards)));
    if (got.count(3) == 0 || got[3] != 12.0) o.fail("3 ms offset was not kept");
    if (got.count(1) && got[1] != 1.0) o.fail("10 ms offset contributed to epoch 1");
    o.detail += fmt("; jitter: offset 10 discarded (%.0f), offset 3 kept (sum %.0f)", double(c.jitter_discards), got[3]);
  }
  return o;
}

Outcome ac6_delay_admission() {
  Outcome o;
  auto topo = std::make_shared<const Topology>(build_experiment_topology());
  const auto base = requests_r1_r9()[8].request;
  auto probe = build_plan(base, *topo, {});
  const double worst = probe.worst_path_delay_ms;
  Session session(topo);
  const auto before = session.state_json().dump();
  auto tight = base;
  tight.requirements.delay_ms = worst - 1.0;
  auto r = session.execute({"datapath_a", {{"request", to_canonical_string(tight)}}});
  if (r.ok || r.code != "RejectedByDelay") o.fail("tight bound was not rejected");
  if (!r.ok && r.body.value("worst_path_delay_ms", -1.0) != worst) o.fail("rejection does not carry the worst path delay");
  if (session.state_json().dump() != before) o.fail("rejected request changed fabric state");
  try {
    plan(tight, *topo, {});
    o.fail("plan() did not throw");
  } catch (const RejectedByDelay& e) {
    if (e.worst_path_delay_ms() != worst) o.fail("RejectedByDelay carries a different delay");
  }
  auto relaxed = base;
  relaxed.requirements.delay_ms = worst + 1.0;
  auto ok = session.execute({"datapath_a", {{"request", to_canonical_string(relaxed)}}});
  if (!ok.ok) o.fail("worst + 1 ms was rejected: " + ok.message);
  if (session.state_json().dump() == before) o.fail("admitted request installed nothing");
  if (o.pass) o.detail = fmt("worst path %.0f ms: bound %.0f rejected, bound %.0f admitted", worst, worst - 1, worst + 1);
  return o;
}

Outcome ac7_determinism_replay() {
  Outcome o;
  auto embedded = std::make_shared<const Topology>(build_experiment_topology());
  auto from_file = std::make_shared<const Topology>(load_topology_file(FLIP_DATA_DIR "/experiment_topology.json"));
  for (const auto& nr : requests_r1_r9()) {
    for (auto mode : {PlanMode::Flip, PlanMode::Baseline}) {
      auto a = build_plan(parse_request(nr.text), *embedded, {}, mode).to_json().dump();
      auto b = build_plan(parse_request(nr.text), *from_file, {}, mode).to_json().dump();
      if (a != b) o.fail(nr.name + " plan serialization differs");
    }
  }
  Workload w;
  w.epochs = 30;
  auto r1 = run_suite(embedded, requests_r1_r9(), w, 7);
  auto r2 = run_suite(from_file, requests_r1_r9(), w, 7);
  if (switch_counts_csv(r1) != switch_counts_csv(r2)) o.fail("switch CSV differs");
  if (request_totals_csv(r1) != request_totals_csv(r2)) o.fail("totals CSV differs");
  if (summary_json(r1).dump() != summary_json(r2).dump()) o.fail("summary differs");

  Session live(embedded);
  for (const auto& r : live.run_script(FLIP_DATA_DIR "/r1_r9.flip", false)) {
    if (!r.ok) o.fail("script line failed: " + r.message);
  }
  live.execute({"delflowall", {{"switch", "sw12"}}});
  live.execute_line(R"(setconfig/user {"engine": "sw7", "user": "ops", "config": {"compute": "min", "source": ["bs21", "bs22"], "destination": "cloud", "rate": 500}})");
  Session replayed(embedded);
  replayed.replay(live.command_log());
  if (replayed.state_json().dump() != live.state_json().dump()) o.fail("replayed state differs");
  if (o.pass) o.detail = "18 plans, 3 report files and " + std::to_string(live.command_log().size()) + "-command replay identical";
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> checks{
      {"AC1 steiner quality", ac1_steiner_quality},   {"AC2 placement fidelity", ac2_placement},
      {"AC3 oracle equivalence", ac3_oracle_equivalence}, {"AC4 traffic reduction", ac4_traffic_reduction},
      {"AC5 rate/jitter semantics", ac5_rate_jitter}, {"AC6 delay admission", ac6_delay_admission},
      {"AC7 determinism and replay", ac7_determinism_replay}};
  int failures = 0;
  for (const auto& [name, run] : checks) {
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o.fail(std::string("exception: ") + e.what());
    }
    failures += o.pass ? 0 : 1;
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
