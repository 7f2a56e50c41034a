#include "flip/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "experiment_topology.hpp"
#include "flip/errors.hpp"

namespace flip {

using json = nlohmann::json;

const char* experiment_topology_json() { return detail::kExperimentTopologyJson; }

Topology build_experiment_topology() { return load_topology_text(experiment_topology_json()); }

std::vector<NamedRequest> requests_r1_r9() {
  static const char* const kTexts[] = {
      "max(bs1:bs10)",
      "avg(max(bs1:bs10),max(bs11:bs20))",
      "avg(min(bs21:bs30),min(bs31:bs40))",
      "sum(avg(bs21:bs30),avg(bs51:bs60))",
      "sum(max(bs1:bs10),max(bs11:bs20),max(bs41:bs50))",
      "sum(max(bs1:bs10),max(bs11:bs20),min(bs21:bs30),min(bs31:bs40))",
      "max(max(bs1:bs10),min(bs31:bs40),max(bs41:bs50),min(bs56:bs60))",
      "max(avg(bs56:bs60),avg(bs61:65),max(min(bs66:bs70),min(bs71:bs75)),max(bs76:bs78))",
      "max(avg(bs1:bs10),avg(bs11:bs20),max(min(bs21:bs30),min(bs31:bs40)),max(bs41:bs50))",
  };
  std::vector<NamedRequest> out;
  int i = 0;
  for (const char* expr : kTexts) {
    auto request = parse_request(std::string("datapath_a(") + expr + ",destination<-user)");
    out.push_back(NamedRequest{"R" + std::to_string(++i), to_canonical_string(request), std::move(request)});
  }
  return out;
}

double reference_value(const TaskGraph& graph, const WorkloadTrace& trace, std::uint64_t epoch) {
  auto eval = [&](auto&& self, std::size_t i) -> double {
    const auto& n = graph.node(i);
    if (n.kind == TaskGraph::Kind::Source) return trace.value(n.node, epoch);
    std::vector<double> xs;
    for (auto c : n.children) xs.push_back(self(self, c));
    switch (*n.op) {
      case OpKind::Min: return *std::min_element(xs.begin(), xs.end());
      case OpKind::Max: return *std::max_element(xs.begin(), xs.end());
      case OpKind::Sum: return std::accumulate(xs.begin(), xs.end(), 0.0);
      case OpKind::Avg: return std::accumulate(xs.begin() + 1, xs.end(), xs.front()) / static_cast<double>(xs.size());
      case OpKind::Sub:
        return std::accumulate(xs.begin() + 1, xs.end(), xs.front(), [](double a, double b) { return a - b; });
      case OpKind::Mul:
        return std::accumulate(xs.begin() + 1, xs.end(), xs.front(), [](double a, double b) { return a * b; });
    }
    throw UnknownOperation("unknown operation");
  };
  return eval(eval, graph.leftmost_child(graph.root()));
}

RunResult simulate_plan(const DatapathPlan& plan, std::shared_ptr<const Topology> topology,
                        const WorkloadTrace& trace) {
  auto store = std::make_shared<ConfigStore>();
  Fabric fabric(topology, store);
  fabric.install_rules(plan.rules);
  for (const auto& cfg : plan.engine_configs) store->set_config(cfg);
  inject_workload(fabric, trace, plan.destination, plan.user);
  fabric.run();

  RunResult r;
  r.stats = fabric.stats();
  for (const auto& [sw, c] : r.stats.switches) r.switch_counts[sw] = c.packets;
  r.total_hops = r.stats.total_packet_hops;
  for (const auto& d : fabric.deliveries()) {
    if (d.packet.final_destination == plan.destination && d.packet.user == plan.user) {
      r.delivered[d.packet.epoch].push_back(d.packet);
    }
  }
  return r;
}

namespace {

bool contains_avg(const TaskGraph& g) {
  for (auto i : g.operations()) {
    if (*g.node(i).op == OpKind::Avg) return true;
  }
  return false;
}

void audit_value(const std::string& name, std::uint64_t epoch, double got, double want, bool relative) {
  const bool ok = relative ? std::fabs(got - want) <= 1e-9 * std::max(1.0, std::fabs(want)) : got == want;
  if (!ok) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "%s epoch %llu: delivered %.17g, reference %.17g", name.c_str(),
                  static_cast<unsigned long long>(epoch), got, want);
    throw AuditFailure(buf);
  }
}

void audit_flip(const std::string& name, const TaskGraph& g, const WorkloadTrace& trace, const Workload& w,
                const RunResult& run) {
  if (run.stats.dropped != 0) throw AuditFailure(name + ": " + std::to_string(run.stats.dropped) + " packets dropped");
  const bool relative = contains_avg(g);
  for (std::uint64_t k = 0; k < w.epochs; ++k) {
    auto it = run.delivered.find(k);
    if (it == run.delivered.end()) throw AuditFailure(name + ": epoch " + std::to_string(k) + " never delivered");
    if (it->second.size() != 1) throw AuditFailure(name + ": epoch " + std::to_string(k) + " delivered twice");
    audit_value(name, k, it->second.front().payload.as_scalar(), reference_value(g, trace, k), relative);
  }
  if (run.delivered.size() != w.epochs) throw AuditFailure(name + ": results for unknown epochs");
}

void audit_baseline(const std::string& name, const TaskGraph& g, const WorkloadTrace& trace, const Workload& w,
                    const RunResult& run) {
  if (run.stats.dropped != 0) throw AuditFailure(name + ": " + std::to_string(run.stats.dropped) + " packets dropped");
  const auto sources = g.source_nodes();
  for (std::uint64_t k = 0; k < w.epochs; ++k) {
    auto it = run.delivered.find(k);
    const std::size_t got = it == run.delivered.end() ? 0 : it->second.size();
    if (got != sources.size()) {
      throw AuditFailure(name + " baseline: epoch " + std::to_string(k) + " delivered " + std::to_string(got) +
                         " of " + std::to_string(sources.size()) + " samples");
    }
    WorkloadTrace at_destination;
    for (const auto& p : it->second) {
      at_destination.values[p.source].assign(w.epochs, 0.0);
    }
    for (const auto& p : it->second) at_destination.values[p.source][k] = p.payload.as_scalar();
    audit_value(name + " baseline", k, reference_value(g, at_destination, k), reference_value(g, trace, k), false);
  }
}

std::string format_pct(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

}  // namespace

std::vector<NodeId> ComparisonRow::non_edge_datapath_switches() const {
  std::set<NodeId> out;
  for (const auto* counts : {&flip_switch_counts, &baseline_switch_counts}) {
    for (const auto& [sw, n] : *counts) {
      if (n > 0 && !edge_switches.count(sw)) out.insert(sw);
    }
  }
  return {out.begin(), out.end()};
}

ComparisonRow run_comparison(const NamedRequest& request, std::shared_ptr<const Topology> topology,
                             const CoverageMap& coverage, const Workload& workload, std::uint64_t seed) {
  const auto graph = expand_sources(request.request, *topology, coverage);
  const auto flip_plan = plan(request.request, *topology, coverage, PlanMode::Flip);
  const auto baseline_plan = plan(request.request, *topology, coverage, PlanMode::Baseline);
  const auto trace = generate_workload(workload, graph.source_nodes(), seed);

  const auto flip_run = simulate_plan(flip_plan, topology, trace);
  audit_flip(request.name, graph, trace, workload, flip_run);
  const auto baseline_run = simulate_plan(baseline_plan, topology, trace);
  audit_baseline(request.name, graph, trace, workload, baseline_run);

  ComparisonRow row;
  row.name = request.name;
  row.request = request.text;
  row.flip_total_hops = flip_run.total_hops;
  row.baseline_total_hops = baseline_run.total_hops;
  row.reduction_pct = row.baseline_total_hops == 0
                          ? 0.0
                          : 100.0 * (1.0 - static_cast<double>(row.flip_total_hops) /
                                               static_cast<double>(row.baseline_total_hops));
  row.flip_switch_counts = flip_run.switch_counts;
  row.baseline_switch_counts = baseline_run.switch_counts;
  for (const auto& s : graph.source_nodes()) row.edge_switches.insert(topology->connected_switch(s));
  row.audited_epochs = workload.epochs;
  row.placements = flip_plan.placements;
  return row;
}

ExperimentReport run_suite(std::shared_ptr<const Topology> topology, const std::vector<NamedRequest>& requests,
                           const Workload& workload, std::uint64_t seed) {
  ExperimentReport report;
  report.seed = seed;
  report.workload = workload;
  report.switches = topology->nodes_of_kind(NodeKind::Switch);
  std::sort(report.switches.begin(), report.switches.end(), [](const NodeId& a, const NodeId& b) {
    auto num = [](const NodeId& x) {
      auto p = x.str().find_first_of("0123456789");
      return p == std::string::npos ? 0L : std::stol(x.str().substr(p));
    };
    return std::pair(num(a), a) < std::pair(num(b), b);
  });
  CoverageMap no_coverage;
  for (std::size_t i = 0; i < requests.size(); ++i) {
    report.rows.push_back(run_comparison(requests[i], topology, no_coverage, workload, seed + i));
  }
  return report;
}

std::string switch_counts_csv(const ExperimentReport& report) {
  std::ostringstream out;
  out << "switch,flip_count,baseline_count\n";
  for (const auto& sw : report.switches) {
    std::uint64_t f = 0, b = 0;
    for (const auto& row : report.rows) {
      if (auto it = row.flip_switch_counts.find(sw); it != row.flip_switch_counts.end()) f += it->second;
      if (auto it = row.baseline_switch_counts.find(sw); it != row.baseline_switch_counts.end()) b += it->second;
    }
    out << sw << ',' << f << ',' << b << '\n';
  }
  return out.str();
}

std::string request_totals_csv(const ExperimentReport& report) {
  std::ostringstream out;
  out << "request,flip_total_hops,baseline_total_hops,reduction_pct\n";
  for (const auto& row : report.rows) {
    out << row.name << ',' << row.flip_total_hops << ',' << row.baseline_total_hops << ','
        << format_pct(row.reduction_pct) << '\n';
  }
  return out.str();
}

json summary_json(const ExperimentReport& report) {
  json rows = json::array();
  double lo = 100.0, hi = 0.0;
  for (const auto& row : report.rows) {
    json counts = json::object();
    for (const auto& sw : report.switches) {
      auto get = [&](const std::map<NodeId, std::uint64_t>& m) {
        auto it = m.find(sw);
        return it == m.end() ? std::uint64_t{0} : it->second;
      };
      counts[sw.str()] = {{"flip", get(row.flip_switch_counts)}, {"baseline", get(row.baseline_switch_counts)}};
    }
    json edges = json::array();
    for (const auto& e : row.edge_switches) edges.push_back(e.str());
    json placements = json::array();
    for (const auto& p : row.placements) placements.push_back({{"op", p.op}, {"switch", p.switch_id.str()}});
    rows.push_back({{"name", row.name},
                    {"request", row.request},
                    {"flip_total_hops", row.flip_total_hops},
                    {"baseline_total_hops", row.baseline_total_hops},
                    {"reduction_pct", std::round(row.reduction_pct * 100.0) / 100.0},
                    {"audited_epochs", row.audited_epochs},
                    {"edge_switches", std::move(edges)},
                    {"placements", std::move(placements)},
                    {"switch_counts", std::move(counts)}});
    lo = std::min(lo, row.reduction_pct);
    hi = std::max(hi, row.reduction_pct);
  }
  return {{"seed", report.seed},
          {"workload", report.workload.to_json()},
          {"requests", std::move(rows)},
          {"reduction_pct_min", std::round(lo * 100.0) / 100.0},
          {"reduction_pct_max", std::round(hi * 100.0) / 100.0},
          {"audit", "pass"}};
}

void export_report(const ExperimentReport& report, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create '" + dir.string() + "': " + ec.message());
  auto write = [&](const char* name, const std::string& text) {
    std::ofstream out(dir / name, std::ios::trunc);
    if (!out) throw IoError("cannot write '" + (dir / name).string() + "'");
    out << text;
  };
  write("switch_counts.csv", switch_counts_csv(report));
  write("request_totals.csv", request_totals_csv(report));
  write("summary.json", summary_json(report).dump(2) + "\n");
}

}  // namespace flip
