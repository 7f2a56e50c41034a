#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "flip/dataplane.hpp"
#include "flip/dsl.hpp"
#include "flip/planner.hpp"
#include "flip/task_graph.hpp"
#include "flip/topology.hpp"
#include "flip/workload.hpp"

namespace flip {

/// The 12-switch, 78-base-station evaluation network: core sw1 (user),
/// aggregation sw2..sw4 (cloud on sw4), edge sw5..sw12, one engine per switch.
const char* experiment_topology_json();
Topology build_experiment_topology();

struct NamedRequest {
  std::string name;
  std::string text;
  Request request;
};

/// R1..R9 as canonical request text and parsed requests.
std::vector<NamedRequest> requests_r1_r9();

/// Direct evaluation of the task graph over one epoch of recorded values.
double reference_value(const TaskGraph& graph, const WorkloadTrace& trace, std::uint64_t epoch);

struct RunResult {
  StatsReport stats;
  std::map<NodeId, std::uint64_t> switch_counts;
  std::uint64_t total_hops = 0;
  std::map<std::uint64_t, std::vector<PacketRecord>> delivered;  // by epoch, at the destination
};

/// Installs the plan on a fresh fabric, injects the trace and runs to completion.
RunResult simulate_plan(const DatapathPlan& plan, std::shared_ptr<const Topology> topology,
                        const WorkloadTrace& trace);

struct ComparisonRow {
  std::string name;
  std::string request;
  std::uint64_t flip_total_hops = 0;
  std::uint64_t baseline_total_hops = 0;
  double reduction_pct = 0.0;
  std::map<NodeId, std::uint64_t> flip_switch_counts;
  std::map<NodeId, std::uint64_t> baseline_switch_counts;
  std::set<NodeId> edge_switches;
  std::size_t audited_epochs = 0;
  std::vector<OpPlacement> placements;

  /// Switches carrying traffic in either mode that are not edge switches.
  std::vector<NodeId> non_edge_datapath_switches() const;
};

/// Runs the identical workload through the FLIP plan and the baseline plan.
/// AuditFailure when a delivered value differs from the reference, an epoch
/// is missing or duplicated, or any packet is dropped.
ComparisonRow run_comparison(const NamedRequest& request, std::shared_ptr<const Topology> topology,
                             const CoverageMap& coverage, const Workload& workload, std::uint64_t seed);

struct ExperimentReport {
  std::uint64_t seed = 0;
  Workload workload;
  std::vector<NodeId> switches;
  std::vector<ComparisonRow> rows;
};

ExperimentReport run_suite(std::shared_ptr<const Topology> topology, const std::vector<NamedRequest>& requests,
                           const Workload& workload, std::uint64_t seed);

/// switch,flip_count,baseline_count summed over all requests.
std::string switch_counts_csv(const ExperimentReport& report);
/// request,flip_total_hops,baseline_total_hops,reduction_pct
std::string request_totals_csv(const ExperimentReport& report);
nlohmann::json summary_json(const ExperimentReport& report);
/// Writes switch_counts.csv, request_totals.csv and summary.json into `dir`.
void export_report(const ExperimentReport& report, const std::filesystem::path& dir);

}  // namespace flip
