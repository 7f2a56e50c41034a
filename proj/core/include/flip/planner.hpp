#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "flip/dsl.hpp"
#include "flip/epb.hpp"
#include "flip/flow_rule.hpp"
#include "flip/steiner.hpp"
#include "flip/task_graph.hpp"
#include "flip/topology.hpp"

namespace flip {

struct OpPlacement {
  std::string op;  // task-graph operation name
  NodeId switch_id;
  NodeId engine;

  friend bool operator==(const OpPlacement&, const OpPlacement&) = default;
};

/// One hop of the task graph realized on the network: traffic from `from`
/// (a source or an engine) travels to `to` (an engine or the destination),
/// addressed to `match_destination`.
struct Segment {
  NodeId from;
  NodeId to;
  NodeId match_destination;
  bool from_source = false;           // `from` is a request source
  std::optional<std::size_t> next;    // segment the output continues on
};

enum class PlanMode { Flip, Baseline };

struct DatapathPlan {
  Mode mode = Mode::Automated;
  PlanMode plan_mode = PlanMode::Flip;
  std::string request;  // canonical request text
  std::string user{kDefaultUser};
  NodeId destination;
  std::vector<NodeId> sources;
  std::vector<OpPlacement> placements;
  SteinerTree tree;
  std::vector<FlowRule> rules;
  std::vector<EngineConfig> engine_configs;
  bool admitted = true;
  double worst_path_delay_ms = 0.0;
  std::optional<double> delay_bound_ms;

  nlohmann::json to_json() const;
};

/// Greedy operation placement. Edge operations (all children are sources) are taken
/// left-to-right; each lands on the switch of its leftmost source, then its
/// ancestors are walked upward. An ancestor not yet placed goes to the
/// switch adjacent to the originating edge switch, excluding switches that
/// already hold a placement. PlacementError when no such switch remains.
std::vector<OpPlacement> place_operations(const TaskGraph& graph, const Topology& topology);

/// Task-graph edges mapped to network endpoints for automated plans.
std::vector<Segment> automated_segments(const TaskGraph& graph, const std::vector<OpPlacement>& placements);
/// Sources to the command's engine, then the engine to its destination.
std::vector<Segment> manual_segments(const TaskGraph& graph, const OpPlacement& placement, const Request& request);

struct DelayCheck {
  bool admitted = true;
  double worst_path_delay_ms = 0.0;
};

/// Worst source-to-destination delay along the tree, summed over the
/// segments each source's data traverses.
DelayCheck check_delay(const SteinerTree& tree, const std::vector<Segment>& segments,
                       const Requirements& requirements);

struct CompiledRules {
  std::vector<FlowRule> rules;
  std::vector<EngineConfig> engine_configs;
};

/// Hop-by-hop rules along the tree for every segment, plus one engine
/// config per placed operation. CompileError on inconsistent input.
CompiledRules compile_rules(const std::vector<OpPlacement>& placements, const SteinerTree& tree,
                            const TaskGraph& graph, const Topology& topology, const Request& request);

/// Rules that route each source along its shortest path to the destination.
std::vector<FlowRule> shortest_path_rules(const Topology& topology, const std::vector<NodeId>& sources,
                                          const NodeId& destination);

/// Builds the full plan; `admitted` reports the delay check and nothing
/// is thrown for a failed admission.
DatapathPlan build_plan(const Request& request, const Topology& topology, const CoverageMap& coverage,
                        PlanMode mode = PlanMode::Flip);

/// Like build_plan but throws RejectedByDelay when the plan is not admitted.
DatapathPlan plan(const Request& request, const Topology& topology, const CoverageMap& coverage,
                  PlanMode mode = PlanMode::Flip);

/// Merges rule sets that share (switch, destination, action) and orders
/// them deterministically. CompileError when two rules disagree on the same
/// (switch, destination, source).
std::vector<FlowRule> merge_rules(const std::vector<FlowRule>& rules);

}  // namespace flip
