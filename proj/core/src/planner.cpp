#include "flip/planner.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <tuple>

#include <nlohmann/json.hpp>

#include "flip/errors.hpp"

namespace flip {

using json = nlohmann::json;

namespace {

const OpPlacement& placement_of(const std::vector<OpPlacement>& placements, const std::string& op) {
  for (const auto& p : placements) {
    if (p.op == op) return p;
  }
  throw CompileError("operation '" + op + "' has no placement");
}

std::string mode_name(Mode m) { return m == Mode::Automated ? "automated" : "manual"; }
std::string plan_mode_name(PlanMode m) { return m == PlanMode::Flip ? "flip" : "baseline"; }

// Hop-by-hop rules carrying traffic from path.front() to path.back().
void rules_along(const Topology& topology, const std::vector<NodeId>& path, const NodeId& source,
                 const NodeId& match_destination, std::vector<FlowRule>& out) {
  if (path.size() < 3) {
    throw CompileError("no switch between '" + path.front().str() + "' and '" + path.back().str() + "'");
  }
  const NodeId& end = path.back();
  for (std::size_t i = 1; i + 1 < path.size(); ++i) {
    const NodeId& sw = path[i];
    if (topology.kind(sw) != NodeKind::Switch) {
      throw CompileError("path from '" + path.front().str() + "' transits non-switch '" + sw.str() + "'");
    }
    FlowRule r;
    r.switch_id = sw;
    r.match.final_destination = match_destination;
    r.match.sources = {source};
    if (i + 2 < path.size()) {
      r.action = FlowAction::forward_to(path[i + 1]);
    } else if (topology.kind(end) == NodeKind::Engine) {
      r.action = FlowAction::redirect_to_engine(end);
    } else {
      if (match_destination != end) {
        throw CompileError("segment ends at '" + end.str() + "' but is addressed to '" + match_destination.str() + "'");
      }
      r.action = FlowAction::deliver();
    }
    out.push_back(std::move(r));
  }
}

void check_engine_configs(const std::vector<EngineConfig>& configs) {
  std::map<std::tuple<NodeId, std::string, NodeId>, const EngineConfig*> by_triple;
  std::map<std::tuple<NodeId, std::string, NodeId>, const EngineConfig*> by_source;
  for (const auto& c : configs) {
    try {
      c.validate();
    } catch (const ValidationError& e) {
      throw CompileError("engine '" + c.engine.str() + "': " + e.what());
    }
    if (!by_triple.emplace(std::tuple{c.engine, c.user, c.destination}, &c).second) {
      throw CompileError("two operations on '" + c.engine.str() + "' send to '" + c.destination.str() + "'");
    }
    for (const auto& s : c.sources) {
      if (!by_source.emplace(std::tuple{c.engine, c.user, s}, &c).second) {
        throw CompileError("two operations on '" + c.engine.str() + "' consume '" + s.str() + "'");
      }
    }
  }
}

}  // namespace

std::vector<OpPlacement> place_operations(const TaskGraph& graph, const Topology& topology) {
  std::map<std::size_t, NodeId> switch_of;
  std::set<NodeId> occupied;
  std::set<std::size_t> visited;
  for (auto node : graph.leaf_only_parents()) {
    const NodeId& leaf = graph.node(graph.leftmost_child(node)).node;
    NodeId edge_switch;
    try {
      edge_switch = topology.connected_switch(leaf);
    } catch (const NotFound& e) {
      throw PlacementError(e.what());
    }
    switch_of[node] = edge_switch;
    occupied.insert(edge_switch);
    visited.insert(node);
    auto parent = graph.node(node).parent;
    while (parent && graph.node(*parent).kind == TaskGraph::Kind::Operation) {
      if (!visited.insert(*parent).second) break;
      try {
        switch_of[*parent] = topology.adjacent_switch(edge_switch, occupied);
      } catch (const NotFound&) {
        throw PlacementError("no free switch adjacent to '" + edge_switch.str() + "' for '" +
                             graph.node(*parent).name + "'");
      }
      occupied.insert(switch_of[*parent]);
      parent = graph.node(*parent).parent;
    }
  }
  std::vector<OpPlacement> out;
  for (auto op : graph.operations()) {
    auto it = switch_of.find(op);
    if (it == switch_of.end()) throw PlacementError("operation '" + graph.node(op).name + "' was not placed");
    auto engine = topology.engine_of(it->second);
    if (!engine) throw PlacementError("switch '" + it->second.str() + "' has no engine");
    out.push_back(OpPlacement{graph.node(op).name, it->second, *engine});
  }
  return out;
}

std::vector<Segment> automated_segments(const TaskGraph& graph, const std::vector<OpPlacement>& placements) {
  const NodeId& dest = graph.destination();
  std::vector<Segment> out;
  std::map<std::size_t, std::size_t> output_segment;  // op -> its outgoing segment
  const auto ops = graph.operations();
  for (auto op : ops) {
    const auto& n = graph.node(op);
    const NodeId& engine = placement_of(placements, n.name).engine;
    const auto& parent = graph.node(*n.parent);
    if (parent.kind == TaskGraph::Kind::Operation) {
      const NodeId& up = placement_of(placements, parent.name).engine;
      out.push_back(Segment{engine, up, up, false, std::nullopt});
    } else {
      out.push_back(Segment{engine, dest, dest, false, std::nullopt});
    }
    output_segment[op] = out.size() - 1;
  }
  for (auto op : ops) {
    const auto& n = graph.node(op);
    if (graph.node(*n.parent).kind == TaskGraph::Kind::Operation) {
      out[output_segment[op]].next = output_segment.at(*n.parent);
    }
  }
  for (auto op : ops) {
    const auto& n = graph.node(op);
    const NodeId& engine = placement_of(placements, n.name).engine;
    for (auto c : n.children) {
      const auto& child = graph.node(c);
      if (child.kind != TaskGraph::Kind::Source) continue;
      out.push_back(Segment{child.node, engine, dest, true, output_segment[op]});
    }
  }
  return out;
}

std::vector<Segment> manual_segments(const TaskGraph& graph, const OpPlacement& placement, const Request& request) {
  const NodeId& dest = graph.destination();
  const NodeId leaf_destination =
      request.destination.kind == SourceTerm::Kind::Engine ? any_destination() : dest;
  std::vector<Segment> out;
  out.push_back(Segment{placement.engine, dest, dest, false, std::nullopt});
  for (const auto& s : graph.source_nodes()) {
    out.push_back(Segment{s, placement.engine, leaf_destination, true, 0});
  }
  return out;
}

DelayCheck check_delay(const SteinerTree& tree, const std::vector<Segment>& segments,
                       const Requirements& requirements) {
  std::vector<double> delay(segments.size());
  for (std::size_t i = 0; i < segments.size(); ++i) {
    delay[i] = tree.path(segments[i].from, segments[i].to).delay_ms;
  }
  DelayCheck out;
  for (std::size_t i = 0; i < segments.size(); ++i) {
    if (!segments[i].from_source) continue;
    double total = 0.0;
    std::optional<std::size_t> cur = i;
    std::size_t guard = 0;
    while (cur) {
      if (++guard > segments.size()) throw CompileError("segment chain does not terminate");
      total += delay[*cur];
      cur = segments[*cur].next;
    }
    out.worst_path_delay_ms = std::max(out.worst_path_delay_ms, total);
  }
  out.admitted = !requirements.delay_ms || out.worst_path_delay_ms <= *requirements.delay_ms;
  return out;
}

std::vector<FlowRule> merge_rules(const std::vector<FlowRule>& rules) {
  std::map<std::tuple<NodeId, NodeId, NodeId>, FlowAction> action_of;
  for (const auto& r : rules) {
    for (const auto& s : r.match.sources) {
      auto [it, inserted] = action_of.emplace(std::tuple{r.switch_id, r.match.final_destination, s}, r.action);
      if (!inserted && !(it->second == r.action)) {
        throw CompileError("conflicting actions on '" + r.switch_id.str() + "' for traffic from '" + s.str() +
                           "' to '" + r.match.final_destination.str() + "': " + to_string(it->second) + " vs " +
                           to_string(r.action));
      }
    }
  }
  using GroupKey = std::tuple<NodeId, bool, NodeId, int, NodeId>;
  std::map<GroupKey, std::vector<NodeId>> groups;
  for (const auto& [key, action] : action_of) {
    const auto& [sw, dest, src] = key;
    groups[GroupKey{sw, dest == any_destination(), dest, static_cast<int>(action.kind), action.target}].push_back(src);
  }
  std::vector<FlowRule> out;
  for (auto& [key, sources] : groups) {
    const auto& [sw, wildcard, dest, kind, target] = key;
    FlowRule r;
    r.switch_id = sw;
    r.match.final_destination = dest;
    r.match.sources = std::move(sources);
    r.action = FlowAction{static_cast<ActionKind>(kind), target};
    normalize(r);
    out.push_back(std::move(r));
  }
  return out;
}

CompiledRules compile_rules(const std::vector<OpPlacement>& placements, const SteinerTree& tree,
                            const TaskGraph& graph, const Topology& topology, const Request& request) {
  CompiledRules out;
  std::vector<Segment> segments;
  if (request.mode == Mode::Automated) {
    segments = automated_segments(graph, placements);
  } else {
    if (placements.size() != 1) throw CompileError("manual plan needs exactly one placement");
    segments = manual_segments(graph, placements.front(), request);
  }
  std::vector<FlowRule> raw;
  for (const auto& seg : segments) {
    if (seg.from == seg.to) continue;
    rules_along(topology, tree.path(seg.from, seg.to).nodes, seg.from, seg.match_destination, raw);
  }
  out.rules = merge_rules(raw);

  for (auto op : graph.operations()) {
    const auto& n = graph.node(op);
    const auto& placement = placement_of(placements, n.name);
    EngineConfig cfg;
    cfg.engine = placement.engine;
    cfg.user = request.user;
    cfg.compute = *n.op;
    for (auto c : n.children) {
      const auto& child = graph.node(c);
      cfg.sources.push_back(child.kind == TaskGraph::Kind::Source ? child.node
                                                                  : placement_of(placements, child.name).engine);
    }
    const auto& parent = graph.node(*n.parent);
    cfg.destination =
        parent.kind == TaskGraph::Kind::Operation ? placement_of(placements, parent.name).engine : graph.destination();
    cfg.rate_ms = request.requirements.rate_ms;
    cfg.jitter_ms = request.requirements.jitter_ms;
    out.engine_configs.push_back(std::move(cfg));
  }
  check_engine_configs(out.engine_configs);
  return out;
}

std::vector<FlowRule> shortest_path_rules(const Topology& topology, const std::vector<NodeId>& sources,
                                          const NodeId& destination) {
  const auto to_dest = topology.distances_from(topology.index_of(destination));
  std::vector<FlowRule> raw;
  for (const auto& s : sources) {
    auto path = topology.path_to_source(topology.index_of(s), to_dest);
    rules_along(topology, path.nodes, s, destination, raw);
  }
  return merge_rules(raw);
}

namespace {

OpPlacement manual_placement(const TaskGraph& graph, const Topology& topology, const Request& request) {
  const NodeId& sw = *request.switch_id;
  if (!topology.contains(sw) || topology.kind(sw) != NodeKind::Switch) {
    throw UnknownSwitch("'" + sw.str() + "' is not a switch");
  }
  auto engine = topology.engine_of(sw);
  if (!engine) throw PlacementError("switch '" + sw.str() + "' has no engine");
  if (*engine == graph.destination()) throw ValidationError("a command cannot send to its own engine");
  return OpPlacement{graph.node(graph.operations().front()).name, sw, *engine};
}

}  // namespace

DatapathPlan build_plan(const Request& request, const Topology& topology, const CoverageMap& coverage,
                        PlanMode mode) {
  auto graph = expand_sources(request, topology, coverage);
  DatapathPlan plan;
  plan.mode = request.mode;
  plan.plan_mode = mode;
  plan.request = to_canonical_string(request);
  plan.user = request.user;
  plan.destination = graph.destination();
  plan.sources = graph.source_nodes();
  plan.delay_bound_ms = request.requirements.delay_ms;

  if (mode == PlanMode::Baseline) {
    if (request.mode == Mode::Manual) throw Unsupported("baseline mode has no engines for datapath_m");
    const auto to_dest = topology.distances_from(topology.index_of(plan.destination));
    std::set<std::pair<NodeId, NodeId>> seen;
    std::vector<Link> edges;
    for (const auto& s : plan.sources) {
      auto path = topology.path_to_source(topology.index_of(s), to_dest);
      plan.worst_path_delay_ms = std::max(plan.worst_path_delay_ms, path.delay_ms);
      for (std::size_t i = 0; i + 1 < path.nodes.size(); ++i) {
        auto key = std::minmax(path.nodes[i], path.nodes[i + 1]);
        if (seen.insert(key).second) edges.push_back(Link{key.first, key.second, *topology.link_delay(key.first, key.second)});
      }
    }
    std::vector<NodeId> terminals = plan.sources;
    terminals.push_back(plan.destination);
    plan.tree = SteinerTree(std::move(terminals), std::move(edges));
    plan.rules = shortest_path_rules(topology, plan.sources, plan.destination);
    plan.admitted = !plan.delay_bound_ms || plan.worst_path_delay_ms <= *plan.delay_bound_ms;
    return plan;
  }

  std::vector<Segment> segments;
  std::vector<NodeId> terminals = plan.sources;
  terminals.push_back(plan.destination);
  if (request.mode == Mode::Automated) {
    plan.placements = place_operations(graph, topology);
    segments = automated_segments(graph, plan.placements);
  } else {
    plan.placements = {manual_placement(graph, topology, request)};
    segments = manual_segments(graph, plan.placements.front(), request);
  }
  for (const auto& p : plan.placements) {
    terminals.push_back(p.switch_id);
    terminals.push_back(p.engine);
  }
  plan.tree = steiner_tree(topology, terminals);
  auto delay = check_delay(plan.tree, segments, request.requirements);
  plan.admitted = delay.admitted;
  plan.worst_path_delay_ms = delay.worst_path_delay_ms;
  auto compiled = compile_rules(plan.placements, plan.tree, graph, topology, request);
  plan.rules = std::move(compiled.rules);
  plan.engine_configs = std::move(compiled.engine_configs);
  return plan;
}

DatapathPlan plan(const Request& request, const Topology& topology, const CoverageMap& coverage, PlanMode mode) {
  auto p = build_plan(request, topology, coverage, mode);
  if (!p.admitted) throw RejectedByDelay(p.worst_path_delay_ms, *p.delay_bound_ms);
  return p;
}

json DatapathPlan::to_json() const {
  json placements_json = json::array();
  for (const auto& p : placements) {
    placements_json.push_back({{"op", p.op}, {"switch", p.switch_id.str()}, {"engine", p.engine.str()}});
  }
  json rules_json = json::array();
  for (const auto& r : rules) rules_json.push_back(r.to_json());
  json configs_json = json::array();
  for (const auto& c : engine_configs) {
    json body = c.to_json();
    body["engine"] = c.engine.str();
    body["user"] = c.user;
    configs_json.push_back(std::move(body));
  }
  json sources_json = json::array();
  for (const auto& s : sources) sources_json.push_back(s.str());
  return {{"mode", mode_name(mode)},
          {"plan_mode", plan_mode_name(plan_mode)},
          {"request", request},
          {"user", user},
          {"destination", destination.str()},
          {"sources", std::move(sources_json)},
          {"placements", std::move(placements_json)},
          {"tree", tree.to_json()},
          {"rules", std::move(rules_json)},
          {"engine_configs", std::move(configs_json)},
          {"admitted", admitted},
          {"worst_path_delay_ms", worst_path_delay_ms},
          {"delay_bound_ms", delay_bound_ms ? json(*delay_bound_ms) : json(nullptr)}};
}

}  // namespace flip
