#pragma once

#include <cstddef>
#include <filesystem>
#include <limits>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "flip/node_id.hpp"

namespace flip {

enum class NodeKind { BaseStation, Switch, Engine, Destination, Cloud };

std::string_view to_string(NodeKind kind) noexcept;
/// Accepts "basestation", "switch", "engine", "destination", "cloud".
NodeKind parse_node_kind(std::string_view text);

/// Undirected link; delay is the link weight used for planning and simulation.
struct Link {
  NodeId a;
  NodeId b;
  double delay_ms = 1.0;
};

struct Path {
  std::vector<NodeId> nodes;
  double delay_ms = 0.0;
};

/// Single-source distances with (delay, hop count) as the lexicographic key.
/// Only switches relay traffic, so non-switch nodes are never expanded
/// (except the source itself).
struct DistanceMap {
  std::size_t source = 0;
  std::vector<double> delay;
  std::vector<std::size_t> hops;

  static constexpr double kUnreachable = std::numeric_limits<double>::infinity();
  bool reachable(std::size_t i) const { return delay[i] != kUnreachable; }
};

/// Immutable weighted network graph N = (V, E, w). Construct through
/// `Topology::build` or `load_topology`; both validate every invariant.
class Topology {
 public:
  struct Adjacent {
    std::size_t index;
    double delay_ms;
  };

  static constexpr double kDefaultLinkDelayMs = 1.0;
  static constexpr double kDefaultEngineDelayMs = 0.0;

  static Topology build(std::vector<std::pair<NodeId, NodeKind>> nodes, std::vector<Link> links);

  std::size_t size() const noexcept { return ids_.size(); }
  bool contains(const NodeId& id) const;
  NodeKind kind(const NodeId& id) const;
  NodeKind kind(std::size_t index) const { return kinds_[index]; }
  bool is_switch(std::size_t index) const { return kinds_[index] == NodeKind::Switch; }

  std::size_t index_of(const NodeId& id) const;
  const NodeId& id(std::size_t index) const { return ids_[index]; }

  /// All node ids in lexicographic order.
  const std::vector<NodeId>& nodes() const noexcept { return ids_; }
  std::vector<NodeId> nodes_of_kind(NodeKind kind) const;
  const std::vector<Link>& links() const noexcept { return links_; }

  /// Neighbors sorted by node id.
  std::span<const Adjacent> adjacency(std::size_t index) const { return adjacency_[index]; }
  std::vector<NodeId> neighbors(const NodeId& id) const;
  std::optional<double> link_delay(const NodeId& a, const NodeId& b) const;
  bool adjacent(const NodeId& a, const NodeId& b) const { return link_delay(a, b).has_value(); }

  /// The unique switch a base station or engine hangs off. NotFound otherwise.
  NodeId connected_switch(const NodeId& node) const;

  /// Switch adjacent to `sw` and not in `visited`: minimum link delay, ties to
  /// the lexicographically smallest id. NotFound when none remains.
  NodeId adjacent_switch(const NodeId& sw, const std::set<NodeId>& visited) const;

  /// The engine attached to a switch, if any.
  std::optional<NodeId> engine_of(const NodeId& sw) const;

  DistanceMap distances_from(std::size_t source) const;

  /// Minimum-delay path; ties by fewer hops, then lexicographically smallest
  /// node sequence. Intermediate nodes are always switches.
  Path shortest_path(const NodeId& a, const NodeId& b) const;

  /// Reconstructs the tie-broken path from `from` to the source of `to_target`.
  Path path_to_source(std::size_t from, const DistanceMap& to_target) const;

  nlohmann::json to_json() const;

 private:
  Topology() = default;

  std::vector<NodeId> ids_;
  std::vector<NodeKind> kinds_;
  std::unordered_map<NodeId, std::size_t> index_;
  std::vector<std::vector<Adjacent>> adjacency_;
  std::vector<Link> links_;
  std::unordered_map<NodeId, NodeId> engine_by_switch_;
};

/// Parses and validates a topology document:
///   {"nodes": [{"id", "kind", "switch"?, "delay_ms"?, "engine"?} |
///              {"range": "bs1:bs10", "kind": "basestation", "switch", "delay_ms"?}],
///    "links": [{"a", "b", "delay_ms"?}], "engine_delay_ms"?}
/// Every switch gets an engine "e-<switch>" unless it sets "engine": false or
/// an explicit engine node names it.
Topology load_topology(const nlohmann::json& document);
Topology load_topology_text(std::string_view text);
Topology load_topology_file(const std::filesystem::path& path);

/// Expands "bs1:bs10" (or "bs1:10") into bs1..bs10. EmptyRange when start > end.
std::vector<NodeId> expand_id_range(std::string_view first, std::string_view last);

}  // namespace flip
