#pragma once

#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "flip/node_id.hpp"
#include "flip/topology.hpp"

namespace flip {

/// Subtree of the topology spanning a terminal set. Edges are stored with
/// a < b and sorted; vertices are sorted.
class SteinerTree {
 public:
  SteinerTree() = default;
  SteinerTree(std::vector<NodeId> terminals, std::vector<Link> edges);

  const std::vector<NodeId>& terminals() const noexcept { return terminals_; }
  const std::vector<Link>& edges() const noexcept { return edges_; }
  std::vector<NodeId> vertices() const;
  double weight() const noexcept;
  bool contains(const NodeId& v) const;

  /// True when the edges form a single tree that touches every terminal.
  bool is_tree_spanning_terminals() const;

  /// The unique tree path a → b. CompileError when the tree does not join them.
  Path path(const NodeId& a, const NodeId& b) const;

  nlohmann::json to_json() const;

 private:
  std::vector<NodeId> terminals_;
  std::vector<Link> edges_;
};

/// Metric-closure approximation: MST over the terminals' shortest-path
/// closure, expanded to paths, re-spanned and pruned of non-terminal leaves.
/// Weight is at most (2 - 2/|terminals|) times the optimum.
SteinerTree steiner_tree(const Topology& topology, const std::vector<NodeId>& terminals);

}  // namespace flip
