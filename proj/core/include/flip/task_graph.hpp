#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "flip/node_id.hpp"

namespace flip {

enum class OpKind { Min, Max, Sum, Sub, Avg, Mul };

std::string_view to_string(OpKind op) noexcept;
std::optional<OpKind> parse_op_kind(std::string_view name) noexcept;
/// Sub and Mul fold left over their operands, so operand order matters.
bool is_order_sensitive(OpKind op) noexcept;

/// Rooted tree form of a request: root = destination, internal nodes =
/// operations, leaves = source nodes. Index 0 is always the root.
class TaskGraph {
 public:
  enum class Kind { Destination, Operation, Source };

  struct Node {
    Kind kind = Kind::Source;
    std::string name;            // "max1", "bs17", "user"
    std::optional<OpKind> op;    // operations only
    NodeId node;                 // sources and the destination
    std::vector<std::size_t> children;
    std::optional<std::size_t> parent;
  };

  explicit TaskGraph(NodeId destination);

  std::size_t add_operation(OpKind op, std::size_t parent);
  std::size_t add_source(NodeId node, std::size_t parent);
  /// Assigns operation names ("max1", "avg2", ... numbered per kind in
  /// breadth-first order) and checks the tree invariants.
  void finalize();

  std::size_t root() const noexcept { return 0; }
  std::size_t size() const noexcept { return nodes_.size(); }
  const Node& node(std::size_t i) const { return nodes_.at(i); }
  const NodeId& destination() const { return nodes_.front().node; }

  /// Operation indices in breadth-first order.
  std::vector<std::size_t> operations() const;
  /// Source indices in left-to-right order.
  std::vector<std::size_t> sources() const;
  std::vector<NodeId> source_nodes() const;
  /// Operations whose children are all sources, left-to-right.
  std::vector<std::size_t> leaf_only_parents() const;
  std::size_t leftmost_child(std::size_t i) const;
  std::optional<std::size_t> find(std::string_view name) const;

  nlohmann::json to_json() const;

 private:
  void preorder(std::size_t i, std::vector<std::size_t>& out) const;

  std::vector<Node> nodes_;
};

}  // namespace flip
