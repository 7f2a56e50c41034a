#include "flip/task_graph.hpp"

#include <deque>
#include <map>

#include <nlohmann/json.hpp>

#include "flip/errors.hpp"

namespace flip {

std::string_view to_string(OpKind op) noexcept {
  switch (op) {
    case OpKind::Min: return "min";
    case OpKind::Max: return "max";
    case OpKind::Sum: return "sum";
    case OpKind::Sub: return "sub";
    case OpKind::Avg: return "avg";
    case OpKind::Mul: return "mul";
  }
  return "?";
}

std::optional<OpKind> parse_op_kind(std::string_view name) noexcept {
  if (name == "min") return OpKind::Min;
  if (name == "max") return OpKind::Max;
  if (name == "sum") return OpKind::Sum;
  if (name == "sub") return OpKind::Sub;
  if (name == "avg") return OpKind::Avg;
  if (name == "mul") return OpKind::Mul;
  return std::nullopt;
}

bool is_order_sensitive(OpKind op) noexcept { return op == OpKind::Sub || op == OpKind::Mul; }

TaskGraph::TaskGraph(NodeId destination) {
  Node root;
  root.kind = Kind::Destination;
  root.name = destination.str();
  root.node = std::move(destination);
  nodes_.push_back(std::move(root));
}

std::size_t TaskGraph::add_operation(OpKind op, std::size_t parent) {
  if (parent >= nodes_.size() || nodes_[parent].kind == Kind::Source) {
    throw ValidationError("operation parent must be the destination or an operation");
  }
  if (parent == root() && !nodes_[root()].children.empty()) {
    throw ValidationError("task graph root takes exactly one operation");
  }
  Node n;
  n.kind = Kind::Operation;
  n.op = op;
  n.parent = parent;
  nodes_.push_back(std::move(n));
  nodes_[parent].children.push_back(nodes_.size() - 1);
  return nodes_.size() - 1;
}

std::size_t TaskGraph::add_source(NodeId node, std::size_t parent) {
  if (parent >= nodes_.size() || nodes_[parent].kind != Kind::Operation) {
    throw ValidationError("sources must hang off an operation");
  }
  Node n;
  n.kind = Kind::Source;
  n.name = node.str();
  n.node = std::move(node);
  n.parent = parent;
  nodes_.push_back(std::move(n));
  nodes_[parent].children.push_back(nodes_.size() - 1);
  return nodes_.size() - 1;
}

void TaskGraph::finalize() {
  if (nodes_[root()].children.size() != 1) {
    throw ValidationError("task graph needs exactly one top-level operation");
  }
  std::map<OpKind, int> counters;
  for (auto i : operations()) {
    auto& n = nodes_[i];
    if (n.children.empty()) throw ArityError("operation " + std::string(to_string(*n.op)) + " has no operands");
    n.name = std::string(to_string(*n.op)) + std::to_string(++counters[*n.op]);
  }
}

std::vector<std::size_t> TaskGraph::operations() const {
  std::vector<std::size_t> out;
  std::deque<std::size_t> queue{root()};
  while (!queue.empty()) {
    auto i = queue.front();
    queue.pop_front();
    if (nodes_[i].kind == Kind::Operation) out.push_back(i);
    for (auto c : nodes_[i].children) queue.push_back(c);
  }
  return out;
}

void TaskGraph::preorder(std::size_t i, std::vector<std::size_t>& out) const {
  out.push_back(i);
  for (auto c : nodes_[i].children) preorder(c, out);
}

std::vector<std::size_t> TaskGraph::sources() const {
  std::vector<std::size_t> order, out;
  preorder(root(), order);
  for (auto i : order) {
    if (nodes_[i].kind == Kind::Source) out.push_back(i);
  }
  return out;
}

std::vector<NodeId> TaskGraph::source_nodes() const {
  std::vector<NodeId> out;
  for (auto i : sources()) out.push_back(nodes_[i].node);
  return out;
}

std::vector<std::size_t> TaskGraph::leaf_only_parents() const {
  std::vector<std::size_t> order, out;
  preorder(root(), order);
  for (auto i : order) {
    const auto& n = nodes_[i];
    if (n.kind != Kind::Operation) continue;
    bool all_leaves = true;
    for (auto c : n.children) all_leaves = all_leaves && nodes_[c].kind == Kind::Source;
    if (all_leaves) out.push_back(i);
  }
  return out;
}

std::size_t TaskGraph::leftmost_child(std::size_t i) const {
  const auto& n = nodes_.at(i);
  if (n.children.empty()) throw NotFound("'" + n.name + "' has no children");
  return n.children.front();
}

std::optional<std::size_t> TaskGraph::find(std::string_view name) const {
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (nodes_[i].name == name) return i;
  }
  return std::nullopt;
}

nlohmann::json TaskGraph::to_json() const {
  auto dump = [this](auto&& self, std::size_t i) -> nlohmann::json {
    const auto& n = nodes_[i];
    if (n.kind == Kind::Source) return n.node.str();
    nlohmann::json children = nlohmann::json::array();
    for (auto c : n.children) children.push_back(self(self, c));
    if (n.kind == Kind::Destination) return {{"destination", n.node.str()}, {"children", children}};
    return {{"op", n.name}, {"children", children}};
  };
  return dump(dump, root());
}

}  // namespace flip
