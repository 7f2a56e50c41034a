#pragma once

#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "flip/node_id.hpp"

namespace flip {

/// Matches any final destination.
inline const NodeId& any_destination() {
  static const NodeId wildcard("*");
  return wildcard;
}

struct FlowMatch {
  NodeId final_destination;
  std::vector<NodeId> sources;  // sorted, unique

  bool matches(const NodeId& destination, const NodeId& source) const;
  friend bool operator==(const FlowMatch&, const FlowMatch&) = default;
};

enum class ActionKind { ForwardTo, RedirectToEngine, Deliver };

struct FlowAction {
  ActionKind kind = ActionKind::Deliver;
  NodeId target;  // next hop or engine; empty for Deliver

  static FlowAction forward_to(NodeId next) { return {ActionKind::ForwardTo, std::move(next)}; }
  static FlowAction redirect_to_engine(NodeId engine) { return {ActionKind::RedirectToEngine, std::move(engine)}; }
  static FlowAction deliver() { return {ActionKind::Deliver, {}}; }

  friend bool operator==(const FlowAction&, const FlowAction&) = default;
};

std::string to_string(const FlowAction& action);

struct FlowRule {
  NodeId switch_id;
  FlowMatch match;
  FlowAction action;

  nlohmann::json to_json() const;
  /// {"switch", "match": {"final_destination", "sources"}, "action": {"type", "target"?}}
  static FlowRule from_json(const nlohmann::json& j);

  friend bool operator==(const FlowRule&, const FlowRule&) = default;
};

/// Sorts and de-duplicates match sources in place.
void normalize(FlowRule& rule);

}  // namespace flip
