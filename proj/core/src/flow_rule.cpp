#include "flip/flow_rule.hpp"

#include <algorithm>

#include <nlohmann/json.hpp>

#include "flip/errors.hpp"

namespace flip {

using json = nlohmann::json;

bool FlowMatch::matches(const NodeId& destination, const NodeId& source) const {
  if (final_destination != any_destination() && final_destination != destination) return false;
  return std::binary_search(sources.begin(), sources.end(), source);
}

std::string to_string(const FlowAction& action) {
  switch (action.kind) {
    case ActionKind::ForwardTo: return "forward:" + action.target.str();
    case ActionKind::RedirectToEngine: return "redirect:" + action.target.str();
    case ActionKind::Deliver: return "deliver";
  }
  return "?";
}

json FlowRule::to_json() const {
  json sources = json::array();
  for (const auto& s : match.sources) sources.push_back(s.str());
  json action_json;
  switch (action.kind) {
    case ActionKind::ForwardTo: action_json = {{"type", "forward"}, {"target", action.target.str()}}; break;
    case ActionKind::RedirectToEngine: action_json = {{"type", "redirect"}, {"target", action.target.str()}}; break;
    case ActionKind::Deliver: action_json = {{"type", "deliver"}}; break;
  }
  return {{"switch", switch_id.str()},
          {"match", {{"final_destination", match.final_destination.str()}, {"sources", std::move(sources)}}},
          {"action", std::move(action_json)}};
}

FlowRule FlowRule::from_json(const json& j) {
  FlowRule r;
  try {
    r.switch_id = NodeId(j.at("switch").get<std::string>());
    const auto& m = j.at("match");
    r.match.final_destination = NodeId(m.value("final_destination", std::string("*")));
    for (const auto& s : m.at("sources")) r.match.sources.emplace_back(s.get<std::string>());
    const auto& a = j.at("action");
    const auto type = a.at("type").get<std::string>();
    if (type == "forward") {
      r.action = FlowAction::forward_to(NodeId(a.at("target").get<std::string>()));
    } else if (type == "redirect") {
      r.action = FlowAction::redirect_to_engine(NodeId(a.at("target").get<std::string>()));
    } else if (type == "deliver") {
      r.action = FlowAction::deliver();
    } else {
      throw ValidationError("unknown action type '" + type + "'");
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("flow rule: ") + e.what());
  }
  if (r.match.sources.empty()) throw ValidationError("flow rule needs at least one source");
  normalize(r);
  return r;
}

void normalize(FlowRule& rule) {
  auto& s = rule.match.sources;
  std::sort(s.begin(), s.end());
  s.erase(std::unique(s.begin(), s.end()), s.end());
}

}  // namespace flip
