#include "flip/topology.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <queue>
#include <sstream>
#include <tuple>

#include <nlohmann/json.hpp>

#include "flip/errors.hpp"

namespace flip {

namespace {

using json = nlohmann::json;

bool nearly_equal(double a, double b) {
  return std::fabs(a - b) <= 1e-9 * std::max(1.0, std::fabs(b));
}

std::pair<std::string_view, std::optional<long long>> split_numeric_suffix(std::string_view s) {
  std::size_t pos = s.size();
  while (pos > 0 && std::isdigit(static_cast<unsigned char>(s[pos - 1]))) --pos;
  if (pos == s.size()) return {s, std::nullopt};
  long long value = 0;
  auto [ptr, ec] = std::from_chars(s.data() + pos, s.data() + s.size(), value);
  if (ec != std::errc{}) return {s, std::nullopt};
  return {s.substr(0, pos), value};
}

const json& require(const json& object, const char* key, std::string_view where) {
  auto it = object.find(key);
  if (it == object.end()) {
    throw ParseError(std::string(where) + ": missing key '" + key + "'");
  }
  return *it;
}

std::string require_string(const json& object, const char* key, std::string_view where) {
  const json& v = require(object, key, where);
  if (!v.is_string()) throw ParseError(std::string(where) + ": '" + key + "' must be a string");
  return v.get<std::string>();
}

double optional_delay(const json& object, double fallback, std::string_view where) {
  auto it = object.find("delay_ms");
  if (it == object.end() || it->is_null()) return fallback;
  if (!it->is_number()) throw ParseError(std::string(where) + ": 'delay_ms' must be a number");
  return it->get<double>();
}

}  // namespace

std::string_view to_string(NodeKind kind) noexcept {
  switch (kind) {
    case NodeKind::BaseStation: return "basestation";
    case NodeKind::Switch: return "switch";
    case NodeKind::Engine: return "engine";
    case NodeKind::Destination: return "destination";
    case NodeKind::Cloud: return "cloud";
  }
  return "unknown";
}

NodeKind parse_node_kind(std::string_view text) {
  if (text == "basestation" || text == "base_station") return NodeKind::BaseStation;
  if (text == "switch") return NodeKind::Switch;
  if (text == "engine") return NodeKind::Engine;
  if (text == "destination") return NodeKind::Destination;
  if (text == "cloud") return NodeKind::Cloud;
  throw ParseError("unknown node kind '" + std::string(text) + "'");
}

std::vector<NodeId> expand_id_range(std::string_view first, std::string_view last) {
  auto [prefix_a, num_a] = split_numeric_suffix(first);
  auto [prefix_b, num_b] = split_numeric_suffix(last);
  if (!num_a || !num_b) {
    throw ValidationError("range '" + std::string(first) + ":" + std::string(last) +
                          "' endpoints need numeric suffixes");
  }
  if (prefix_b.empty()) prefix_b = prefix_a;
  if (prefix_a != prefix_b) {
    throw ValidationError("range '" + std::string(first) + ":" + std::string(last) +
                          "' mixes prefixes");
  }
  if (*num_a > *num_b) {
    throw EmptyRange("range '" + std::string(first) + ":" + std::string(last) + "' is empty");
  }
  std::vector<NodeId> out;
  out.reserve(static_cast<std::size_t>(*num_b - *num_a + 1));
  for (long long i = *num_a; i <= *num_b; ++i) {
    out.emplace_back(std::string(prefix_a) + std::to_string(i));
  }
  return out;
}

Topology Topology::build(std::vector<std::pair<NodeId, NodeKind>> nodes, std::vector<Link> links) {
  if (nodes.empty()) throw ValidationError("topology has no nodes");
  std::sort(nodes.begin(), nodes.end(),
            [](const auto& x, const auto& y) { return x.first < y.first; });

  Topology t;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const auto& [id, kind] = nodes[i];
    if (!is_valid_node_id(id.str())) throw ValidationError("invalid node id '" + id.str() + "'");
    if (i > 0 && nodes[i - 1].first == id) throw ValidationError("duplicate node id '" + id.str() + "'");
    t.index_.emplace(id, i);
    t.ids_.push_back(id);
    t.kinds_.push_back(kind);
  }
  t.adjacency_.resize(t.ids_.size());

  std::set<std::pair<std::size_t, std::size_t>> seen;
  for (auto& link : links) {
    auto ia = t.index_.find(link.a);
    auto ib = t.index_.find(link.b);
    if (ia == t.index_.end() || ib == t.index_.end()) {
      const NodeId& missing = ia == t.index_.end() ? link.a : link.b;
      throw ValidationError("link references undeclared node '" + missing.str() + "'");
    }
    if (link.a == link.b) throw ValidationError("self-loop on '" + link.a.str() + "'");
    if (!std::isfinite(link.delay_ms) || link.delay_ms < 0.0) {
      throw ValidationError("link " + link.a.str() + "-" + link.b.str() + " has invalid delay");
    }
    auto key = std::minmax(ia->second, ib->second);
    if (!seen.insert(key).second) {
      throw ValidationError("duplicate link " + link.a.str() + "-" + link.b.str());
    }
    if (link.b < link.a) std::swap(link.a, link.b);
    t.adjacency_[ia->second].push_back({ib->second, link.delay_ms});
    t.adjacency_[ib->second].push_back({ia->second, link.delay_ms});
  }
  for (auto& adj : t.adjacency_) {
    std::sort(adj.begin(), adj.end(), [](const Adjacent& x, const Adjacent& y) { return x.index < y.index; });
  }
  std::sort(links.begin(), links.end(), [](const Link& x, const Link& y) {
    return std::tie(x.a, x.b) < std::tie(y.a, y.b);
  });
  t.links_ = std::move(links);

  for (std::size_t i = 0; i < t.ids_.size(); ++i) {
    const auto kind = t.kinds_[i];
    if (kind != NodeKind::BaseStation && kind != NodeKind::Engine) continue;
    const auto& adj = t.adjacency_[i];
    if (adj.size() != 1 || t.kinds_[adj.front().index] != NodeKind::Switch) {
      throw ValidationError(std::string(to_string(kind)) + " '" + t.ids_[i].str() +
                            "' must connect to exactly one switch and nothing else");
    }
    if (kind == NodeKind::Engine) {
      const NodeId& sw = t.ids_[adj.front().index];
      if (!t.engine_by_switch_.emplace(sw, t.ids_[i]).second) {
        throw ValidationError("switch '" + sw.str() + "' has more than one engine");
      }
    }
  }

  std::vector<bool> reached(t.ids_.size(), false);
  std::vector<std::size_t> stack{0};
  reached[0] = true;
  std::size_t count = 1;
  while (!stack.empty()) {
    auto cur = stack.back();
    stack.pop_back();
    for (const auto& n : t.adjacency_[cur]) {
      if (!reached[n.index]) {
        reached[n.index] = true;
        ++count;
        stack.push_back(n.index);
      }
    }
  }
  if (count != t.ids_.size()) {
    auto it = std::find(reached.begin(), reached.end(), false);
    throw ValidationError("topology is disconnected ('" +
                          t.ids_[static_cast<std::size_t>(it - reached.begin())].str() +
                          "' unreachable)");
  }
  return t;
}

bool Topology::contains(const NodeId& id) const { return index_.count(id) != 0; }

std::size_t Topology::index_of(const NodeId& id) const {
  auto it = index_.find(id);
  if (it == index_.end()) throw NotFound("unknown node '" + id.str() + "'");
  return it->second;
}

NodeKind Topology::kind(const NodeId& id) const { return kinds_[index_of(id)]; }

std::vector<NodeId> Topology::nodes_of_kind(NodeKind kind) const {
  std::vector<NodeId> out;
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    if (kinds_[i] == kind) out.push_back(ids_[i]);
  }
  return out;
}

std::vector<NodeId> Topology::neighbors(const NodeId& id) const {
  std::vector<NodeId> out;
  for (const auto& n : adjacency_[index_of(id)]) out.push_back(ids_[n.index]);
  return out;
}

std::optional<double> Topology::link_delay(const NodeId& a, const NodeId& b) const {
  auto ia = index_.find(a);
  auto ib = index_.find(b);
  if (ia == index_.end() || ib == index_.end()) return std::nullopt;
  const auto& adj = adjacency_[ia->second];
  auto it = std::lower_bound(adj.begin(), adj.end(), ib->second,
                             [](const Adjacent& x, std::size_t v) { return x.index < v; });
  if (it == adj.end() || it->index != ib->second) return std::nullopt;
  return it->delay_ms;
}

NodeId Topology::connected_switch(const NodeId& node) const {
  const auto i = index_of(node);
  if (kinds_[i] != NodeKind::BaseStation && kinds_[i] != NodeKind::Engine) {
    throw NotFound("'" + node.str() + "' is not a base station or engine");
  }
  for (const auto& n : adjacency_[i]) {
    if (kinds_[n.index] == NodeKind::Switch) return ids_[n.index];
  }
  throw NotFound("'" + node.str() + "' has no switch neighbor");
}

NodeId Topology::adjacent_switch(const NodeId& sw, const std::set<NodeId>& visited) const {
  const auto i = index_of(sw);
  if (kinds_[i] != NodeKind::Switch) throw NotFound("'" + sw.str() + "' is not a switch");
  const Adjacent* best = nullptr;
  for (const auto& n : adjacency_[i]) {
    if (kinds_[n.index] != NodeKind::Switch || visited.count(ids_[n.index])) continue;
    // Adjacency is id-sorted, so strict < keeps the smallest id on ties.
    if (best == nullptr || n.delay_ms < best->delay_ms) best = &n;
  }
  if (best == nullptr) throw NotFound("no unvisited switch adjacent to '" + sw.str() + "'");
  return ids_[best->index];
}

std::optional<NodeId> Topology::engine_of(const NodeId& sw) const {
  auto it = engine_by_switch_.find(sw);
  if (it == engine_by_switch_.end()) return std::nullopt;
  return it->second;
}

DistanceMap Topology::distances_from(std::size_t source) const {
  DistanceMap dm;
  dm.source = source;
  dm.delay.assign(ids_.size(), DistanceMap::kUnreachable);
  dm.hops.assign(ids_.size(), std::numeric_limits<std::size_t>::max());
  using Entry = std::tuple<double, std::size_t, std::size_t>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> queue;
  dm.delay[source] = 0.0;
  dm.hops[source] = 0;
  queue.emplace(0.0, 0, source);
  std::vector<bool> done(ids_.size(), false);
  while (!queue.empty()) {
    auto [d, h, u] = queue.top();
    queue.pop();
    if (done[u]) continue;
    done[u] = true;
    if (u != source && kinds_[u] != NodeKind::Switch) continue;
    for (const auto& n : adjacency_[u]) {
      const double nd = d + n.delay_ms;
      const std::size_t nh = h + 1;
      if (std::tie(nd, nh) < std::tie(dm.delay[n.index], dm.hops[n.index])) {
        dm.delay[n.index] = nd;
        dm.hops[n.index] = nh;
        queue.emplace(nd, nh, n.index);
      }
    }
  }
  return dm;
}

Path Topology::path_to_source(std::size_t from, const DistanceMap& to_target) const {
  if (!to_target.reachable(from)) {
    throw NotFound("no path from '" + ids_[from].str() + "' to '" + ids_[to_target.source].str() + "'");
  }
  Path path;
  path.delay_ms = to_target.delay[from];
  path.nodes.push_back(ids_[from]);
  std::size_t cur = from;
  while (cur != to_target.source) {
    std::optional<std::size_t> next;
    for (const auto& n : adjacency_[cur]) {
      if (n.index != to_target.source && kinds_[n.index] != NodeKind::Switch) continue;
      if (!to_target.reachable(n.index) || to_target.hops[n.index] + 1 != to_target.hops[cur]) continue;
      if (!nearly_equal(to_target.delay[n.index] + n.delay_ms, to_target.delay[cur])) continue;
      next = n.index;
      break;
    }
    if (!next) throw NotFound("path reconstruction failed at '" + ids_[cur].str() + "'");
    cur = *next;
    path.nodes.push_back(ids_[cur]);
  }
  return path;
}

Path Topology::shortest_path(const NodeId& a, const NodeId& b) const {
  const auto ia = index_of(a);
  const auto ib = index_of(b);
  if (ia == ib) return Path{{a}, 0.0};
  return path_to_source(ia, distances_from(ib));
}

json Topology::to_json() const {
  json nodes = json::array();
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    json n{{"id", ids_[i].str()}, {"kind", std::string(to_string(kinds_[i]))}};
    if (kinds_[i] == NodeKind::Switch) n["engine"] = false;
    nodes.push_back(std::move(n));
  }
  json links = json::array();
  for (const auto& l : links_) {
    links.push_back({{"a", l.a.str()}, {"b", l.b.str()}, {"delay_ms", l.delay_ms}});
  }
  return json{{"nodes", std::move(nodes)}, {"links", std::move(links)}};
}

Topology load_topology(const json& document) {
  if (!document.is_object()) throw ParseError("topology document must be an object");
  const json& nodes = require(document, "nodes", "topology");
  if (!nodes.is_array()) throw ParseError("topology: 'nodes' must be an array");
  const json empty_links = json::array();
  const json& links = document.contains("links") ? document.at("links") : empty_links;
  if (!links.is_array()) throw ParseError("topology: 'links' must be an array");
  double engine_delay = Topology::kDefaultEngineDelayMs;
  if (auto it = document.find("engine_delay_ms"); it != document.end()) {
    if (!it->is_number()) throw ParseError("topology: 'engine_delay_ms' must be a number");
    engine_delay = it->get<double>();
  }

  std::vector<std::pair<NodeId, NodeKind>> out_nodes;
  std::vector<Link> out_links;
  std::set<NodeId> switches_with_explicit_engine;
  std::vector<std::pair<NodeId, std::optional<std::string>>> switches;  // engine override

  for (const auto& entry : nodes) {
    if (!entry.is_object()) throw ParseError("topology: node entries must be objects");
    const NodeKind kind = parse_node_kind(require_string(entry, "kind", "node"));
    std::optional<NodeId> attach;
    if (auto it = entry.find("switch"); it != entry.end()) {
      if (!it->is_string()) throw ParseError("node: 'switch' must be a string");
      attach = NodeId(it->get<std::string>());
    }
    const double default_delay =
        kind == NodeKind::Engine ? engine_delay : Topology::kDefaultLinkDelayMs;

    if (entry.contains("range")) {
      const std::string range = require_string(entry, "range", "node");
      const auto colon = range.find(':');
      if (colon == std::string::npos) throw ParseError("node: range '" + range + "' lacks ':'");
      const double delay = optional_delay(entry, default_delay, "node");
      for (auto& id : expand_id_range(std::string_view(range).substr(0, colon),
                                      std::string_view(range).substr(colon + 1))) {
        out_nodes.emplace_back(id, kind);
        if (attach) out_links.push_back({id, *attach, delay});
      }
      continue;
    }

    NodeId id(require_string(entry, "id", "node"));
    out_nodes.emplace_back(id, kind);
    if (attach) {
      out_links.push_back({id, *attach, optional_delay(entry, default_delay, "node")});
      if (kind == NodeKind::Engine) switches_with_explicit_engine.insert(*attach);
    }
    if (kind == NodeKind::Switch) {
      std::optional<std::string> engine_name = "e-" + id.str();
      if (auto it = entry.find("engine"); it != entry.end()) {
        if (it->is_boolean()) {
          if (!it->get<bool>()) engine_name.reset();
        } else if (it->is_string()) {
          engine_name = it->get<std::string>();
        } else {
          throw ParseError("node: 'engine' must be a boolean or a string");
        }
      }
      switches.emplace_back(id, engine_name);
    }
  }

  for (const auto& entry : links) {
    if (!entry.is_object()) throw ParseError("topology: link entries must be objects");
    out_links.push_back({NodeId(require_string(entry, "a", "link")), NodeId(require_string(entry, "b", "link")),
                         optional_delay(entry, Topology::kDefaultLinkDelayMs, "link")});
  }

  for (const auto& [sw, engine] : switches) {
    if (!engine || switches_with_explicit_engine.count(sw)) continue;
    NodeId engine_id(*engine);
    out_nodes.emplace_back(engine_id, NodeKind::Engine);
    out_links.push_back({engine_id, sw, engine_delay});
  }
  return Topology::build(std::move(out_nodes), std::move(out_links));
}

Topology load_topology_text(std::string_view text) {
  json document;
  try {
    document = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("topology: ") + e.what());
  }
  try {
    return load_topology(document);
  } catch (const json::exception& e) {
    throw ParseError(std::string("topology: ") + e.what());
  }
}

Topology load_topology_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read topology file '" + path.string() + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return load_topology_text(buffer.str());
}

}  // namespace flip
