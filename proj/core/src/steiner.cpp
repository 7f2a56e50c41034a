#include "flip/steiner.hpp"

#include <algorithm>
#include <deque>
#include <map>
#include <numeric>
#include <set>
#include <tuple>

#include <nlohmann/json.hpp>

#include "flip/errors.hpp"

namespace flip {

namespace {

struct DisjointSets {
  std::vector<std::size_t> parent;
  explicit DisjointSets(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  std::size_t find(std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  bool unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    parent[std::max(a, b)] = std::min(a, b);
    return true;
  }
};

Link normalized(NodeId a, NodeId b, double delay) {
  if (b < a) std::swap(a, b);
  return Link{std::move(a), std::move(b), delay};
}

bool link_less(const Link& x, const Link& y) { return std::tie(x.a, x.b) < std::tie(y.a, y.b); }

}  // namespace

SteinerTree::SteinerTree(std::vector<NodeId> terminals, std::vector<Link> edges)
    : terminals_(std::move(terminals)), edges_(std::move(edges)) {
  for (auto& e : edges_) {
    if (e.b < e.a) std::swap(e.a, e.b);
  }
  std::sort(terminals_.begin(), terminals_.end());
  terminals_.erase(std::unique(terminals_.begin(), terminals_.end()), terminals_.end());
  std::sort(edges_.begin(), edges_.end(), link_less);
}

std::vector<NodeId> SteinerTree::vertices() const {
  std::set<NodeId> vs(terminals_.begin(), terminals_.end());
  for (const auto& e : edges_) {
    vs.insert(e.a);
    vs.insert(e.b);
  }
  return {vs.begin(), vs.end()};
}

double SteinerTree::weight() const noexcept {
  double w = 0.0;
  for (const auto& e : edges_) w += e.delay_ms;
  return w;
}

bool SteinerTree::contains(const NodeId& v) const {
  auto vs = vertices();
  return std::binary_search(vs.begin(), vs.end(), v);
}

bool SteinerTree::is_tree_spanning_terminals() const {
  auto vs = vertices();
  if (edges_.size() + 1 != vs.size()) return false;
  std::map<NodeId, std::size_t> index;
  for (std::size_t i = 0; i < vs.size(); ++i) index.emplace(vs[i], i);
  DisjointSets sets(vs.size());
  for (const auto& e : edges_) {
    if (!sets.unite(index.at(e.a), index.at(e.b))) return false;
  }
  return true;
}

Path SteinerTree::path(const NodeId& a, const NodeId& b) const {
  if (a == b) return Path{{a}, 0.0};
  std::map<NodeId, std::vector<std::pair<NodeId, double>>> adj;
  for (const auto& e : edges_) {
    adj[e.a].emplace_back(e.b, e.delay_ms);
    adj[e.b].emplace_back(e.a, e.delay_ms);
  }
  std::map<NodeId, std::pair<NodeId, double>> came_from;
  std::deque<NodeId> queue{a};
  came_from.emplace(a, std::make_pair(a, 0.0));
  while (!queue.empty()) {
    NodeId cur = queue.front();
    queue.pop_front();
    if (cur == b) break;
    for (const auto& [n, w] : adj[cur]) {
      if (came_from.emplace(n, std::make_pair(cur, w)).second) queue.push_back(n);
    }
  }
  if (!came_from.count(b)) {
    throw CompileError("tree does not connect '" + a.str() + "' and '" + b.str() + "'");
  }
  Path p;
  for (NodeId cur = b; cur != a; cur = came_from.at(cur).first) {
    p.nodes.push_back(cur);
    p.delay_ms += came_from.at(cur).second;
  }
  p.nodes.push_back(a);
  std::reverse(p.nodes.begin(), p.nodes.end());
  return p;
}

nlohmann::json SteinerTree::to_json() const {
  nlohmann::json terminals = nlohmann::json::array();
  for (const auto& t : terminals_) terminals.push_back(t.str());
  nlohmann::json edges = nlohmann::json::array();
  for (const auto& e : edges_) edges.push_back({{"a", e.a.str()}, {"b", e.b.str()}, {"delay_ms", e.delay_ms}});
  return {{"terminals", std::move(terminals)}, {"edges", std::move(edges)}, {"weight_ms", weight()}};
}

SteinerTree steiner_tree(const Topology& topology, const std::vector<NodeId>& terminals) {
  std::vector<std::size_t> term;
  for (const auto& t : terminals) term.push_back(topology.index_of(t));
  std::sort(term.begin(), term.end());
  term.erase(std::unique(term.begin(), term.end()), term.end());
  if (term.size() < 2) return SteinerTree(terminals, {});

  // 1. metric closure over the terminals
  const std::size_t k = term.size();
  std::vector<DistanceMap> dist;
  dist.reserve(k);
  for (auto t : term) dist.push_back(topology.distances_from(t));

  // 2. Prim on the complete closure graph; ties by (delay, hops, index)
  std::vector<bool> in_tree(k, false);
  std::vector<double> best(k, DistanceMap::kUnreachable);
  std::vector<std::size_t> best_hops(k, 0);
  std::vector<std::size_t> via(k, 0);
  best[0] = 0.0;
  std::vector<std::pair<std::size_t, std::size_t>> closure_edges;
  for (std::size_t round = 0; round < k; ++round) {
    std::size_t pick = k;
    for (std::size_t i = 0; i < k; ++i) {
      if (in_tree[i]) continue;
      if (pick == k || std::tie(best[i], best_hops[i]) < std::tie(best[pick], best_hops[pick])) pick = i;
    }
    if (best[pick] == DistanceMap::kUnreachable) {
      throw NotFound("terminal '" + topology.id(term[pick]).str() + "' is unreachable");
    }
    in_tree[pick] = true;
    if (round > 0) closure_edges.emplace_back(via[pick], pick);
    for (std::size_t i = 0; i < k; ++i) {
      if (in_tree[i]) continue;
      const double d = dist[pick].delay[term[i]];
      const std::size_t h = dist[pick].hops[term[i]];
      if (std::tie(d, h) < std::tie(best[i], best_hops[i])) {
        best[i] = d;
        best_hops[i] = h;
        via[i] = pick;
      }
    }
  }

  // 3. expand closure edges into network paths
  std::set<std::pair<std::size_t, std::size_t>> expanded;
  for (auto [u, v] : closure_edges) {
    auto p = topology.path_to_source(term[v], dist[u]);
    for (std::size_t i = 0; i + 1 < p.nodes.size(); ++i) {
      expanded.insert(std::minmax(topology.index_of(p.nodes[i]), topology.index_of(p.nodes[i + 1])));
    }
  }

  // 4. MST of the expanded subgraph (Kruskal, ties by endpoint ids)
  std::vector<Link> candidates;
  for (auto [a, b] : expanded) {
    candidates.push_back(normalized(topology.id(a), topology.id(b), *topology.link_delay(topology.id(a), topology.id(b))));
  }
  std::sort(candidates.begin(), candidates.end(), [](const Link& x, const Link& y) {
    return std::tie(x.delay_ms, x.a, x.b) < std::tie(y.delay_ms, y.a, y.b);
  });
  DisjointSets sets(topology.size());
  std::vector<Link> mst;
  for (auto& c : candidates) {
    if (sets.unite(topology.index_of(c.a), topology.index_of(c.b))) mst.push_back(std::move(c));
  }

  // 5. prune non-terminal leaves until none remain
  std::set<NodeId> terminal_ids;
  for (auto t : term) terminal_ids.insert(topology.id(t));
  bool changed = true;
  while (changed) {
    changed = false;
    std::map<NodeId, int> degree;
    for (const auto& e : mst) {
      ++degree[e.a];
      ++degree[e.b];
    }
    auto is_prunable = [&](const Link& e) {
      return (degree[e.a] == 1 && !terminal_ids.count(e.a)) || (degree[e.b] == 1 && !terminal_ids.count(e.b));
    };
    auto it = std::remove_if(mst.begin(), mst.end(), is_prunable);
    if (it != mst.end()) {
      mst.erase(it, mst.end());
      changed = true;
    }
  }
  return SteinerTree({terminal_ids.begin(), terminal_ids.end()}, std::move(mst));
}

}  // namespace flip
