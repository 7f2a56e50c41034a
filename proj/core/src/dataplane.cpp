#include "flip/dataplane.hpp"

#include <algorithm>
#include <sstream>

#include <nlohmann/json.hpp>

#include "flip/errors.hpp"

namespace flip {

using json = nlohmann::json;

json StatsReport::to_json() const {
  json sw = json::object();
  for (const auto& [id, c] : switches) {
    json ports = json::object();
    for (const auto& [n, p] : c.ports) ports[n.str()] = {{"rx", p.rx}, {"tx", p.tx}};
    sw[id.str()] = {{"packets", c.packets}, {"table_misses", c.table_misses}, {"ports", std::move(ports)},
                    {"rule_hits", c.rule_hits}};
  }
  return {{"filter", filter ? json(filter->str()) : json(nullptr)},
          {"switches", std::move(sw)},
          {"total_packet_hops", total_packet_hops},
          {"created", created},
          {"delivered", delivered},
          {"dropped", dropped},
          {"absorbed", absorbed},
          {"in_flight", in_flight}};
}

std::string StatsReport::to_csv() const {
  std::ostringstream out;
  out << "switch,id,count\n";
  for (const auto& [id, c] : switches) {
    out << id << ",packets," << c.packets << '\n';
    out << id << ",table_misses," << c.table_misses << '\n';
    for (const auto& [n, p] : c.ports) {
      out << id << ",rx:" << n << ',' << p.rx << '\n';
      out << id << ",tx:" << n << ',' << p.tx << '\n';
    }
    for (std::size_t i = 0; i < c.rule_hits.size(); ++i) out << id << ",rule" << i << ',' << c.rule_hits[i] << '\n';
  }
  return out.str();
}

json TraceEntry::to_json() const {
  return {{"t", time_ms}, {"event", event}, {"node", node.str()}, {"packet", packet}, {"detail", detail}};
}

Fabric::Fabric(std::shared_ptr<const Topology> topology, std::shared_ptr<ConfigStore> store)
    : topology_(std::move(topology)), store_(std::move(store)) {
  if (!topology_) throw ValidationError("fabric needs a topology");
  if (!store_) store_ = std::make_shared<ConfigStore>();
  tables_.resize(topology_->size());
  counters_.resize(topology_->size());
  per_destination_.resize(topology_->size());
  for (std::size_t i = 0; i < topology_->size(); ++i) {
    if (topology_->kind(i) == NodeKind::Engine) engines_.emplace(i, Engine(topology_->id(i), *store_));
  }
}

namespace {

std::size_t switch_index(const Topology& t, const NodeId& sw) {
  if (!t.contains(sw) || t.kind(sw) != NodeKind::Switch) throw UnknownSwitch("unknown switch '" + sw.str() + "'");
  return t.index_of(sw);
}

bool same_match(const FlowRule& a, const FlowRule& b) { return a.switch_id == b.switch_id && a.match == b.match; }

}  // namespace

std::size_t Fabric::install_rules(const std::vector<FlowRule>& rules) {
  std::vector<FlowRule> normalized = rules;
  for (auto& r : normalized) {
    switch_index(*topology_, r.switch_id);
    normalize(r);
    if (r.match.sources.empty()) throw ValidationError("flow rule needs at least one source");
    if (r.action.kind == ActionKind::ForwardTo && !topology_->adjacent(r.switch_id, r.action.target)) {
      throw ValidationError("'" + r.action.target.str() + "' is not adjacent to '" + r.switch_id.str() + "'");
    }
    if (r.action.kind == ActionKind::RedirectToEngine && topology_->engine_of(r.switch_id) != r.action.target) {
      throw ValidationError("'" + r.action.target.str() + "' is not the engine of '" + r.switch_id.str() + "'");
    }
  }
  std::size_t added = 0;
  for (auto& r : normalized) {
    auto& table = tables_[topology_->index_of(r.switch_id)];
    bool present = std::any_of(table.begin(), table.end(), [&](const InstalledRule& x) { return x.rule == r; });
    if (present) continue;
    if (r.match.final_destination == any_destination()) {
      table.push_back(InstalledRule{std::move(r), 0});
    } else {
      auto first_wildcard = std::find_if(table.begin(), table.end(), [](const InstalledRule& x) {
        return x.rule.match.final_destination == any_destination();
      });
      table.insert(first_wildcard, InstalledRule{std::move(r), 0});
    }
    ++added;
  }
  return added;
}

std::size_t Fabric::modify_rules(const std::vector<FlowRule>& rules) {
  for (const auto& r : rules) switch_index(*topology_, r.switch_id);
  std::size_t changed = 0;
  for (auto r : rules) {
    normalize(r);
    for (auto& installed : tables_[topology_->index_of(r.switch_id)]) {
      if (same_match(installed.rule, r)) {
        installed.rule.action = r.action;
        ++changed;
      }
    }
  }
  return changed;
}

std::size_t Fabric::delete_rules(const std::vector<FlowRule>& rules) {
  for (const auto& r : rules) switch_index(*topology_, r.switch_id);
  std::size_t removed = 0;
  for (auto r : rules) {
    normalize(r);
    auto& table = tables_[topology_->index_of(r.switch_id)];
    auto it = std::remove_if(table.begin(), table.end(),
                             [&](const InstalledRule& x) { return same_match(x.rule, r); });
    removed += static_cast<std::size_t>(table.end() - it);
    table.erase(it, table.end());
  }
  return removed;
}

std::size_t Fabric::delete_all_rules(const NodeId& sw) {
  auto& table = tables_[switch_index(*topology_, sw)];
  auto n = table.size();
  table.clear();
  return n;
}

const std::vector<InstalledRule>& Fabric::flows(const NodeId& sw) const {
  return tables_[switch_index(*topology_, sw)];
}

void Fabric::push(double time_ms, std::variant<Arrive, Timer> what) {
  if (std::holds_alternative<Arrive>(what)) ++in_flight_;
  queue_.push(Event{time_ms, seq_++, std::move(what)});
}

std::uint64_t Fabric::inject(PacketRecord p, const NodeId& at) {
  if (!topology_->contains(at)) throw UnknownNode("unknown node '" + at.str() + "'");
  const auto i = topology_->index_of(at);
  const auto kind = topology_->kind(i);
  if (kind != NodeKind::BaseStation && kind != NodeKind::Engine) {
    throw UnknownNode("'" + at.str() + "' is a " + std::string(to_string(kind)) + " and cannot source traffic");
  }
  if (p.timestamp_ms < now_ms_) throw ValidationError("cannot inject a packet before the current time");
  p.id = next_packet_id_++;
  p.hop_count = 0;
  ++created_;
  const auto id = p.id;
  const double t = p.timestamp_ms;
  send(std::move(p), i, topology_->adjacency(i).front().index, t);
  return id;
}

void Fabric::send(PacketRecord p, std::size_t from, std::size_t to, double now) {
  const auto delay = *topology_->link_delay(topology_->id(from), topology_->id(to));
  ++p.hop_count;
  if (topology_->is_switch(from)) ++counters_[from].ports[topology_->id(to)].tx;
  push(now + delay, Arrive{std::move(p), to, from});
}

std::optional<TraceEntry> Fabric::step() {
  if (queue_.empty()) return std::nullopt;
  Event ev = queue_.top();
  queue_.pop();
  now_ms_ = ev.time_ms;
  TraceEntry entry;
  if (auto* a = std::get_if<Arrive>(&ev.what)) {
    --in_flight_;
    a->packet.timestamp_ms = now_ms_;
    switch (topology_->kind(a->node)) {
      case NodeKind::Switch: entry = on_switch(*a, now_ms_); break;
      case NodeKind::Engine: entry = on_engine(*a, now_ms_); break;
      default: entry = on_host(*a, now_ms_); break;
    }
  } else {
    entry = on_timer(std::get<Timer>(ev.what), now_ms_);
  }
  emit_trace(entry);
  return entry;
}

std::size_t Fabric::run(std::optional<double> until_ms) {
  std::size_t n = 0;
  while (!queue_.empty()) {
    if (until_ms && queue_.top().time_ms > *until_ms) break;
    step();
    ++n;
  }
  return n;
}

TraceEntry Fabric::drop(const PacketRecord& p, std::size_t node, double now, std::string why) {
  ++dropped_;
  return TraceEntry{now, "drop", topology_->id(node), p.id, std::move(why)};
}

TraceEntry Fabric::on_switch(Arrive& a, double now) {
  const auto sw = a.node;
  auto& c = counters_[sw];
  ++c.packets;
  ++per_destination_[sw][a.packet.final_destination];
  if (a.from) ++c.ports[topology_->id(*a.from)].rx;
  if (a.packet.hop_count > max_hops()) return drop(a.packet, sw, now, "loop");

  auto& table = tables_[sw];
  for (auto& installed : table) {
    const auto& rule = installed.rule;
    if (!rule.match.matches(a.packet.final_destination, a.packet.source)) continue;
    ++installed.hits;
    std::size_t to = 0;
    switch (rule.action.kind) {
      case ActionKind::ForwardTo:
      case ActionKind::RedirectToEngine:
        to = topology_->index_of(rule.action.target);
        break;
      case ActionKind::Deliver:
        if (!topology_->contains(a.packet.final_destination) ||
            !topology_->adjacent(topology_->id(sw), a.packet.final_destination)) {
          return drop(a.packet, sw, now, "deliver target not adjacent");
        }
        to = topology_->index_of(a.packet.final_destination);
        break;
    }
    const auto id = a.packet.id;
    send(std::move(a.packet), sw, to, now);
    return TraceEntry{now, "switch", topology_->id(sw), id, to_string(rule.action)};
  }
  ++c.table_misses;
  return drop(a.packet, sw, now, "table miss");
}

TraceEntry Fabric::on_engine(Arrive& a, double now) {
  auto& engine = engines_.at(a.node);
  const auto id = a.packet.id;
  auto out = engine.process(a.packet, now);
  if (out.passthrough.empty()) ++absorbed_;
  const auto detail = out.emitted.empty() ? (out.passthrough.empty() ? "absorbed" : "passthrough") : "emit";
  handle_engine_output(a.node, std::move(out), now);
  return TraceEntry{now, "engine", topology_->id(a.node), id, detail};
}

void Fabric::handle_engine_output(std::size_t engine, Engine::Output out, double now) {
  const auto sw = topology_->adjacency(engine).front().index;
  for (auto& p : out.passthrough) send(std::move(p), engine, sw, now);
  for (auto& p : out.emitted) {
    p.id = next_packet_id_++;
    p.hop_count = 0;
    ++created_;
    if (p.final_destination == topology_->id(engine)) {
      push(now, Arrive{std::move(p), engine, std::nullopt});
    } else {
      send(std::move(p), engine, sw, now);
    }
  }
  for (auto& t : out.timers) push(t.at_ms, Timer{engine, std::move(t)});
}

TraceEntry Fabric::on_host(Arrive& a, double now) {
  if (topology_->id(a.node) != a.packet.final_destination) return drop(a.packet, a.node, now, "misdelivered");
  ++delivered_;
  const auto id = a.packet.id;
  deliveries_.push_back(Delivery{now, std::move(a.packet)});
  return TraceEntry{now, "deliver", topology_->id(a.node), id, {}};
}

TraceEntry Fabric::on_timer(Timer& t, double now) {
  auto& engine = engines_.at(t.engine);
  auto out = engine.on_timeout(t.timer, now);
  const auto detail = "epoch " + std::to_string(t.timer.epoch) + (out.emitted.empty() ? " closed" : " partial");
  handle_engine_output(t.engine, std::move(out), now);
  return TraceEntry{now, "timer", topology_->id(t.engine), 0, detail};
}

void Fabric::emit_trace(const TraceEntry& e) {
  if (trace_) *trace_ << e.to_json().dump() << '\n';
  if (trace_cb_) trace_cb_(e);
}

StatsReport Fabric::stats(std::optional<NodeId> filter_destination) const {
  StatsReport r;
  r.filter = filter_destination;
  for (std::size_t i = 0; i < topology_->size(); ++i) {
    if (!topology_->is_switch(i)) continue;
    SwitchCounters c = counters_[i];
    if (filter_destination) {
      auto it = per_destination_[i].find(*filter_destination);
      c.packets = it == per_destination_[i].end() ? 0 : it->second;
    }
    c.rule_hits.clear();
    for (const auto& rule : tables_[i]) c.rule_hits.push_back(rule.hits);
    r.total_packet_hops += c.packets;
    r.switches.emplace(topology_->id(i), std::move(c));
  }
  r.created = created_;
  r.delivered = delivered_;
  r.dropped = dropped_;
  r.absorbed = absorbed_;
  r.in_flight = in_flight_;
  return r;
}

const Engine* Fabric::engine(const NodeId& id) const {
  if (!topology_->contains(id)) return nullptr;
  auto it = engines_.find(topology_->index_of(id));
  return it == engines_.end() ? nullptr : &it->second;
}

std::map<NodeId, EngineCounters> Fabric::engine_counters() const {
  std::map<NodeId, EngineCounters> out;
  for (const auto& [i, e] : engines_) out.emplace(topology_->id(i), e.counters());
  return out;
}

json Fabric::state_json() const {
  json rules = json::object();
  for (std::size_t i = 0; i < topology_->size(); ++i) {
    if (!topology_->is_switch(i)) continue;
    json list = json::array();
    for (const auto& r : tables_[i]) list.push_back(r.rule.to_json());
    rules[topology_->id(i).str()] = std::move(list);
  }
  return {{"rules", std::move(rules)}, {"engine_configs", store_->to_json()}};
}

}  // namespace flip
