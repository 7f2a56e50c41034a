#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <queue>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "flip/epb.hpp"
#include "flip/flow_rule.hpp"
#include "flip/payload.hpp"
#include "flip/topology.hpp"

namespace flip {

struct PortCounters {
  std::uint64_t rx = 0;
  std::uint64_t tx = 0;
  friend bool operator==(const PortCounters&, const PortCounters&) = default;
};

struct InstalledRule {
  FlowRule rule;
  std::uint64_t hits = 0;
};

struct SwitchCounters {
  std::uint64_t packets = 0;  // ingress, after the destination filter
  std::uint64_t table_misses = 0;
  std::map<NodeId, PortCounters> ports;  // keyed by neighbor
  std::vector<std::uint64_t> rule_hits;
};

struct StatsReport {
  std::optional<NodeId> filter;
  std::map<NodeId, SwitchCounters> switches;
  std::uint64_t total_packet_hops = 0;  // switch ingress events
  std::uint64_t created = 0;
  std::uint64_t delivered = 0;
  std::uint64_t dropped = 0;
  std::uint64_t absorbed = 0;
  std::uint64_t in_flight = 0;

  nlohmann::json to_json() const;
  /// switch,id,count rows: one "packets" row per switch, then per-port and
  /// per-rule rows.
  std::string to_csv() const;
};

struct Delivery {
  double time_ms = 0.0;
  PacketRecord packet;
};

struct TraceEntry {
  double time_ms = 0.0;
  std::string event;  // "switch", "engine", "deliver", "drop", "timer"
  NodeId node;
  std::uint64_t packet = 0;
  std::string detail;

  nlohmann::json to_json() const;
};

/// Deterministic discrete-event fabric. Events pop in (time, insertion)
/// order; switches apply the first matching rule; table misses and loops
/// are dropped and counted. Rules and configs may change between steps.
class Fabric {
 public:
  Fabric(std::shared_ptr<const Topology> topology, std::shared_ptr<ConfigStore> store);

  const Topology& topology() const noexcept { return *topology_; }
  ConfigStore& config_store() noexcept { return *store_; }
  const ConfigStore& config_store() const noexcept { return *store_; }

  /// Appends rules per switch; identical rules already installed are
  /// skipped. Rules naming a destination go ahead of wildcard rules.
  /// Nothing changes when any switch is unknown (UnknownSwitch).
  std::size_t install_rules(const std::vector<FlowRule>& rules);
  /// Replaces the action of installed rules with the same switch and match.
  std::size_t modify_rules(const std::vector<FlowRule>& rules);
  /// Removes installed rules equal in switch and match to any given rule.
  std::size_t delete_rules(const std::vector<FlowRule>& rules);
  std::size_t delete_all_rules(const NodeId& sw);
  const std::vector<InstalledRule>& flows(const NodeId& sw) const;

  /// Queues a packet leaving a base station or engine at p.timestamp_ms.
  /// UnknownNode for any other origin. Returns the packet id.
  std::uint64_t inject(PacketRecord p, const NodeId& at);

  std::optional<TraceEntry> step();
  /// Runs until the queue drains or the next event is later than `until_ms`.
  std::size_t run(std::optional<double> until_ms = std::nullopt);
  bool idle() const noexcept { return queue_.empty(); }
  double now() const noexcept { return now_ms_; }

  StatsReport stats(std::optional<NodeId> filter_destination = std::nullopt) const;
  const std::vector<Delivery>& deliveries() const noexcept { return deliveries_; }
  const Engine* engine(const NodeId& id) const;
  std::map<NodeId, EngineCounters> engine_counters() const;

  /// Line-delimited JSON trace of every processed event.
  void set_trace(std::ostream* out) { trace_ = out; }
  void set_trace_callback(std::function<void(const TraceEntry&)> cb) { trace_cb_ = std::move(cb); }

  /// Installed rules and engine configs; equal states compare equal.
  nlohmann::json state_json() const;

  /// Hop bound: packets that exceed it are dropped as loops.
  std::size_t max_hops() const noexcept { return topology_->size(); }

 private:
  struct Arrive {
    PacketRecord packet;
    std::size_t node;
    std::optional<std::size_t> from;
  };
  struct Timer {
    std::size_t engine;
    EpochTimer timer;
  };
  struct Event {
    double time_ms;
    std::uint64_t seq;
    std::variant<Arrive, Timer> what;
  };
  struct Later {
    bool operator()(const Event& a, const Event& b) const {
      return a.time_ms != b.time_ms ? a.time_ms > b.time_ms : a.seq > b.seq;
    }
  };

  void push(double time_ms, std::variant<Arrive, Timer> what);
  void send(PacketRecord p, std::size_t from, std::size_t to, double now);
  TraceEntry on_switch(Arrive& a, double now);
  TraceEntry on_engine(Arrive& a, double now);
  TraceEntry on_host(Arrive& a, double now);
  TraceEntry on_timer(Timer& t, double now);
  void handle_engine_output(std::size_t engine, Engine::Output out, double now);
  TraceEntry drop(const PacketRecord& p, std::size_t node, double now, std::string why);
  void emit_trace(const TraceEntry& e);

  std::shared_ptr<const Topology> topology_;
  std::shared_ptr<ConfigStore> store_;
  std::vector<std::vector<InstalledRule>> tables_;
  std::vector<SwitchCounters> counters_;
  std::vector<std::map<NodeId, std::uint64_t>> per_destination_;
  std::map<std::size_t, Engine> engines_;
  std::priority_queue<Event, std::vector<Event>, Later> queue_;
  std::uint64_t seq_ = 0;
  std::uint64_t next_packet_id_ = 1;
  double now_ms_ = 0.0;
  std::uint64_t created_ = 0;
  std::uint64_t delivered_ = 0;
  std::uint64_t dropped_ = 0;
  std::uint64_t absorbed_ = 0;
  std::uint64_t in_flight_ = 0;
  std::vector<Delivery> deliveries_;
  std::ostream* trace_ = nullptr;
  std::function<void(const TraceEntry&)> trace_cb_;
};

}  // namespace flip
