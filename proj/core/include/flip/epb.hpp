#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <tuple>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "flip/node_id.hpp"
#include "flip/payload.hpp"
#include "flip/task_graph.hpp"

namespace flip {

/// What an engine does with an epoch whose timeout fires before every
/// source arrived. Auto computes over the present sources for min/max/sum/avg
/// and rejects the epoch for sub/mul; Reject always rejects.
enum class TimeoutPolicy { Auto, Reject };

struct EngineConfig {
  NodeId engine;
  std::string user{kDefaultUser};
  OpKind compute = OpKind::Sum;
  std::vector<NodeId> sources;
  NodeId destination;
  std::optional<double> rate_ms;
  std::optional<double> jitter_ms;
  TimeoutPolicy timeout_policy = TimeoutPolicy::Auto;

  static constexpr double kDefaultTimeoutMs = 100.0;

  /// ValidationError on empty/duplicate sources, bad rate or jitter.
  void validate() const;
  /// 2 x rate, or 100 ms when no rate is set.
  double epoch_timeout_ms() const noexcept { return rate_ms ? 2.0 * *rate_ms : kDefaultTimeoutMs; }
  bool has_source(const NodeId& s) const;

  /// Body without engine/user, as stored under engine -> user in the file.
  nlohmann::json to_json() const;
  static EngineConfig from_json(const NodeId& engine, const std::string& user, const nlohmann::json& body);

  friend bool operator==(const EngineConfig&, const EngineConfig&) = default;
};

/// Active engine configurations, one per (engine, user, destination).
/// Readers share, writers serialize. When bound to a file, every write is
/// persisted as {engine: {user: [config, ...]}}.
class ConfigStore {
 public:
  using Key = std::tuple<NodeId, std::string, NodeId>;

  ConfigStore() = default;
  explicit ConfigStore(std::filesystem::path file);
  ConfigStore(const ConfigStore& other);
  ConfigStore& operator=(const ConfigStore& other);

  void set_config(const EngineConfig& cfg);
  std::optional<EngineConfig> get(const NodeId& engine, const std::string& user, const NodeId& destination) const;
  std::vector<EngineConfig> for_engine(const NodeId& engine) const;
  std::vector<EngineConfig> for_user(const NodeId& engine, const std::string& user) const;
  std::vector<EngineConfig> all() const;
  bool remove(const NodeId& engine, const std::string& user, const NodeId& destination);
  void clear();
  std::size_t size() const;

  nlohmann::json to_json() const;
  void load_json(const nlohmann::json& document);
  /// Reads the bound file if it exists.
  void reload();
  const std::optional<std::filesystem::path>& file() const noexcept { return file_; }

 private:
  void persist_locked() const;

  mutable std::shared_mutex mutex_;
  std::map<Key, EngineConfig> configs_;
  std::optional<std::filesystem::path> file_;
};

enum class RateDecision { Pass, Drop };
enum class JitterDecision { Accept, Discard };

/// Per-source window state for the rate filter.
class RateFilter {
 public:
  /// Pass iff this is the first packet from p.source in its
  /// floor(timestamp / rate) window. Always Pass without a rate.
  RateDecision operator()(const EngineConfig& cfg, const PacketRecord& p);

 private:
  std::map<NodeId, std::int64_t> last_window_;
};

struct Arrival {
  double timestamp_ms = 0.0;
  Payload payload;
};

struct EpochBuffer {
  std::uint64_t epoch = 0;
  std::optional<double> leader_timestamp_ms;
  std::map<NodeId, Arrival> arrivals;
};

/// The first arrival of an epoch becomes the leader; later arrivals are
/// kept iff |timestamp - leader| <= jitter. Always Accept without a jitter.
JitterDecision dejitter(EpochBuffer& buffer, const EngineConfig& cfg, const PacketRecord& p);

/// Computes the epoch result once every source is present, or on timeout
/// per the timeout policy. nullopt while incomplete. MissingSource when a
/// timed-out epoch is rejected; ShapeMismatch on incompatible payloads.
std::optional<PacketRecord> aggregate_and_compute(const EpochBuffer& buffer, const EngineConfig& cfg,
                                                  bool timed_out);

struct EngineCounters {
  std::uint64_t arrivals = 0;
  std::uint64_t rate_drops = 0;
  std::uint64_t jitter_discards = 0;
  std::uint64_t late_discards = 0;
  std::uint64_t duplicate_discards = 0;
  std::uint64_t buffered = 0;
  std::uint64_t passthrough = 0;
  std::uint64_t emitted = 0;
  std::uint64_t partial = 0;
  std::uint64_t rejected = 0;
  std::uint64_t shape_errors = 0;

  nlohmann::json to_json() const;
  friend bool operator==(const EngineCounters&, const EngineCounters&) = default;
};

struct EpochTimer {
  double at_ms = 0.0;
  std::string user;
  NodeId destination;
  std::uint64_t epoch = 0;
};

/// One engine's processing pipeline: rate filter, de-jitter, epoch buffer,
/// compute, emit. Configurations are read from the shared store on every
/// packet, so updates apply between events.
class Engine {
 public:
  struct Output {
    std::vector<PacketRecord> emitted;
    std::vector<PacketRecord> passthrough;
    std::vector<EpochTimer> timers;
  };

  Engine(NodeId id, const ConfigStore& store) : id_(std::move(id)), store_(&store) {}

  const NodeId& id() const noexcept { return id_; }
  Output process(const PacketRecord& p, double now_ms);
  Output on_timeout(const EpochTimer& timer, double now_ms);
  const EngineCounters& counters() const noexcept { return counters_; }
  std::size_t open_epochs() const;

 private:
  struct State {
    RateFilter rate;
    std::map<std::uint64_t, EpochBuffer> open;
    std::set<std::uint64_t> closed;
  };

  void finish(State& state, const EngineConfig& cfg, std::uint64_t epoch, bool timed_out, Output& out);

  NodeId id_;
  const ConfigStore* store_;
  std::map<std::pair<std::string, NodeId>, State> states_;
  EngineCounters counters_;
};

}  // namespace flip
