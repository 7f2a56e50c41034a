#include "flip/epb.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <mutex>

#include <nlohmann/json.hpp>

#include "flip/dsl.hpp"
#include "flip/errors.hpp"

namespace flip {

using json = nlohmann::json;

void EngineConfig::validate() const {
  if (engine.empty()) throw ValidationError("engine config needs an engine");
  if (user.empty()) throw ValidationError("engine config needs a user");
  if (destination.empty()) throw ValidationError("engine config needs a destination");
  if (sources.empty()) throw ValidationError("engine config needs at least one source");
  auto sorted = sources;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw ValidationError("engine config lists a source twice");
  }
  if (rate_ms && !(std::isfinite(*rate_ms) && *rate_ms > 0.0)) throw ValidationError("rate must be positive");
  if (jitter_ms && !(*jitter_ms >= 0.0 && *jitter_ms <= Requirements::kMaxJitterMs)) {
    throw ValidationError("jitter must lie in [0, 25] ms");
  }
}

bool EngineConfig::has_source(const NodeId& s) const {
  return std::find(sources.begin(), sources.end(), s) != sources.end();
}

json EngineConfig::to_json() const {
  json src = json::array();
  for (const auto& s : sources) src.push_back(s.str());
  json j{{"compute", std::string(to_string(compute))}, {"source", std::move(src)}, {"destination", destination.str()}};
  j["rate"] = rate_ms ? json(*rate_ms) : json(nullptr);
  j["jitter"] = jitter_ms ? json(*jitter_ms) : json(nullptr);
  if (timeout_policy == TimeoutPolicy::Reject) j["timeout_policy"] = "reject";
  return j;
}

EngineConfig EngineConfig::from_json(const NodeId& engine, const std::string& user, const json& body) {
  if (!body.is_object()) throw ParseError("engine config must be an object");
  EngineConfig c;
  c.engine = engine;
  c.user = user;
  try {
    const auto op_name = body.at("compute").get<std::string>();
    auto op = parse_op_kind(op_name);
    if (!op) throw UnknownOperation("unknown operation '" + op_name + "'");
    c.compute = *op;
    for (const auto& s : body.at("source")) c.sources.emplace_back(s.get<std::string>());
    c.destination = NodeId(body.at("destination").get<std::string>());
    if (auto it = body.find("rate"); it != body.end() && !it->is_null()) c.rate_ms = it->get<double>();
    if (auto it = body.find("jitter"); it != body.end() && !it->is_null()) c.jitter_ms = it->get<double>();
    if (auto it = body.find("timeout_policy"); it != body.end()) {
      const auto policy = it->get<std::string>();
      if (policy == "reject") {
        c.timeout_policy = TimeoutPolicy::Reject;
      } else if (policy != "auto") {
        throw ValidationError("unknown timeout policy '" + policy + "'");
      }
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("engine config: ") + e.what());
  }
  return c;
}

ConfigStore::ConfigStore(std::filesystem::path file) : file_(std::move(file)) { reload(); }

ConfigStore::ConfigStore(const ConfigStore& other) {
  std::shared_lock lock(other.mutex_);
  configs_ = other.configs_;
  file_ = other.file_;
}

ConfigStore& ConfigStore::operator=(const ConfigStore& other) {
  if (this == &other) return *this;
  std::scoped_lock lock(mutex_);
  std::shared_lock other_lock(other.mutex_);
  configs_ = other.configs_;
  file_ = other.file_;
  return *this;
}

void ConfigStore::set_config(const EngineConfig& cfg) {
  cfg.validate();
  std::scoped_lock lock(mutex_);
  configs_[Key{cfg.engine, cfg.user, cfg.destination}] = cfg;
  persist_locked();
}

std::optional<EngineConfig> ConfigStore::get(const NodeId& engine, const std::string& user,
                                             const NodeId& destination) const {
  std::shared_lock lock(mutex_);
  auto it = configs_.find(Key{engine, user, destination});
  if (it == configs_.end()) return std::nullopt;
  return it->second;
}

std::vector<EngineConfig> ConfigStore::for_engine(const NodeId& engine) const {
  std::shared_lock lock(mutex_);
  std::vector<EngineConfig> out;
  for (const auto& [key, cfg] : configs_) {
    if (std::get<0>(key) == engine) out.push_back(cfg);
  }
  return out;
}

std::vector<EngineConfig> ConfigStore::for_user(const NodeId& engine, const std::string& user) const {
  std::shared_lock lock(mutex_);
  std::vector<EngineConfig> out;
  for (const auto& [key, cfg] : configs_) {
    if (std::get<0>(key) == engine && std::get<1>(key) == user) out.push_back(cfg);
  }
  return out;
}

std::vector<EngineConfig> ConfigStore::all() const {
  std::shared_lock lock(mutex_);
  std::vector<EngineConfig> out;
  for (const auto& [_, cfg] : configs_) out.push_back(cfg);
  return out;
}

bool ConfigStore::remove(const NodeId& engine, const std::string& user, const NodeId& destination) {
  std::scoped_lock lock(mutex_);
  bool erased = configs_.erase(Key{engine, user, destination}) != 0;
  if (erased) persist_locked();
  return erased;
}

void ConfigStore::clear() {
  std::scoped_lock lock(mutex_);
  configs_.clear();
  persist_locked();
}

std::size_t ConfigStore::size() const {
  std::shared_lock lock(mutex_);
  return configs_.size();
}

namespace {

json document_of(const std::map<ConfigStore::Key, EngineConfig>& configs) {
  json doc = json::object();
  for (const auto& [key, cfg] : configs) {
    auto& list = doc[cfg.engine.str()][cfg.user];
    if (list.is_null()) list = json::array();
    list.push_back(cfg.to_json());
  }
  return doc;
}

}  // namespace

json ConfigStore::to_json() const {
  std::shared_lock lock(mutex_);
  return document_of(configs_);
}

void ConfigStore::load_json(const json& document) {
  if (!document.is_object()) throw ParseError("engine config file must be an object");
  std::map<Key, EngineConfig> loaded;
  for (const auto& [engine, users] : document.items()) {
    if (!users.is_object()) throw ParseError("engine '" + engine + "' must map users to configs");
    for (const auto& [user, list] : users.items()) {
      auto add = [&](const json& body) {
        auto cfg = EngineConfig::from_json(NodeId(engine), user, body);
        cfg.validate();
        loaded[Key{cfg.engine, cfg.user, cfg.destination}] = std::move(cfg);
      };
      if (list.is_array()) {
        for (const auto& body : list) add(body);
      } else {
        add(list);
      }
    }
  }
  std::scoped_lock lock(mutex_);
  configs_ = std::move(loaded);
}

void ConfigStore::reload() {
  if (!file_ || !std::filesystem::exists(*file_)) return;
  std::ifstream in(*file_);
  if (!in) throw IoError("cannot read '" + file_->string() + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError("engine config file '" + file_->string() + "': " + e.what());
  }
  load_json(doc);
}

void ConfigStore::persist_locked() const {
  if (!file_) return;
  std::error_code ec;
  if (file_->has_parent_path()) std::filesystem::create_directories(file_->parent_path(), ec);
  auto tmp = *file_;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw IoError("cannot write '" + tmp.string() + "'");
    out << document_of(configs_).dump(2) << '\n';
  }
  std::filesystem::rename(tmp, *file_, ec);
  if (ec) throw IoError("cannot replace '" + file_->string() + "': " + ec.message());
}

RateDecision RateFilter::operator()(const EngineConfig& cfg, const PacketRecord& p) {
  if (!cfg.rate_ms) return RateDecision::Pass;
  const auto window = static_cast<std::int64_t>(std::floor(p.timestamp_ms / *cfg.rate_ms));
  auto [it, inserted] = last_window_.try_emplace(p.source, window);
  if (inserted) return RateDecision::Pass;
  if (window <= it->second) return RateDecision::Drop;
  it->second = window;
  return RateDecision::Pass;
}

JitterDecision dejitter(EpochBuffer& buffer, const EngineConfig& cfg, const PacketRecord& p) {
  if (!buffer.leader_timestamp_ms) {
    buffer.leader_timestamp_ms = p.timestamp_ms;
    return JitterDecision::Accept;
  }
  if (!cfg.jitter_ms) return JitterDecision::Accept;
  return std::fabs(p.timestamp_ms - *buffer.leader_timestamp_ms) <= *cfg.jitter_ms ? JitterDecision::Accept
                                                                                   : JitterDecision::Discard;
}

std::optional<PacketRecord> aggregate_and_compute(const EpochBuffer& buffer, const EngineConfig& cfg,
                                                  bool timed_out) {
  std::vector<Payload> operands;
  double latest = 0.0;
  bool any = false;
  for (const auto& s : cfg.sources) {
    auto it = buffer.arrivals.find(s);
    if (it == buffer.arrivals.end()) continue;
    operands.push_back(it->second.payload);
    latest = any ? std::max(latest, it->second.timestamp_ms) : it->second.timestamp_ms;
    any = true;
  }
  const bool complete = operands.size() == cfg.sources.size();
  if (!complete) {
    if (!timed_out) return std::nullopt;
    if (operands.empty()) throw MissingSource("epoch " + std::to_string(buffer.epoch) + " has no arrivals");
    if (cfg.timeout_policy == TimeoutPolicy::Reject || is_order_sensitive(cfg.compute)) {
      throw MissingSource("epoch " + std::to_string(buffer.epoch) + " timed out with " +
                          std::to_string(operands.size()) + " of " + std::to_string(cfg.sources.size()) +
                          " sources");
    }
  }
  PacketRecord out;
  out.source = cfg.engine;
  out.final_destination = cfg.destination;
  out.user = cfg.user;
  out.epoch = buffer.epoch;
  out.timestamp_ms = latest;
  out.payload = combine(cfg.compute, operands);
  out.derived = true;
  return out;
}

json EngineCounters::to_json() const {
  return {{"arrivals", arrivals},
          {"rate_drops", rate_drops},
          {"jitter_discards", jitter_discards},
          {"late_discards", late_discards},
          {"duplicate_discards", duplicate_discards},
          {"buffered", buffered},
          {"passthrough", passthrough},
          {"emitted", emitted},
          {"partial", partial},
          {"rejected", rejected},
          {"shape_errors", shape_errors}};
}

Engine::Output Engine::process(const PacketRecord& p, double now_ms) {
  Output out;
  ++counters_.arrivals;
  std::optional<EngineConfig> cfg;
  for (auto& c : store_->for_engine(id_)) {
    if (c.user == p.user && c.has_source(p.source)) {
      cfg = std::move(c);
      break;
    }
  }
  if (!cfg) {
    ++counters_.passthrough;
    out.passthrough.push_back(p);
    return out;
  }
  auto& state = states_[{cfg->user, cfg->destination}];

  std::uint64_t epoch = p.epoch;
  if (!p.derived) {
    if (state.rate(*cfg, p) == RateDecision::Drop) {
      ++counters_.rate_drops;
      return out;
    }
    if (cfg->rate_ms) epoch = static_cast<std::uint64_t>(std::floor(p.timestamp_ms / *cfg->rate_ms));
  }
  if (state.closed.count(epoch)) {
    ++counters_.late_discards;
    return out;
  }
  auto [it, fresh] = state.open.try_emplace(epoch);
  auto& buffer = it->second;
  buffer.epoch = epoch;
  if (buffer.arrivals.count(p.source)) {
    ++counters_.duplicate_discards;
    return out;
  }
  if (dejitter(buffer, *cfg, p) == JitterDecision::Discard) {
    ++counters_.jitter_discards;
    return out;
  }
  buffer.arrivals.emplace(p.source, Arrival{p.timestamp_ms, p.payload});
  ++counters_.buffered;
  if (fresh) {
    out.timers.push_back(EpochTimer{now_ms + cfg->epoch_timeout_ms(), cfg->user, cfg->destination, epoch});
  }
  if (buffer.arrivals.size() == cfg->sources.size()) finish(state, *cfg, epoch, false, out);
  return out;
}

Engine::Output Engine::on_timeout(const EpochTimer& timer, double) {
  Output out;
  auto sit = states_.find({timer.user, timer.destination});
  if (sit == states_.end() || !sit->second.open.count(timer.epoch)) return out;
  auto cfg = store_->get(id_, timer.user, timer.destination);
  if (!cfg) {
    sit->second.open.erase(timer.epoch);
    sit->second.closed.insert(timer.epoch);
    ++counters_.rejected;
    return out;
  }
  finish(sit->second, *cfg, timer.epoch, true, out);
  return out;
}

void Engine::finish(State& state, const EngineConfig& cfg, std::uint64_t epoch, bool timed_out, Output& out) {
  const auto& buffer = state.open.at(epoch);
  try {
    auto packet = aggregate_and_compute(buffer, cfg, timed_out);
    if (packet) {
      if (buffer.arrivals.size() != cfg.sources.size()) ++counters_.partial;
      ++counters_.emitted;
      out.emitted.push_back(std::move(*packet));
    }
  } catch (const MissingSource&) {
    ++counters_.rejected;
  } catch (const ShapeMismatch&) {
    ++counters_.shape_errors;
  }
  state.open.erase(epoch);
  state.closed.insert(epoch);
}

std::size_t Engine::open_epochs() const {
  std::size_t n = 0;
  for (const auto& [_, s] : states_) n += s.open.size();
  return n;
}

}  // namespace flip
