#include "flip/control.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "flip/errors.hpp"
#include "flip/workload.hpp"

namespace flip {

using json = nlohmann::json;

Command Command::from_json(const json& j) {
  if (!j.is_object() || !j.contains("verb") || !j.at("verb").is_string()) {
    throw ParseError("command needs a string 'verb'");
  }
  Command c;
  c.verb = j.at("verb").get<std::string>();
  if (auto it = j.find("args"); it != j.end() && !it->is_null()) {
    if (!it->is_object()) throw ParseError("command 'args' must be an object");
    c.args = *it;
  }
  return c;
}

json CommandResult::to_json() const {
  if (ok) return {{"status", "ok"}, {"body", body}};
  json j{{"status", "error"}, {"code", code}, {"message", message}};
  if (!body.is_null()) j["body"] = body;
  return j;
}

const std::vector<std::string>& known_verbs() {
  static const std::vector<std::string> verbs{
      "getswitches", "getlinks",   "gethosts",   "getswdesc",       "getflows",
      "gettables",   "getports",   "addflow",    "modflow",         "delflow",
      "delflowall",  "getconfig",  "getconfig/user", "setconfig/user", "setconfig/user/module",
      "datapath_m",  "datapath_a", "stats",      "simulate"};
  return verbs;
}

bool is_mutation(std::string_view verb) {
  return verb == "addflow" || verb == "modflow" || verb == "delflow" || verb == "delflowall" ||
         verb == "setconfig/user" || verb == "setconfig/user/module" || verb == "datapath_m" ||
         verb == "datapath_a";
}

Command parse_command_line(std::string_view line) {
  auto b = line.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) throw SyntaxError("empty command", 1, 1);
  line.remove_prefix(b);
  if (line.starts_with("datapath_a") || line.starts_with("datapath_m")) {
    auto verb = std::string(line.substr(0, 10));
    return Command{verb, json{{"request", std::string(line)}}};
  }
  auto end = line.find_first_of(" \t");
  Command c;
  c.verb = std::string(line.substr(0, end));
  if (end != std::string_view::npos) {
    auto rest = line.substr(end);
    if (rest.find_first_not_of(" \t\r\n") != std::string_view::npos) {
      try {
        c.args = json::parse(rest);
      } catch (const json::exception& e) {
        throw ParseError("arguments of '" + c.verb + "' are not valid JSON: " + e.what());
      }
      if (!c.args.is_object()) throw ParseError("arguments of '" + c.verb + "' must be a JSON object");
    }
  }
  return c;
}

Session::Session(std::shared_ptr<const Topology> topology, CoverageMap coverage, SessionOptions options)
    : topology_(std::move(topology)), coverage_(std::move(coverage)), options_(std::move(options)) {
  if (options_.config_dir) {
    store_ = std::make_shared<ConfigStore>(*options_.config_dir / "engine_config.json");
    store_->clear();
  } else {
    store_ = std::make_shared<ConfigStore>();
  }
  fabric_ = std::make_unique<Fabric>(topology_, store_);
}

namespace {

std::string hex_id(std::size_t n, int width) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%0*zx", width, n);
  return buf;
}

std::string mac_of(std::size_t node, std::size_t port) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "02:00:00:%02zx:%02zx:%02zx", (node >> 8) & 0xff, node & 0xff, port & 0xff);
  return buf;
}

const json& arg(const json& args, const char* key) {
  auto it = args.find(key);
  if (it == args.end() || it->is_null()) throw ValidationError(std::string("missing argument '") + key + "'");
  return *it;
}

std::string arg_string(const json& args, const char* key) {
  const auto& v = arg(args, key);
  if (!v.is_string()) throw ValidationError(std::string("argument '") + key + "' must be a string");
  return v.get<std::string>();
}

NodeId switch_arg(const Topology& t, const json& args) {
  auto it = args.find("switch");
  if (it == args.end()) it = args.find("dpid");
  if (it == args.end() || !it->is_string()) throw ValidationError("missing argument 'switch'");
  NodeId sw(it->get<std::string>());
  if (!t.contains(sw) || t.kind(sw) != NodeKind::Switch) throw UnknownSwitch("unknown switch '" + sw.str() + "'");
  return sw;
}

NodeId engine_arg(const Topology& t, const json& args) {
  NodeId e(arg_string(args, "engine"));
  if (t.contains(e) && t.kind(e) == NodeKind::Switch) {
    auto attached = t.engine_of(e);
    if (!attached) throw UnknownNode("switch '" + e.str() + "' has no engine");
    return *attached;
  }
  if (!t.contains(e) || t.kind(e) != NodeKind::Engine) throw UnknownNode("unknown engine '" + e.str() + "'");
  return e;
}

std::vector<FlowRule> rules_arg(const json& args) {
  std::vector<FlowRule> rules;
  if (auto it = args.find("rules"); it != args.end()) {
    if (!it->is_array()) throw ValidationError("'rules' must be a list");
    for (const auto& r : *it) rules.push_back(FlowRule::from_json(r));
  } else if (auto r = args.find("rule"); r != args.end()) {
    rules.push_back(FlowRule::from_json(*r));
  } else {
    rules.push_back(FlowRule::from_json(args));
  }
  return rules;
}

std::size_t switch_ordinal(const Topology& t, const NodeId& sw) {
  auto switches = t.nodes_of_kind(NodeKind::Switch);
  return static_cast<std::size_t>(std::find(switches.begin(), switches.end(), sw) - switches.begin()) + 1;
}

json port_list(const Topology& t, const NodeId& sw, const StatsReport* stats) {
  json ports = json::array();
  std::size_t port_no = 0;
  const auto ordinal = switch_ordinal(t, sw);
  for (const auto& n : t.neighbors(sw)) {
    ++port_no;
    json p{{"port_no", port_no},
           {"peer", n.str()},
           {"hw_addr", mac_of(ordinal, port_no)},
           {"delay_ms", *t.link_delay(sw, n)}};
    if (stats) {
      const auto& ports_of = stats->switches.at(sw).ports;
      auto it = ports_of.find(n);
      p["rx_packets"] = it == ports_of.end() ? 0 : it->second.rx;
      p["tx_packets"] = it == ports_of.end() ? 0 : it->second.tx;
    }
    ports.push_back(std::move(p));
  }
  return ports;
}

json configs_json(const std::vector<EngineConfig>& configs) {
  json out = json::array();
  for (const auto& c : configs) {
    auto body = c.to_json();
    body["engine"] = c.engine.str();
    body["user"] = c.user;
    out.push_back(std::move(body));
  }
  return out;
}

}  // namespace

CommandResult Session::execute(const Command& command) {
  std::scoped_lock lock(mutex_);
  auto result = dispatch(command);
  if (result.ok && is_mutation(command.verb)) log_.push_back(command);
  return result;
}

CommandResult Session::execute_line(std::string_view line) {
  Command c;
  try {
    c = parse_command_line(line);
  } catch (const Error& e) {
    return CommandResult::failure(e.code(), e.what());
  }
  return execute(c);
}

CommandResult Session::dispatch(const Command& command) {
  try {
    const auto& verb = command.verb;
    const auto& args = command.args;
    const auto& t = *topology_;
    if (verb == "getswitches") {
      json out = json::array();
      for (const auto& sw : t.nodes_of_kind(NodeKind::Switch)) {
        auto engine = t.engine_of(sw);
        out.push_back({{"dpid", hex_id(switch_ordinal(t, sw), 16)},
                       {"name", sw.str()},
                       {"engine", engine ? json(engine->str()) : json(nullptr)},
                       {"ports", port_list(t, sw, nullptr)}});
      }
      return CommandResult::success(std::move(out));
    }
    if (verb == "getlinks") {
      json out = json::array();
      for (const auto& l : t.links()) {
        if (t.kind(l.a) != NodeKind::Switch || t.kind(l.b) != NodeKind::Switch) continue;
        out.push_back({{"src", l.a.str()}, {"dst", l.b.str()}, {"delay_ms", l.delay_ms}});
      }
      return CommandResult::success(std::move(out));
    }
    if (verb == "gethosts") {
      json out = json::array();
      for (const auto& id : t.nodes()) {
        const auto kind = t.kind(id);
        if (kind == NodeKind::Switch || kind == NodeKind::Engine) continue;
        json attached = json::array();
        for (const auto& n : t.neighbors(id)) attached.push_back(n.str());
        out.push_back({{"name", id.str()}, {"kind", std::string(to_string(kind))}, {"switches", std::move(attached)}});
      }
      return CommandResult::success(std::move(out));
    }
    if (verb == "getswdesc") {
      auto sw = switch_arg(t, args);
      return CommandResult::success({{"dpid", hex_id(switch_ordinal(t, sw), 16)},
                                     {"mfr_desc", "flip-sim"},
                                     {"hw_desc", "simulated switch"},
                                     {"sw_desc", "flip dataplane"},
                                     {"serial_num", sw.str()},
                                     {"dp_desc", sw.str()}});
    }
    if (verb == "getflows") {
      auto sw = switch_arg(t, args);
      std::optional<NodeId> dest;
      if (auto it = args.find("final_destination"); it != args.end() && it->is_string()) dest = NodeId(it->get<std::string>());
      json out = json::array();
      for (const auto& r : fabric_->flows(sw)) {
        if (dest && r.rule.match.final_destination != *dest) continue;
        auto j = r.rule.to_json();
        j["packet_count"] = r.hits;
        out.push_back(std::move(j));
      }
      return CommandResult::success(std::move(out));
    }
    if (verb == "gettables") {
      auto sw = switch_arg(t, args);
      auto stats = fabric_->stats();
      const auto& c = stats.switches.at(sw);
      std::uint64_t matched = 0;
      for (auto h : c.rule_hits) matched += h;
      return CommandResult::success(json::array({{{"table_id", 0},
                                                  {"active_count", fabric_->flows(sw).size()},
                                                  {"lookup_count", c.packets},
                                                  {"matched_count", matched}}}));
    }
    if (verb == "getports") {
      auto sw = switch_arg(t, args);
      auto stats = fabric_->stats();
      return CommandResult::success(port_list(t, sw, &stats));
    }
    if (verb == "addflow") return CommandResult::success({{"added", fabric_->install_rules(rules_arg(args))}});
    if (verb == "modflow") return CommandResult::success({{"modified", fabric_->modify_rules(rules_arg(args))}});
    if (verb == "delflow") return CommandResult::success({{"removed", fabric_->delete_rules(rules_arg(args))}});
    if (verb == "delflowall") {
      return CommandResult::success({{"removed", fabric_->delete_all_rules(switch_arg(t, args))}});
    }
    if (verb == "getconfig") {
      auto e = engine_arg(t, args);
      auto doc = store_->to_json();
      return CommandResult::success(doc.contains(e.str()) ? doc.at(e.str()) : json::object());
    }
    if (verb == "getconfig/user") {
      auto e = engine_arg(t, args);
      return CommandResult::success(configs_json(store_->for_user(e, arg_string(args, "user"))));
    }
    if (verb == "setconfig/user") {
      auto e = engine_arg(t, args);
      auto cfg = EngineConfig::from_json(e, arg_string(args, "user"), arg(args, "config"));
      store_->set_config(cfg);
      return CommandResult::success(configs_json({cfg}).front());
    }
    if (verb == "setconfig/user/module") {
      auto e = engine_arg(t, args);
      const auto user = arg_string(args, "user");
      const auto module = arg_string(args, "module");
      auto candidates = store_->for_user(e, user);
      if (auto it = args.find("destination"); it != args.end() && it->is_string()) {
        NodeId d(it->get<std::string>());
        std::erase_if(candidates, [&](const EngineConfig& c) { return c.destination != d; });
      }
      if (candidates.empty()) throw NotFound("no config for user '" + user + "' on '" + e.str() + "'");
      if (candidates.size() > 1) throw ValidationError("several configs match; pass 'destination'");
      auto cfg = candidates.front();
      const auto& value = arg(args, "value");
      auto body = cfg.to_json();
      if (module == "compute" || module == "rate" || module == "jitter" || module == "destination") {
        body[module] = value;
      } else if (module == "sources" || module == "source") {
        body["source"] = value;
      } else {
        throw ValidationError("unknown module '" + module + "'");
      }
      auto updated = EngineConfig::from_json(e, user, body);
      updated.validate();
      if (updated.destination != cfg.destination) store_->remove(e, user, cfg.destination);
      store_->set_config(updated);
      return CommandResult::success(configs_json({updated}).front());
    }
    if (verb == "datapath_a" || verb == "datapath_m") return CommandResult::success(install_request(command));
    if (verb == "stats") {
      std::optional<NodeId> filter;
      if (auto it = args.find("final_destination"); it != args.end() && it->is_string()) filter = NodeId(it->get<std::string>());
      auto report = fabric_->stats(filter).to_json();
      json engines = json::object();
      for (const auto& [id, c] : fabric_->engine_counters()) engines[id.str()] = c.to_json();
      report["engines"] = std::move(engines);
      return CommandResult::success(std::move(report));
    }
    if (verb == "simulate") return CommandResult::success(simulate(args));
    throw UnknownVerb("unknown verb '" + verb + "'");
  } catch (const RejectedByDelay& e) {
    return CommandResult::failure(e.code(), e.what(),
                                  {{"worst_path_delay_ms", e.worst_path_delay_ms()}, {"bound_ms", e.bound_ms()}});
  } catch (const SyntaxError& e) {
    return CommandResult::failure(e.code(), e.what(), {{"line", e.line()}, {"column", e.column()}});
  } catch (const Error& e) {
    return CommandResult::failure(e.code(), e.what());
  } catch (const json::exception& e) {
    return CommandResult::failure("ParseError", e.what());
  } catch (const std::exception& e) {
    return CommandResult::failure("InternalError", e.what());
  }
}

json Session::install_request(const Command& command) {
  const auto text = arg_string(command.args, "request");
  auto request = parse_request(text);
  const bool automated = request.mode == Mode::Automated;
  if (automated != (command.verb == "datapath_a")) {
    throw ValidationError("request text does not match verb '" + command.verb + "'");
  }
  auto p = plan(request, *topology_, coverage_, options_.mode);
  for (const auto& cfg : p.engine_configs) {
    auto existing = store_->get(cfg.engine, cfg.user, cfg.destination);
    if (existing && !(*existing == cfg)) {
      throw CompileError("engine '" + cfg.engine.str() + "' already holds a config for user '" + cfg.user +
                         "' sending to '" + cfg.destination.str() + "'");
    }
  }
  fabric_->install_rules(p.rules);
  for (const auto& cfg : p.engine_configs) store_->set_config(cfg);
  auto body = p.to_json();
  plans_.push_back(std::move(p));
  return body;
}

json Session::simulate(const json& args) {
  Workload w;
  w.period_ms = args.value("period_ms", w.period_ms);
  w.epochs = args.value("epochs", w.epochs);
  w.max_offset_ms = args.value("max_offset_ms", w.max_offset_ms);
  const auto seed = args.value("seed", std::uint64_t{1});
  auto fresh = std::make_unique<Fabric>(topology_, store_);
  for (const auto& sw : topology_->nodes_of_kind(NodeKind::Switch)) {
    std::vector<FlowRule> installed;
    for (const auto& r : fabric_->flows(sw)) installed.push_back(r.rule);
    fresh->install_rules(installed);
  }
  fabric_ = std::move(fresh);
  std::uint64_t salt = 0;
  for (const auto& p : plans_) {
    if (p.mode == Mode::Manual) continue;
    auto trace = generate_workload(w, p.sources, seed + salt++);
    inject_workload(*fabric_, trace, p.destination, p.user);
  }
  // manual chains: raw traffic from every leaf command of the user, addressed to the chain's root
  for (const auto& root : plans_) {
    if (root.mode != Mode::Manual || topology_->kind(root.destination) == NodeKind::Engine) continue;
    std::set<NodeId> leaves;
    for (const auto& p : plans_) {
      if (p.mode != Mode::Manual || p.user != root.user) continue;
      for (const auto& s : p.sources) {
        if (topology_->kind(s) == NodeKind::BaseStation) leaves.insert(s);
      }
    }
    if (leaves.empty()) continue;
    auto trace = generate_workload(w, {leaves.begin(), leaves.end()}, seed + salt++);
    inject_workload(*fabric_, trace, root.destination, root.user);
  }
  fabric_->run();
  return {{"workload", w.to_json()}, {"seed", seed}, {"delivered", fabric_->stats().delivered},
          {"now_ms", fabric_->now()}};
}

std::vector<CommandResult> Session::run_script_text(std::string_view text, bool keep_going) {
  std::vector<CommandResult> results;
  for (const auto& [line_no, line] : split_script(text)) {
    auto r = execute_line(line);
    if (!r.ok) r.message = "line " + std::to_string(line_no) + ": " + r.message;
    results.push_back(std::move(r));
    if (!results.back().ok && !keep_going) break;
  }
  return results;
}

std::vector<CommandResult> Session::run_script(const std::filesystem::path& path, bool keep_going) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read script '" + path.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return run_script_text(buf.str(), keep_going);
}

void Session::replay(const std::vector<Command>& log) {
  for (const auto& c : log) {
    auto r = execute(c);
    if (!r.ok) throw AuditFailure("replay of '" + c.verb + "' failed: " + r.code + ": " + r.message);
  }
}

std::vector<Command> Session::command_log() const {
  std::scoped_lock lock(mutex_);
  return log_;
}

json Session::state_json() const {
  std::scoped_lock lock(mutex_);
  return fabric_->state_json();
}

StatsReport Session::stats(std::optional<NodeId> filter) const {
  std::scoped_lock lock(mutex_);
  return fabric_->stats(std::move(filter));
}

std::vector<DatapathPlan> Session::plans() const {
  std::scoped_lock lock(mutex_);
  return plans_;
}

}  // namespace flip
