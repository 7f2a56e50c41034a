#pragma once

#include <atomic>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "flip/dataplane.hpp"
#include "flip/dsl.hpp"
#include "flip/planner.hpp"
#include "flip/topology.hpp"

namespace flip {

struct Command {
  std::string verb;
  nlohmann::json args = nlohmann::json::object();

  nlohmann::json to_json() const { return {{"verb", verb}, {"args", args}}; }
  static Command from_json(const nlohmann::json& j);
};

struct CommandResult {
  bool ok = true;
  nlohmann::json body;
  std::string code;     // error class name when !ok
  std::string message;  // human-readable error

  nlohmann::json to_json() const;
  static CommandResult success(nlohmann::json body) { return {true, std::move(body), {}, {}}; }
  static CommandResult failure(std::string code, std::string message, nlohmann::json body = nullptr) {
    return {false, std::move(body), std::move(code), std::move(message)};
  }
};

/// Verbs from the controller command table, plus the "stats" and "simulate"
/// extensions.
const std::vector<std::string>& known_verbs();
bool is_mutation(std::string_view verb);

struct SessionOptions {
  PlanMode mode = PlanMode::Flip;
  /// When set, engine configs persist to <dir>/engine_config.json.
  std::optional<std::filesystem::path> config_dir;
};

/// Command facade over one topology, fabric and config store. Every
/// command runs under one lock, so concurrent callers see a total order;
/// successful mutations are appended to the command log.
class Session {
 public:
  Session(std::shared_ptr<const Topology> topology, CoverageMap coverage = {}, SessionOptions options = {});

  CommandResult execute(const Command& command);
  /// A `datapath_a(...)`/`datapath_m(...)` request, or `verb` optionally
  /// followed by a JSON object of arguments.
  CommandResult execute_line(std::string_view line);
  std::vector<CommandResult> run_script_text(std::string_view text, bool keep_going);
  /// IoError when the file cannot be read.
  std::vector<CommandResult> run_script(const std::filesystem::path& path, bool keep_going);

  /// Executes logged commands in order; AuditFailure when one fails.
  void replay(const std::vector<Command>& log);
  std::vector<Command> command_log() const;

  const Topology& topology() const noexcept { return *topology_; }
  const CoverageMap& coverage() const noexcept { return coverage_; }
  PlanMode mode() const noexcept { return options_.mode; }
  nlohmann::json state_json() const;
  StatsReport stats(std::optional<NodeId> filter = std::nullopt) const;
  std::vector<DatapathPlan> plans() const;

 private:
  CommandResult dispatch(const Command& command);
  nlohmann::json install_request(const Command& command);
  nlohmann::json simulate(const nlohmann::json& args);

  mutable std::mutex mutex_;
  std::shared_ptr<const Topology> topology_;
  CoverageMap coverage_;
  SessionOptions options_;
  std::shared_ptr<ConfigStore> store_;
  std::unique_ptr<Fabric> fabric_;
  std::vector<DatapathPlan> plans_;
  std::vector<Command> log_;
};

Command parse_command_line(std::string_view line);

/// Newline-delimited JSON over a Unix stream socket: each request line is
/// {"verb", "args"} or {"line": "<script line>"}; each reply is one
/// CommandResult. Returns when `stop` becomes true.
void serve(Session& session, const std::filesystem::path& socket_path, const std::atomic<bool>& stop);

/// Sends one request line to a running server and returns the reply.
nlohmann::json send_request(const std::filesystem::path& socket_path, const nlohmann::json& request);

}  // namespace flip
