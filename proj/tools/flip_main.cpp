// flip: command-line front end for planning, installing and simulating datapaths.

#include <csignal>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "flip/control.hpp"
#include "flip/errors.hpp"
#include "flip/harness.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

std::atomic<bool> g_stop{false};

fs::path config_dir() {
  const char* env = std::getenv("FLIP_CONFIG_DIR");
  return env && *env ? fs::path(env) : fs::path(".flip");
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw flip::IoError("cannot read '" + p.string() + "'");
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::trunc);
  if (!out) throw flip::IoError("cannot write '" + p.string() + "'");
  out << text;
}

flip::PlanMode parse_mode(const std::string& m) {
  if (m == "flip") return flip::PlanMode::Flip;
  if (m == "baseline") return flip::PlanMode::Baseline;
  throw flip::ValidationError("mode must be 'flip' or 'baseline'");
}

struct Stored {
  json session;
  std::unique_ptr<flip::Session> live;
};

// Rebuilds the session recorded in the config directory and replays its log.
Stored open_session(std::optional<std::string> mode_override = std::nullopt) {
  const auto dir = config_dir();
  const auto session_file = dir / "session.json";
  if (!fs::exists(session_file)) throw flip::NotFound("no session in '" + dir.string() + "'; run 'flip load' first");
  Stored s;
  s.session = json::parse(read_file(session_file));
  if (mode_override) s.session["mode"] = *mode_override;
  auto topology = std::make_shared<const flip::Topology>(flip::load_topology_file(s.session.at("topology").get<std::string>()));
  flip::CoverageMap coverage;
  if (s.session.contains("coverage") && s.session["coverage"].is_string()) {
    coverage = flip::CoverageMap::load_file(s.session["coverage"].get<std::string>());
  }
  flip::SessionOptions options;
  options.mode = parse_mode(s.session.value("mode", "flip"));
  options.config_dir = dir;
  s.live = std::make_unique<flip::Session>(topology, std::move(coverage), options);
  std::vector<flip::Command> log;
  std::ifstream in(dir / "command_log.jsonl");
  for (std::string line; std::getline(in, line);) {
    if (!line.empty()) log.push_back(flip::Command::from_json(json::parse(line)));
  }
  s.live->replay(log);
  return s;
}

void save_session(const Stored& s) {
  const auto dir = config_dir();
  write_file(dir / "session.json", s.session.dump(2) + "\n");
  std::string log;
  for (const auto& c : s.live->command_log()) log += c.to_json().dump() + "\n";
  write_file(dir / "command_log.jsonl", log);
}

int print_results(const std::vector<flip::CommandResult>& results) {
  int failures = 0;
  for (const auto& r : results) {
    std::cout << r.to_json().dump() << '\n';
    failures += r.ok ? 0 : 1;
  }
  return failures == 0 ? 0 : 1;
}

json parse_cmd_args(const std::vector<std::string>& raw) {
  if (raw.size() == 1 && !raw.front().empty() && raw.front().front() == '{') return json::parse(raw.front());
  json args = json::object();
  for (const auto& kv : raw) {
    auto eq = kv.find('=');
    if (eq == std::string::npos) throw flip::ValidationError("argument '" + kv + "' is not key=value");
    const auto key = kv.substr(0, eq);
    const auto value = kv.substr(eq + 1);
    json parsed = json::parse(value, nullptr, false);
    args[key] = parsed.is_discarded() ? json(value) : parsed;
  }
  return args;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"flip: in-network aggregation datapaths over a simulated SDN fabric"};
  app.require_subcommand(1);

  std::string topology_path, coverage_path, load_mode = "flip";
  auto* load = app.add_subcommand("load", "Start a session on a topology file");
  load->add_option("topology", topology_path, "Topology document")->required()->check(CLI::ExistingFile);
  load->add_option("--coverage", coverage_path, "Coverage region document")->check(CLI::ExistingFile);
  load->add_option("--mode", load_mode, "flip or baseline");

  std::string script_path;
  std::optional<std::string> run_mode;
  bool keep_going = false;
  auto* run = app.add_subcommand("run", "Execute a request script against the session");
  run->add_option("script", script_path, "Script with one request or command per line")->required();
  run->add_option("--mode", run_mode, "flip or baseline");
  run->add_flag("--keep-going", keep_going, "Continue after a failing line");

  std::string verb;
  std::vector<std::string> verb_args;
  auto* cmd = app.add_subcommand("cmd", "Execute one command verb");
  cmd->add_option("verb", verb, "Command verb")->required();
  cmd->add_option("args", verb_args, "JSON object or key=value pairs");

  std::string filter_dest, csv_path;
  bool simulate = false;
  std::uint64_t sim_seed = 1;
  std::size_t sim_epochs = 100;
  auto* stats = app.add_subcommand("stats", "Print fabric counters");
  stats->add_option("--filter-dest", filter_dest, "Count only packets addressed to this node");
  stats->add_option("--csv", csv_path, "Write switch,id,count CSV here");
  stats->add_flag("--simulate", simulate, "Run the default workload over installed datapaths first");
  stats->add_option("--seed", sim_seed, "Workload seed for --simulate");
  stats->add_option("--epochs", sim_epochs, "Epochs for --simulate");

  std::string socket_path = (config_dir() / "flip.sock").string();
  auto* serve = app.add_subcommand("serve", "Serve newline-delimited JSON commands on a Unix socket");
  serve->add_option("--socket", socket_path, "Socket path");

  std::string request_text, plan_topology, plan_coverage, plan_mode = "flip";
  auto* plan_cmd = app.add_subcommand("plan", "Print the plan for one request without installing it");
  plan_cmd->add_option("request", request_text, "datapath_a(...) or datapath_m(...)")->required();
  plan_cmd->add_option("--topology", plan_topology, "Topology document")->required()->check(CLI::ExistingFile);
  plan_cmd->add_option("--coverage", plan_coverage, "Coverage region document")->check(CLI::ExistingFile);
  plan_cmd->add_option("--mode", plan_mode, "flip or baseline");

  std::string suite = "r1r9", out_dir = "report";
  std::uint64_t bench_seed = 1;
  std::size_t bench_epochs = 100;
  auto* bench = app.add_subcommand("bench", "Run the FLIP vs baseline comparison suite");
  bench->add_option("--suite", suite, "Request suite")->check(CLI::IsMember({"r1r9"}));
  bench->add_option("--seed", bench_seed, "Workload seed");
  bench->add_option("--epochs", bench_epochs, "Epochs per request");
  bench->add_option("--out", out_dir, "Output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*load) {
      const auto dir = config_dir();
      fs::create_directories(dir);
      auto topology = flip::load_topology_file(topology_path);
      parse_mode(load_mode);
      json session{{"topology", fs::absolute(topology_path).string()}, {"mode", load_mode}};
      if (!coverage_path.empty()) {
        flip::CoverageMap::load_file(coverage_path);
        session["coverage"] = fs::absolute(coverage_path).string();
      }
      write_file(dir / "session.json", session.dump(2) + "\n");
      write_file(dir / "command_log.jsonl", "");
      std::error_code ec;
      fs::remove(dir / "engine_config.json", ec);
      std::cout << json{{"status", "ok"},
                        {"body",
                         {{"nodes", topology.size()},
                          {"switches", topology.nodes_of_kind(flip::NodeKind::Switch).size()},
                          {"base_stations", topology.nodes_of_kind(flip::NodeKind::BaseStation).size()}}}}
                       .dump()
                << '\n';
      return 0;
    }
    if (*run) {
      auto s = open_session(run_mode);
      auto results = s.live->run_script(script_path, keep_going);
      save_session(s);
      return print_results(results);
    }
    if (*cmd) {
      auto s = open_session();
      auto result = s.live->execute(flip::Command{verb, parse_cmd_args(verb_args)});
      save_session(s);
      return print_results({result});
    }
    if (*stats) {
      auto s = open_session();
      if (simulate) {
        auto r = s.live->execute(flip::Command{"simulate", {{"seed", sim_seed}, {"epochs", sim_epochs}}});
        if (!r.ok) return print_results({r});
      }
      std::optional<flip::NodeId> filter;
      if (!filter_dest.empty()) filter = flip::NodeId(filter_dest);
      auto report = s.live->stats(filter);
      if (!csv_path.empty()) {
        write_file(csv_path, report.to_csv());
      } else {
        std::cout << report.to_json().dump(2) << '\n';
      }
      write_file(config_dir() / "stats.json", report.to_json().dump(2) + "\n");
      return 0;
    }
    if (*serve) {
      auto s = open_session();
      std::signal(SIGINT, [](int) { g_stop = true; });
      std::signal(SIGTERM, [](int) { g_stop = true; });
      std::cerr << "serving on " << socket_path << '\n';
      flip::serve(*s.live, socket_path, g_stop);
      save_session(s);
      return 0;
    }
    if (*plan_cmd) {
      auto topology = flip::load_topology_file(plan_topology);
      flip::CoverageMap coverage;
      if (!plan_coverage.empty()) coverage = flip::CoverageMap::load_file(plan_coverage);
      auto p = flip::build_plan(flip::parse_request(request_text), topology, coverage, parse_mode(plan_mode));
      std::cout << p.to_json().dump(2) << '\n';
      return p.admitted ? 0 : 1;
    }
    if (*bench) {
      flip::Workload w;
      w.epochs = bench_epochs;
      auto topology = std::make_shared<const flip::Topology>(flip::build_experiment_topology());
      auto report = flip::run_suite(topology, flip::requests_r1_r9(), w, bench_seed);
      flip::export_report(report, out_dir);
      std::cout << flip::request_totals_csv(report);
      return 0;
    }
  } catch (const flip::Error& e) {
    std::cerr << "error: " << e.code() << ": " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
