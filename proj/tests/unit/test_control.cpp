#include <gtest/gtest.h>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <thread>

#include <unistd.h>

#include "flip/control.hpp"
#include "flip/errors.hpp"
#include "flip/harness.hpp"

using namespace flip;
using nlohmann::json;

namespace {

std::shared_ptr<const Topology> experiment() {
  return std::make_shared<const Topology>(build_experiment_topology());
}

std::string read(const std::filesystem::path& p) {
  std::ifstream in(p);
  return {std::istreambuf_iterator<char>(in), {}};
}

const char* kR1 = "datapath_a(max(bs1:bs10),destination<-user)";

}  // namespace

TEST(Session, GetSwitches) {
  Session s(experiment());
  auto r = s.execute({"getswitches", json::object()});
  ASSERT_TRUE(r.ok);
  ASSERT_EQ(r.body.size(), 12u);
  EXPECT_EQ(r.body[0]["dpid"].get<std::string>().size(), 16u);
  EXPECT_EQ(s.execute({"getswdesc", {{"dpid", "sw3"}}}).body["mfr_desc"], "flip-sim");
  EXPECT_TRUE(s.execute({"getlinks", json::object()}).ok);
  EXPECT_TRUE(s.execute({"gethosts", json::object()}).ok);
  EXPECT_TRUE(s.execute({"getports", {{"switch", "sw1"}}}).ok);
  EXPECT_TRUE(s.execute({"gettables", {{"switch", "sw1"}}}).ok);
}

TEST(Session, Errors) {
  Session s(experiment());
  auto r = s.execute({"frobnicate", json::object()});
  EXPECT_FALSE(r.ok);
  EXPECT_EQ(r.code, "UnknownVerb");
  EXPECT_EQ(r.to_json()["status"], "error");
  EXPECT_EQ(s.execute({"getflows", {{"switch", "sw99"}}}).code, "UnknownSwitch");
  EXPECT_EQ(s.execute_line("datapath_a(max(bs1:bs10),destination<-user").code, "SyntaxError");
  EXPECT_EQ(s.execute({"datapath_m", {{"request", kR1}}}).code, "ValidationError");
  EXPECT_TRUE(s.command_log().empty());
}

TEST(Session, DelFlowAllOnEmpty) {
  Session s(experiment());
  auto r = s.execute({"delflowall", {{"switch", "sw7"}}});
  ASSERT_TRUE(r.ok);
  EXPECT_EQ(r.body["removed"], 0);
}

TEST(Session, FlowsMatchCompiledPlan) {
  Session s(experiment());
  auto r = s.execute_line(kR1);
  ASSERT_TRUE(r.ok) << r.message;
  auto plan = build_plan(parse_request(kR1), s.topology(), {});
  std::map<std::string, json> expected;
  for (const auto& rule : plan.rules) expected[rule.switch_id.str()].push_back(rule.to_json());
  for (const auto& [sw, rules] : expected) {
    auto flows = s.execute({"getflows", {{"switch", sw}}}).body;
    for (auto& f : flows) f.erase("packet_count");
    EXPECT_EQ(flows, rules) << sw;
  }
  EXPECT_EQ(r.body["placements"].size(), 1u);
}

TEST(Session, RejectedInstallsNothing) {
  Session s(experiment());
  auto before = s.state_json();
  auto r = s.execute_line("datapath_a(max(bs1:bs10),destination<-user,requirement<-{delay=0.001ms})");
  EXPECT_FALSE(r.ok);
  EXPECT_EQ(r.code, "RejectedByDelay");
  EXPECT_GT(r.body["worst_path_delay_ms"].get<double>(), 0.0);
  EXPECT_EQ(s.state_json(), before);
}

TEST(Session, Scripts) {
  Session s(experiment());
  EXPECT_TRUE(s.run_script_text("", false).empty());
  auto results = s.run_script(FLIP_DATA_DIR "/r1_r9.flip", false);
  ASSERT_EQ(results.size(), 9u);
  for (const auto& r : results) EXPECT_TRUE(r.ok) << r.message;

  Session t(experiment());
  std::string text;
  for (const auto& nr : requests_r1_r9()) text += nr.text + "\n";
  auto lines = split_script(text);
  std::string broken;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    auto line = lines[i].second;
    if (i == 4) line = "datapath_a(max(bs1:bs10,destination<-user)";
    else line.insert(line.size() - 1, ",user<-u" + std::to_string(i));
    broken += line + "\n";
  }
  auto mixed = t.run_script_text(broken, true);
  ASSERT_EQ(mixed.size(), 9u);
  EXPECT_EQ(std::count_if(mixed.begin(), mixed.end(), [](const auto& r) { return r.ok; }), 8);
  EXPECT_NE(mixed[4].message.find("line 5"), std::string::npos);
  EXPECT_EQ(Session(experiment()).run_script_text(broken, false).size(), 5u);
  EXPECT_THROW(s.run_script("/nonexistent/script.flip", false), IoError);
}

TEST(Session, Configs) {
  Session s(experiment());
  auto set = s.execute({"setconfig/user",
                        {{"engine", "sw1"},
                         {"user", "alice"},
                         {"config", {{"compute", "sum"}, {"source", {"bs1", "bs2"}}, {"destination", "user"}, {"rate", 1000}}}}});
  ASSERT_TRUE(set.ok) << set.message;
  auto get = s.execute({"getconfig/user", {{"engine", "e-sw1"}, {"user", "alice"}}});
  ASSERT_EQ(get.body.size(), 1u);
  EXPECT_EQ(get.body[0]["compute"], "sum");
  auto mod = s.execute({"setconfig/user/module", {{"engine", "e-sw1"}, {"user", "alice"}, {"module", "rate"}, {"value", 500}}});
  ASSERT_TRUE(mod.ok) << mod.message;
  EXPECT_EQ(s.execute({"getconfig", {{"engine", "e-sw1"}}}).body["alice"][0]["rate"], 500);
  EXPECT_FALSE(s.execute({"setconfig/user/module", {{"engine", "e-sw1"}, {"user", "alice"}, {"module", "jitter"}, {"value", 40}}}).ok);
  EXPECT_FALSE(s.execute({"setconfig/user", {{"engine", "e-sw1"}, {"user", "x"}, {"config", {{"compute", "sum"}, {"source", json::array()}, {"destination", "user"}}}}}).ok);
}

TEST(Session, ReplayReproducesState) {
  Session s(experiment());
  s.run_script(FLIP_DATA_DIR "/r1_r9.flip", false);
  s.execute({"addflow", {{"rules", json::array({FlowRule{NodeId("sw7"), {NodeId("cloud"), {NodeId("bs21")}},
                                                         FlowAction::forward_to(NodeId("sw3"))}.to_json()})}}});
  s.execute({"delflowall", {{"switch", "sw12"}}});
  Session fresh(experiment());
  fresh.replay(s.command_log());
  EXPECT_EQ(fresh.state_json().dump(), s.state_json().dump());
  std::vector<Command> bad{{"getflows", {{"switch", "nope"}}}};
  EXPECT_THROW(fresh.replay(bad), AuditFailure);
}

TEST(Session, ConcurrentClientsLinearize) {
  Session s(experiment());
  auto client = [&](int id) {
    for (int i = 0; i < 20; ++i) {
      FlowRule r{NodeId("sw" + std::to_string(5 + id)), {NodeId("cloud"), {NodeId("bs" + std::to_string(id * 10 + 1 + i % 10))}},
                 FlowAction::forward_to(NodeId(id < 3 ? "sw2" : "sw3"))};
      s.execute({"addflow", {{"rules", json::array({r.to_json()})}}});
      if (i % 5 == 4) s.execute({"delflowall", {{"switch", "sw" + std::to_string(5 + id)}}});
      s.execute({"getflows", {{"switch", "sw1"}}});
    }
  };
  std::vector<std::thread> threads;
  for (int id = 0; id < 4; ++id) threads.emplace_back(client, id);
  for (auto& t : threads) t.join();
  EXPECT_EQ(s.command_log().size(), 4u * 24u);
  Session fresh(experiment());
  fresh.replay(s.command_log());
  EXPECT_EQ(fresh.state_json(), s.state_json());
}

TEST(Session, SimulateManualChain) {
  auto t = std::make_shared<const Topology>(load_topology_file(FLIP_DATA_DIR "/five_switch_topology.json"));
  Session s(t);
  for (const auto& r : s.run_script(FLIP_DATA_DIR "/five_switch_manual.flip", false)) ASSERT_TRUE(r.ok) << r.message;
  auto sim = s.execute({"simulate", {{"epochs", 4}, {"seed", 3}}});
  ASSERT_TRUE(sim.ok) << sim.message;
  EXPECT_EQ(sim.body["delivered"], 4);
  auto stats = s.stats();
  EXPECT_EQ(stats.dropped, 0u);
}

TEST(Session, PersistsEngineConfig) {
  auto dir = std::filesystem::temp_directory_path() / "flip_control_cfg";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  Session s(experiment(), {}, SessionOptions{PlanMode::Flip, dir});
  ASSERT_TRUE(s.execute_line(kR1).ok);
  auto doc = json::parse(read(dir / "engine_config.json"));
  EXPECT_TRUE(doc.contains("e-sw5"));
}

TEST(Server, SocketRoundTrip) {
  auto path = std::filesystem::temp_directory_path() / ("flip_test_" + std::to_string(::getpid()) + ".sock");
  Session s(experiment());
  std::atomic<bool> stop{false};
  std::thread server([&] { serve(s, path, stop); });
  json reply;
  for (int attempt = 0; attempt < 100; ++attempt) {
    try {
      reply = send_request(path, {{"verb", "getswitches"}, {"args", json::object()}});
      break;
    } catch (const std::exception&) {
      std::this_thread::sleep_for(std::chrono::milliseconds(20));
    }
  }
  EXPECT_EQ(reply["status"], "ok");
  EXPECT_EQ(reply["body"].size(), 12u);
  auto line = send_request(path, {{"line", kR1}});
  EXPECT_EQ(line["status"], "ok");
  stop = true;
  server.join();
  EXPECT_EQ(s.command_log().size(), 1u);
}
