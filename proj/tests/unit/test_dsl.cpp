#include <gtest/gtest.h>

#include <random>

#include <nlohmann/json.hpp>

#include "flip/dsl.hpp"
#include "flip/errors.hpp"
#include "flip/topology.hpp"

using namespace flip;

namespace {

const char* kFiveSwitchRequest =
    "datapath_a(max(avg(bs1:bs10),avg(bs11:bs100),max(min(bs101:bs200),min(bs201:bs300))),destination<-user)";

Topology five_switch() { return load_topology_file(FLIP_DATA_DIR "/five_switch_topology.json"); }

Expr random_expr(std::mt19937_64& rng, int depth) {
  static const OpKind ops[] = {OpKind::Min, OpKind::Max, OpKind::Sum, OpKind::Sub, OpKind::Avg, OpKind::Mul};
  auto op = ops[rng() % 6];
  std::size_t n = 2 + rng() % 3;
  std::vector<Expr> args;
  for (std::size_t i = 0; i < n; ++i) {
    if (depth > 0 && rng() % 3 == 0) {
      args.push_back(random_expr(rng, depth - 1));
      continue;
    }
    switch (rng() % 3) {
      case 0: args.push_back(Expr::leaf(SourceTerm::node("bs" + std::to_string(1 + rng() % 300)))); break;
      case 1: {
        auto a = 1 + rng() % 200;
        args.push_back(Expr::leaf(SourceTerm::range("bs" + std::to_string(a), "bs" + std::to_string(a + rng() % 50))));
        break;
      }
      default: args.push_back(Expr::leaf(SourceTerm::region(rng() % 2 ? "Seoul" : "Busan"))); break;
    }
  }
  return Expr::operation(op, std::move(args));
}

}  // namespace

TEST(Dsl, ParsesFiveSwitchRequest) {
  auto r = parse_request(kFiveSwitchRequest);
  EXPECT_EQ(r.mode, Mode::Automated);
  ASSERT_TRUE(r.expr.op);
  EXPECT_EQ(*r.expr.op, OpKind::Max);
  ASSERT_EQ(r.expr.args.size(), 3u);
  EXPECT_EQ(r.expr.args[0].args[0].term, SourceTerm::range("bs1", "bs10"));
  EXPECT_EQ(r.destination, SourceTerm::node("user"));
}

TEST(Dsl, FiveSwitchExpansionCounts) {
  auto g = expand_sources(parse_request(kFiveSwitchRequest), five_switch(), {});
  EXPECT_EQ(g.sources().size(), 300u);
  ASSERT_EQ(g.operations().size(), 6u);
  std::multiset<std::string> kinds;
  for (auto i : g.operations()) kinds.insert(std::string(to_string(*g.node(i).op)));
  EXPECT_EQ(kinds, (std::multiset<std::string>{"max", "avg", "avg", "max", "min", "min"}));
}

TEST(Dsl, SingleSource) {
  auto g = expand_sources(parse_request("datapath_a(max(bs1),destination<-user)"), five_switch(), {});
  EXPECT_EQ(g.operations().size(), 1u);
  EXPECT_EQ(g.sources().size(), 1u);
}

TEST(Dsl, Errors) {
  EXPECT_THROW(parse_request("datapath_a(foo(bs1:bs2),destination<-user)"), UnknownOperation);
  EXPECT_THROW(parse_request("datapath_a(sub(bs1),destination<-user)"), ArityError);
  EXPECT_THROW(parse_request("datapath_a(max(),destination<-user)"), ArityError);
  EXPECT_THROW(parse_request("datapath_a(max(bs1),destination<-user,requirement<-{jitter=30ms})"), Error);
  EXPECT_THROW(parse_request("datapath_a(max(bs1),switch<-sw1,destination<-user)"), Error);
  EXPECT_THROW(parse_request("datapath_m(bs1,compute<-max,destination<-user)"), Error);
  try {
    parse_request("datapath_a(max(bs1,,bs2),destination<-user)");
    FAIL();
  } catch (const SyntaxError& e) {
    EXPECT_EQ(e.line(), 1u);
    EXPECT_GT(e.column(), 1u);
  }
}

TEST(Dsl, MalformedInputsNeverCrash) {
  std::mt19937_64 rng(5);
  const std::string base = kFiveSwitchRequest;
  for (int i = 0; i < 2000; ++i) {
    std::string s = base;
    for (int k = 0; k < 3; ++k) {
      auto pos = rng() % s.size();
      switch (rng() % 3) {
        case 0: s.erase(pos, 1); break;
        case 1: s.insert(pos, 1, "(),:<-{}[]\"x9 "[rng() % 14]); break;
        default: s = s.substr(0, pos); break;
      }
      if (s.empty()) s = "d";
    }
    try {
      parse_request(s);
    } catch (const Error&) {
    }
  }
}

TEST(Dsl, RequirementsAndUnicodeArrow) {
  auto r = parse_request("datapath_a(sum(bs1,bs2),destination\xE2\x86\x90user,"
                         "requirement<-{delay=10ms,rate=1s,jitter=5ms,datatype=vector},user<-alice)");
  EXPECT_EQ(r.requirements.delay_ms, 10.0);
  EXPECT_EQ(r.requirements.rate_ms, 1000.0);
  EXPECT_EQ(r.requirements.jitter_ms, 5.0);
  EXPECT_EQ(r.requirements.data_type, DataType::Vector);
  EXPECT_EQ(r.user, "alice");
}

TEST(Dsl, ManualEngineSources) {
  auto r = parse_request("datapath_m(sw4[engine],sw3[engine],switch<-sw5,compute<-max,destination<-sw3[engine])");
  EXPECT_EQ(r.mode, Mode::Manual);
  EXPECT_EQ(r.switch_id, NodeId("sw5"));
  auto g = expand_sources(r, five_switch(), {});
  EXPECT_EQ(g.source_nodes(), (std::vector<NodeId>{NodeId("e-sw4"), NodeId("e-sw3")}));
  EXPECT_EQ(resolve_destination(r.destination, five_switch()), NodeId("e-sw3"));
  EXPECT_THROW(parse_request("datapath_a(max(sw4[engine]),destination<-user)"), Error);
}

TEST(Dsl, RoundTripRandom) {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 500; ++i) {
    Request r;
    r.expr = random_expr(rng, 2);
    r.destination = SourceTerm::node(rng() % 2 ? "user" : "cloud");
    if (rng() % 2) r.requirements.delay_ms = double(1 + rng() % 100);
    if (rng() % 2) r.requirements.rate_ms = double(100 * (1 + rng() % 20));
    if (rng() % 2) r.requirements.jitter_ms = double(rng() % 26);
    if (rng() % 3 == 0) r.requirements.data_type = DataType::Scalar;
    if (rng() % 3 == 0) r.user = "u" + std::to_string(rng() % 10);
    auto text = to_canonical_string(r);
    auto back = parse_request(text);
    EXPECT_EQ(back, r) << text;
    EXPECT_EQ(to_canonical_string(back), text);
  }
}

TEST(Dsl, RangeExpansion) {
  auto t = five_switch();
  auto g = expand_sources(parse_request("datapath_a(min(bs7:bs7),destination<-user)"), t, {});
  EXPECT_EQ(g.source_nodes(), std::vector<NodeId>{NodeId("bs7")});
  EXPECT_THROW(expand_sources(parse_request("datapath_a(min(bs9:bs3),destination<-user)"), t, {}), EmptyRange);
  EXPECT_THROW(expand_sources(parse_request("datapath_a(min(bs400),destination<-user)"), t, {}), UnknownNode);
  auto g2 = expand_sources(parse_request("datapath_a(max(bs61:65),destination<-user)"), t, {});
  EXPECT_EQ(g2.source_nodes().size(), 5u);
}

TEST(Dsl, Coverage) {
  auto cov = CoverageMap::load_file(FLIP_DATA_DIR "/coverage.json");
  auto seoul = translate_coverage("Seoul", cov);
  ASSERT_EQ(seoul.size(), 10u);
  EXPECT_EQ(seoul.front(), NodeId("bs1"));
  EXPECT_THROW(translate_coverage("chicago", cov), UnknownRegion);
  CoverageMap small;
  small.add_region("Seoul", {NodeId("bs1"), NodeId("bs2")});
  small.add_region("Nowhere", {});
  EXPECT_TRUE(translate_coverage("Nowhere", small).empty());
  auto g = expand_sources(parse_request("datapath_a(avg(\"Seoul\"),destination<-user)"), five_switch(), small);
  EXPECT_EQ(g.source_nodes(), (std::vector<NodeId>{NodeId("bs1"), NodeId("bs2")}));
  EXPECT_EQ(CoverageMap::from_json(cov.to_json()).to_json(), cov.to_json());
}

TEST(Dsl, SplitScript) {
  auto lines = split_script("# header\n\ndatapath_a(max(bs1),destination<-user)  # trailing\n  getswitches\n");
  ASSERT_EQ(lines.size(), 2u);
  EXPECT_EQ(lines[0].first, 3u);
  EXPECT_EQ(lines[1].second, "getswitches");
}
