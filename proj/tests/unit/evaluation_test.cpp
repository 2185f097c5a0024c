#include <gtest/gtest.h>

#include <nlohmann/json.hpp>

#include "critscene/evaluation.hpp"
#include "fixtures.hpp"

namespace critscene {
namespace {

TEST(Metrics, HandComputedBundle) {
  const int pred[] = {1, 1, 0, 0, 1, 0};
  const int gold[] = {1, 0, 0, 1, 1, 0};
  const MetricBundle m = classification_metrics(pred, gold);
  EXPECT_EQ(m.tp, 2u);
  EXPECT_EQ(m.fp, 1u);
  EXPECT_EQ(m.tn, 2u);
  EXPECT_EQ(m.fn, 1u);
  EXPECT_DOUBLE_EQ(m.precision, 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(m.recall, 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(m.f1, 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(m.accuracy, 4.0 / 6.0);
}

TEST(Metrics, UndefinedRatiosAreFlagged) {
  const int zeros[] = {0, 0, 0};
  const MetricBundle m = classification_metrics(zeros, zeros);
  EXPECT_EQ(m.precision, 0.0);
  EXPECT_TRUE(m.precision_undefined);
  EXPECT_TRUE(m.recall_undefined);
  EXPECT_TRUE(m.f1_undefined);
  EXPECT_EQ(m.accuracy, 1.0);
}

TEST(Metrics, RejectsBadInput) {
  const int a[] = {1, 0};
  const int b[] = {1};
  EXPECT_THROW(classification_metrics(a, b), std::invalid_argument);
  EXPECT_THROW(classification_metrics(std::span<const int>{}, std::span<const int>{}),
               std::invalid_argument);
}

TEST(Metrics, TableAndJson) {
  const MetricBundle m = metrics_from_counts(3, 1, 5, 1);
  const auto j = metrics_to_json(m);
  EXPECT_DOUBLE_EQ(j.at("f1").get<double>(), 0.75);
  EXPECT_EQ(j.at("tp").get<int>(), 3);
  const std::string t = metrics_table({{"ours", m}});
  EXPECT_NE(t.find("F1"), std::string::npos);
  EXPECT_NE(t.find("0.750"), std::string::npos);
}

TEST(Statements, PublishedTemplate) {
  TemporalGraph g;
  g.nodes = {{0, 0, NodeClass::Ego}, {1, 1, NodeClass::Pedestrian}};
  g.frame_times = {42, 47, 52, 57, 62};
  const Edge e{1, 0, Relation::Near, 0};
  g.edges.push_back(e);
  EXPECT_EQ(edge_statement(g, e), "At time 42: Pedestrian 1 is near the ego-vehicle.");
  EXPECT_EQ(graph_to_statements(g), StatementSet{"At time 42: Pedestrian 1 is near the ego-vehicle."});
}

TEST(Statements, RoundTripThroughParser) {
  const auto g = testing::tiny_scenario();
  for (const auto& e : g.edges) {
    const std::string s = edge_statement(g, e);
    const auto fact = parse_statement(s);
    ASSERT_TRUE(fact) << s;
    EXPECT_EQ(fact->relation, e.relation) << s;
    EXPECT_EQ(fact->src_cls, g.node(e.src).cls) << s;
    EXPECT_EQ(fact->time, g.frame_times[e.tau]) << s;
  }
  EXPECT_FALSE(parse_statement("At noon: nothing happens."));
  EXPECT_FALSE(parse_statement("At time x: Pedestrian 1 is near the ego-vehicle."));
}

TEST(Statements, FactualCorrectnessHandValues) {
  const StatementSet a = {"s1", "s2", "s3", "s4", "s5"};
  const StatementSet b = {"s1", "s2", "s3", "s4"};
  // precision 4/5, recall 1: F1 = 8/9.
  EXPECT_NEAR(factual_correctness(a, b), 8.0 / 9.0, 1e-12);
  EXPECT_NEAR(factual_correctness({"x", "y"}, {"y", "z"}), 0.5, 1e-12);
  EXPECT_NEAR(factual_correctness({"x"}, {"y"}), 0.0, 1e-12);
  EXPECT_EQ(factual_correctness({}, {}), 1.0);
  EXPECT_EQ(factual_correctness({"x"}, {}), 0.0);
}

TEST(Statements, AnswerCorrectnessUsesScorer) {
  const StatementSet p = {"At time 1: Car 2 is near the ego-vehicle."};
  const StatementSet g = {"At time 1: Car 2 is visible to the ego-vehicle."};
  const auto ac = answer_correctness(p, g);
  EXPECT_EQ(ac.factual, 0.0);
  EXPECT_GT(ac.semantic, 0.0);
  EXPECT_LT(ac.semantic, 1.0);
  const auto fixed = answer_correctness(p, g, [](const StatementSet&, const StatementSet&) { return 0.25; });
  EXPECT_EQ(fixed.semantic, 0.25);
  EXPECT_EQ(token_jaccard(p, p), 1.0);
}

TEST(Scr, GroupsAndOverall) {
  using C = Criticality;
  const std::vector<std::pair<C, C>> runs = {
      {C::Visible, C::Visible}, {C::Visible, C::Near},          {C::Near, C::Near},
      {C::Near, C::Near},       {C::NearCollision, C::Visible},
  };
  const ScrReport r = scenario_consistency_rate(runs);
  EXPECT_DOUBLE_EQ(*r.groups[0].rate, 50.0);
  EXPECT_DOUBLE_EQ(*r.groups[1].rate, 100.0);
  EXPECT_DOUBLE_EQ(*r.groups[2].rate, 0.0);
  EXPECT_DOUBLE_EQ(*r.overall.rate, 60.0);
  EXPECT_EQ(r.overall.total, 5u);

  const std::vector<std::pair<C, C>> only_near = {{C::Near, C::Near}};
  const ScrReport n = scenario_consistency_rate(only_near);
  EXPECT_FALSE(n.groups[0].rate);
  EXPECT_TRUE(scr_to_json(n).at("groups").at("Visible").at("scr").is_null());
  EXPECT_THROW(scenario_consistency_rate(std::span<const std::pair<C, C>>{}), std::invalid_argument);
  EXPECT_NE(scr_table({{"normal", r}}).find("Near Collision"), std::string::npos);
}

}  // namespace
}  // namespace critscene
