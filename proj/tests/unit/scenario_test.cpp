#include <gtest/gtest.h>

#include <nlohmann/json.hpp>

#include "critscene/scenario.hpp"
#include "critscene/xml.hpp"
#include "fixtures.hpp"

namespace critscene {
namespace {

using nlohmann::json;

const Ontology& ont() { return Ontology::builtin(); }

std::vector<std::string> xsd_errors(const std::string& doc) {
  static const xml::Schema schema = xml::Schema::parse(bundled_subset_xsd());
  return schema.validate(xml::parse(doc));
}

TEST(Request, JsonRoundTripAndErrors) {
  const json j = {{"agents", {"Car", "Pedestrian"}}, {"av_action", "AV-Stop"}, {"criticality", "Near"}, {"seed", 7}};
  const ScenarioRequest r = request_from_json(j);
  EXPECT_EQ(r.agents, (std::vector<NodeClass>{NodeClass::Car, NodeClass::Pedestrian}));
  EXPECT_EQ(r.av_action, Relation::AvStop);
  EXPECT_EQ(r.rng_seed, 7u);
  EXPECT_EQ(request_to_json(r), j);

  auto with = [&](const char* key, json v) {
    json b = j;
    b[key] = std::move(v);
    return b;
  };
  EXPECT_THROW(request_from_json(with("agents", json::array())), std::invalid_argument);
  EXPECT_THROW(request_from_json(with("agents", {"VehicleLane"})), std::invalid_argument);
  EXPECT_THROW(request_from_json(with("av_action", "Move")), std::invalid_argument);
  EXPECT_THROW(request_from_json(with("criticality", "Crash")), std::invalid_argument);
  EXPECT_THROW(request_from_json(with("colour", "red")), std::invalid_argument);
  EXPECT_THROW(request_from_json(with("seed", -3)), std::invalid_argument);
}

TEST(Request, EvenlyDistributed) {
  const auto rs = evenly_distributed_requests(30, 7);
  ASSERT_EQ(rs.size(), 30u);
  int counts[3] = {0, 0, 0};
  for (std::size_t i = 0; i < rs.size(); ++i) {
    counts[static_cast<int>(rs[i].criticality)]++;
    EXPECT_LE(rs[i].agents.size(), 2u);
    EXPECT_NO_THROW(rs[i].validate());
  }
  EXPECT_EQ(counts[0], 10);
  EXPECT_EQ(counts[1], 10);
  EXPECT_EQ(counts[2], 10);
  EXPECT_EQ(request_to_json(evenly_distributed_requests(30, 7)[5]), request_to_json(rs[5]));
}

TEST(Map, DefaultLayout) {
  const MapLayout right = default_map(Handedness::Right, false);
  EXPECT_EQ(right.lane(-1).cls, NodeClass::VehicleLane);
  EXPECT_DOUBLE_EQ(right.lane(-1).center, -1.75);
  EXPECT_EQ(right.lane(1).direction, Heading::Oncoming);
  EXPECT_EQ(right.lane(-4).cls, NodeClass::Pavement);
  EXPECT_FALSE(right.find(20));
  EXPECT_FALSE(right.junction_s);
  const MapLayout with = default_map(Handedness::Right, true);
  EXPECT_TRUE(with.find(20));
  EXPECT_TRUE(with.junction_s);
  const MapLayout left = default_map(Handedness::Left, false);
  EXPECT_DOUBLE_EQ(left.lane(1).center, 1.75);
  EXPECT_EQ(left.lane(1).cls, NodeClass::VehicleLane);
  EXPECT_THROW(right.lane(42), CompileError);
}

TEST(Compile, TinyScenario) {
  const ScenarioScript s = graph_to_script(testing::tiny_scenario());
  EXPECT_EQ(s.criticality, Criticality::Near);
  EXPECT_EQ(s.ego.av_action, Relation::AvStop);
  EXPECT_TRUE(s.ego.stop_from);
  ASSERT_EQ(s.actors.size(), 2u);
  const ActorSpec& ped = s.actors[0];
  EXPECT_EQ(ped.cls, NodeClass::Pedestrian);
  EXPECT_EQ(ped.spawn, (LanePoint{-4, 8.0}));
  EXPECT_EQ(ped.goal, (LanePoint{-4, 8.0}));
  EXPECT_FALSE(ped.lane_change_tau);
  EXPECT_DOUBLE_EQ(ped.speeds[0], action_speed(NodeClass::Pedestrian, Relation::Move));
  const ActorSpec& car = s.actors[1];
  EXPECT_EQ(car.spawn.lane, s.ego.start_lane);
  EXPECT_DOUBLE_EQ(car.goal.offset, 20.0);  // last proximity Visible
  EXPECT_EQ(car.heading, Heading::SameDirection);
}

TEST(Compile, ActionSpeeds) {
  EXPECT_DOUBLE_EQ(action_speed(NodeClass::Car, Relation::Stop), 0.0);
  EXPECT_LT(action_speed(NodeClass::Car, Relation::Brake), action_speed(NodeClass::Car, Relation::Move));
  EXPECT_LT(action_speed(NodeClass::Pedestrian, Relation::Move), action_speed(NodeClass::Cyclist, Relation::Move));
}

TEST(Compile, MissingLocationNamesTheActor) {
  auto g = testing::tiny_scenario();
  std::erase_if(g.edges, [](const Edge& e) { return e.src == 2 && e.relation == Relation::IsIn; });
  try {
    graph_to_script(g);
    FAIL() << "expected CompileError";
  } catch (const CompileError& e) {
    EXPECT_NE(std::string(e.what()).find("Car 2"), std::string::npos);
  }
}

TEST(Compile, LaneChangeDetected) {
  auto g = testing::tiny_scenario();
  // Pedestrian steps from the pavement onto the crossing at tau 3.
  g.nodes.push_back({6, 0, NodeClass::PedestrianCrossing});
  for (auto& e : g.edges) {
    if (e.src == 1 && e.relation == Relation::IsIn && e.tau >= 3) e.dst = 6;
  }
  const ScenarioScript s = graph_to_script(g);
  EXPECT_EQ(s.actors[0].goal.lane, 10);
  EXPECT_EQ(s.actors[0].lane_change_tau, 3);
}

TEST(Compile, OvertakingActorStartsBehind) {
  auto g = testing::tiny_scenario();
  g.nodes.push_back({6, 0, NodeClass::OutgoingLane});
  for (auto& e : g.edges) {
    if (e.src == 2 && e.relation == Relation::IsIn) e.dst = 6;
  }
  g.edges.push_back({2, 0, Relation::MovingTowards, 0});
  const ScenarioScript s = graph_to_script(g);
  EXPECT_LT(s.actors[1].spawn.offset, 0.0);
}

TEST(Mirror, InvolutionAndLeftHandedness) {
  for (const auto& g : testing::synthetic_graphs(40, 3)) {
    const ScenarioScript s = graph_to_script(g);
    EXPECT_EQ(mirror(mirror(s)), s);
    CompileOptions left;
    left.handedness = Handedness::Left;
    const ScenarioScript l = graph_to_script(g, left);
    EXPECT_EQ(l, mirror(s));
    EXPECT_EQ(l.handedness, Handedness::Left);
    EXPECT_NO_THROW(l.validate());
  }
  EXPECT_EQ(mirror_relation(Relation::AvTurnLeft), Relation::AvTurnRight);
  EXPECT_EQ(mirror_relation(Relation::IndicateRight), Relation::IndicateLeft);
  EXPECT_EQ(mirror_relation(Relation::Stop), Relation::Stop);
}

TEST(Script, JsonRoundTrip) {
  for (const auto& g : testing::synthetic_graphs(20, 8)) {
    const ScenarioScript s = mirror(graph_to_script(g));
    EXPECT_EQ(script_from_json(script_to_json(s)), s);
  }
  json bad = script_to_json(graph_to_script(testing::tiny_scenario()));
  bad["actors"][0]["spawn"]["lane"] = 77;
  EXPECT_THROW(script_from_json(bad), CompileError);
}

TEST(Emit, ValidDeterministicDocument) {
  const ScenarioScript s = graph_to_script(testing::tiny_scenario());
  const std::string a = emit_openscenario(s);
  EXPECT_EQ(a, emit_openscenario(s));
  EXPECT_TRUE(xsd_errors(a).empty());
  EXPECT_NE(a.find("name=\"actor_1\""), std::string::npos);
  EXPECT_NE(a.find("name=\"ego\""), std::string::npos);
  EXPECT_NE(a.find("straight_road.xodr"), std::string::npos);
  EXPECT_EQ(a.find("2026"), std::string::npos);
  const std::string m = emit_openscenario(mirror(s));
  EXPECT_TRUE(xsd_errors(m).empty());
  EXPECT_NE(m, a);
}

TEST(Emit, SyntheticScenariosValidate) {
  for (const auto& g : testing::synthetic_graphs(30, 21)) {
    EXPECT_TRUE(xsd_errors(emit_openscenario(graph_to_script(g))).empty());
  }
}

TEST(Generate, HandleRequestKeepsConditioning) {
  SeedDatabase db;
  for (const auto& g : testing::synthetic_graphs(20, 2)) db.insert(prune_to_seed(g, false), ont());
  Model model{ModelConfig{}};
  ScenarioRequest r;
  r.agents = {NodeClass::Car};
  r.av_action = Relation::AvTurnLeft;
  r.criticality = Criticality::NearCollision;
  const GeneratedScenario out = handle_request(r, db, model, ont());
  EXPECT_EQ(out.graph.av_action, Relation::AvTurnLeft);
  EXPECT_EQ(out.graph.criticality, Criticality::NearCollision);
  EXPECT_NO_THROW(validate(out.graph, ont()));
  EXPECT_THROW(handle_request(r, SeedDatabase{}, model, ont()), std::runtime_error);
}

}  // namespace
}  // namespace critscene
