#include <gtest/gtest.h>

#include <algorithm>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "critscene/ingestion.hpp"
#include "fixtures.hpp"

namespace critscene {
namespace {

using nlohmann::json;

json frame_doc(int index) {
  return {{"frame_index", index},
          {"av_action", "AV-Move"},
          {"ego_location", {{"cls", "VehicleLane"}, {"id", 0}}},
          {"entities",
           {{{"track_id", 1},
             {"cls", "Car"},
             {"location", {{"cls", "IncomingLane"}, {"id", 3}}},
             {"actions", {"Move"}},
             {"motion", "MovingTowards"},
             {"distance_m", 12.5}}}}};
}

TEST(Ingestion, ProximityThresholds) {
  EXPECT_THROW(proximity_from_distance(0.0), SchemaError);
  EXPECT_THROW(proximity_from_distance(-1.0), SchemaError);
  EXPECT_EQ(proximity_from_distance(0.001), Criticality::NearCollision);
  EXPECT_EQ(proximity_from_distance(4.999), Criticality::NearCollision);
  EXPECT_EQ(proximity_from_distance(5.0), Criticality::Near);
  EXPECT_EQ(proximity_from_distance(10.0), Criticality::Near);
  EXPECT_EQ(proximity_from_distance(10.001), Criticality::Visible);
}

TEST(Ingestion, ParsesAndSortsFrames) {
  const json doc = {{"video_id", "v1"}, {"frames", {frame_doc(10), frame_doc(5)}}};
  const AnnotatedVideo v = parse_annotations(doc);
  EXPECT_EQ(v.video_id, "v1");
  ASSERT_EQ(v.frames.size(), 2u);
  EXPECT_EQ(v.frames[0].frame_index, 5);
  const auto& e = v.frames[0].entities.at(0);
  EXPECT_EQ(e.cls, NodeClass::Car);
  EXPECT_EQ(e.location->cls, NodeClass::IncomingLane);
  EXPECT_EQ(e.location->instance, 3);
  EXPECT_EQ(e.relative_motion, Relation::MovingTowards);
  EXPECT_DOUBLE_EQ(*e.distance_m, 12.5);
}

TEST(Ingestion, JsonRoundTrip) {
  const json doc = {{"video_id", "v1"}, {"frames", {frame_doc(0), frame_doc(5)}}};
  const AnnotatedVideo v = parse_annotations(doc);
  const AnnotatedVideo back = parse_annotations(annotations_to_json(v));
  EXPECT_EQ(annotations_to_json(back), annotations_to_json(v));
  std::istringstream in(annotations_to_json(v).dump());
  EXPECT_EQ(annotations_to_json(parse_annotations(in)), annotations_to_json(v));
}

TEST(Ingestion, SchemaErrors) {
  auto bad = [](auto mutate) {
    json doc = {{"video_id", "v"}, {"frames", {frame_doc(0)}}};
    mutate(doc["frames"][0]["entities"][0]);
    return doc;
  };
  EXPECT_THROW(parse_annotations(bad([](json& e) { e["cls"] = "Tram"; })), SchemaError);
  EXPECT_THROW(parse_annotations(bad([](json& e) { e.erase("track_id"); })), SchemaError);
  EXPECT_THROW(parse_annotations(bad([](json& e) { e["proximity"] = "Near"; })), SchemaError);
  EXPECT_THROW(parse_annotations(bad([](json& e) { e["distance_m"] = "far"; })), SchemaError);
  EXPECT_THROW(parse_annotations(bad([](json& e) { e["actions"] = {"Fly"}; })), SchemaError);
  EXPECT_THROW(parse_annotations(json{{"video_id", "v"}}), SchemaError);
  std::istringstream garbage("{not json");
  EXPECT_THROW(parse_annotations(garbage), SchemaError);
}

TEST(Ingestion, WindowsDownsampleAndDropTail) {
  std::vector<FrameAnnotation> frames(57);
  for (int i = 0; i < 57; ++i) frames[i].frame_index = i;
  const auto w = window_scenarios(frames, 5, 5);
  // 57 frames -> 12 kept (0, 5, ..., 55) -> two full windows.
  ASSERT_EQ(w.size(), 2u);
  EXPECT_EQ(w[0].front().frame_index, 0);
  EXPECT_EQ(w[0].back().frame_index, 20);
  EXPECT_EQ(w[1].front().frame_index, 25);
  EXPECT_TRUE(window_scenarios(std::vector<FrameAnnotation>(4), 1, 5).empty());
}

TEST(Ingestion, SplitIsGroupedAndDisjoint) {
  std::vector<ScenarioWindow> windows;
  const Relation actions[] = {Relation::AvMove, Relation::AvStop, Relation::AvTurnLeft};
  const int counts[] = {50, 20, 7};
  for (int a = 0; a < 3; ++a) {
    for (int i = 0; i < counts[a]; ++i) windows.push_back({"w", actions[a], {}});
  }
  const DatasetSplit s = split_dataset(windows, 3);
  // floor(0.2 n) val and floor(0.1 n) test per action: 10+4+1 and 5+2+0.
  EXPECT_EQ(s.val.size(), 15u);
  EXPECT_EQ(s.test.size(), 7u);
  EXPECT_EQ(s.train.size(), windows.size() - 22);
  std::set<std::size_t> all;
  for (const auto* part : {&s.train, &s.val, &s.test}) all.insert(part->begin(), part->end());
  EXPECT_EQ(all.size(), windows.size());

  const DatasetSplit again = split_dataset(windows, 3);
  EXPECT_EQ(again.train, s.train);
  EXPECT_EQ(again.test, s.test);
}

TEST(Synthetic, DeterministicAndValid) {
  SynthConfig cfg;
  cfg.n_scenarios = 60;
  cfg.rng_seed = 11;
  const auto a = generate_synthetic(cfg);
  const auto b = generate_synthetic(cfg);
  ASSERT_EQ(a.size(), 60u);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(annotations_to_json(a[i]), annotations_to_json(b[i]));
    ASSERT_EQ(a[i].frames.size(), static_cast<std::size_t>(kFramesPerScenario));
    const TemporalGraph g = testing::graph_of(a[i]);
    EXPECT_NO_THROW(validate(g, Ontology::builtin()));
    const auto agents = g.agent_classes();
    const auto dynamic = std::count_if(agents.begin(), agents.end(), is_dynamic_agent);
    EXPECT_GE(dynamic, cfg.min_agents);
    EXPECT_LE(dynamic, cfg.max_agents);
  }
  cfg.rng_seed = 12;
  EXPECT_NE(annotations_to_json(generate_synthetic(cfg)[0]), annotations_to_json(a[0]));
}

TEST(Synthetic, RespectsWeights) {
  SynthConfig cfg;
  cfg.n_scenarios = 40;
  cfg.action_weights = {0, 0, 0, 0, 1, 0, 0};
  cfg.criticality_weights = {0, 0, 1};
  for (const auto& v : generate_synthetic(cfg)) {
    const TemporalGraph g = testing::graph_of(v);
    EXPECT_EQ(g.av_action, Relation::AvStop);
    EXPECT_EQ(g.criticality, Criticality::NearCollision);
  }
}

TEST(Synthetic, RejectsBadConfig) {
  SynthConfig cfg;
  cfg.min_agents = 3;
  cfg.max_agents = 2;
  EXPECT_THROW(generate_synthetic(cfg), std::invalid_argument);
  cfg = SynthConfig{};
  cfg.action_weights = {0, 0, 0, 0, 0, 0, 0};
  EXPECT_THROW(generate_synthetic(cfg), std::invalid_argument);
}

}  // namespace
}  // namespace critscene
