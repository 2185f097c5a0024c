#include <gtest/gtest.h>

#include <filesystem>
#include <set>
#include <thread>

#include "critscene/seed_database.hpp"
#include "fixtures.hpp"

namespace critscene {
namespace {

using C = NodeClass;

const Ontology& ont() { return Ontology::builtin(); }

/// Database seed with the given dynamic agents on one vehicle lane.
TemporalGraph seed_with(const std::vector<NodeClass>& agents) {
  TemporalGraph g;
  g.flavor = Flavor::DatabaseSeed;
  g.nodes.push_back({0, 0, C::Ego});
  g.nodes.push_back({1, 0, C::VehicleLane});
  int uid = 2;
  for (std::size_t i = 0; i < agents.size(); ++i) {
    g.nodes.push_back({uid, static_cast<int>(i) + 1, agents[i]});
    for (int t = 0; t < kFramesPerScenario; ++t) g.edges.push_back({uid, 1, Relation::IsIn, t});
    ++uid;
  }
  return g;
}

TEST(Multiset, KeyAndJaccard) {
  const auto a = normalize_multiset({C::Pedestrian, C::Car, C::Car});
  EXPECT_EQ(multiset_key(a), "Pedestrian,Car,Car");  // ontology class order
  EXPECT_EQ(multiset_key({}), "");
  const auto b = normalize_multiset({C::Car, C::Bus});
  // |{Car}| / |{Car, Car, Pedestrian, Bus}|
  EXPECT_DOUBLE_EQ(multiset_jaccard(a, b), 1.0 / 4.0);
  EXPECT_DOUBLE_EQ(multiset_jaccard({}, {}), 1.0);
  EXPECT_TRUE(multiset_includes(a, normalize_multiset({C::Car, C::Car})));
  EXPECT_FALSE(multiset_includes(b, normalize_multiset({C::Car, C::Car})));
}

TEST(Multiset, AgentMultisetIgnoresLights) {
  auto g = seed_with({C::Car, C::Pedestrian});
  g.nodes.push_back({9, 5, C::TrafficLight});
  EXPECT_EQ(agent_multiset(g), normalize_multiset({C::Pedestrian, C::Car}));
}

class SeedDatabaseTest : public ::testing::Test {
 protected:
  void SetUp() override {
    db.insert(seed_with({C::Car}), ont());                  // 0
    db.insert(seed_with({C::Car}), ont());                  // 1
    db.insert(seed_with({C::Car, C::Pedestrian}), ont());   // 2
    db.insert(seed_with({C::Bus, C::Cyclist}), ont());      // 3
  }
  SeedDatabase db;
};

TEST_F(SeedDatabaseTest, ExactMatchesAreUniform) {
  std::set<std::size_t> seen;
  for (std::uint64_t s = 0; s < 64; ++s) {
    const auto r = db.sample({C::Car}, s);
    EXPECT_EQ(r.match, SeedMatch::Exact);
    seen.insert(r.index);
  }
  EXPECT_EQ(seen, (std::set<std::size_t>{0, 1}));
}

TEST_F(SeedDatabaseTest, SupersetFallback) {
  const auto r = db.sample({C::Pedestrian}, 3);
  EXPECT_EQ(r.match, SeedMatch::Superset);
  EXPECT_EQ(r.index, 2u);
}

TEST_F(SeedDatabaseTest, JaccardFallbackPrefersLowestIndexOnTies) {
  const auto r = db.sample({C::Bus, C::Motorbike}, 3);
  EXPECT_EQ(r.match, SeedMatch::Jaccard);
  EXPECT_EQ(r.index, 3u);
  // Nothing shares a class with Motorbike: all similarities are 0.
  EXPECT_EQ(db.sample({C::Motorbike}, 1).index, 0u);
}

TEST_F(SeedDatabaseTest, SamplingIsSeeded) {
  for (std::uint64_t s = 0; s < 10; ++s) {
    EXPECT_EQ(db.sample({C::Car}, s).index, db.sample({C::Car}, s).index);
  }
}

TEST_F(SeedDatabaseTest, SaveLoadRoundTrip) {
  const auto dir = std::filesystem::temp_directory_path() / "critscene_seed_db_test";
  db.save(dir);
  const SeedDatabase back = SeedDatabase::load(dir, ont());
  ASSERT_EQ(back.size(), db.size());
  for (std::size_t i = 0; i < db.size(); ++i) EXPECT_EQ(back.entry(i), db.entry(i));
  std::filesystem::remove_all(dir);
}

TEST_F(SeedDatabaseTest, RejectsWrongFlavor) {
  EXPECT_THROW(db.insert(testing::tiny_scenario(), ont()), GraphError);
}

TEST_F(SeedDatabaseTest, EmptyDatabaseCannotSample) {
  SeedDatabase empty;
  EXPECT_THROW(empty.sample({C::Car}, 0), std::runtime_error);
}

TEST_F(SeedDatabaseTest, ConcurrentReadsDuringInserts) {
  std::vector<std::thread> readers;
  for (int t = 0; t < 4; ++t) {
    readers.emplace_back([this, t] {
      for (int i = 0; i < 200; ++i) {
        const auto r = db.sample({C::Car}, static_cast<std::uint64_t>(t * 1000 + i));
        EXPECT_LT(r.index, db.size());
      }
    });
  }
  for (int i = 0; i < 50; ++i) db.insert(seed_with({C::Car}), ont());
  for (auto& th : readers) th.join();
  EXPECT_EQ(db.size(), 54u);
}

}  // namespace
}  // namespace critscene
