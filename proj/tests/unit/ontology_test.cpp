#include <gtest/gtest.h>

#include <algorithm>
#include <fstream>

#include <nlohmann/json.hpp>

#include "critscene/ontology.hpp"

namespace critscene {
namespace {

TEST(Ontology, VocabularySizesMatchFeatureWidths) {
  // One-hot widths feed MLP_n [22, ...] (20 classes + 2 positional) and
  // MLP_e [27, ...] (26 relations + tau).
  EXPECT_EQ(Ontology::node_class_vocabulary().size(), 20u);
  EXPECT_EQ(Ontology::relation_vocabulary().size(), 26u);
}

TEST(Ontology, NamesRoundTrip) {
  for (NodeClass c : Ontology::node_class_vocabulary()) {
    EXPECT_EQ(node_class_from_string(to_string(c)), c);
  }
  for (Relation r : Ontology::relation_vocabulary()) {
    EXPECT_EQ(relation_from_string(to_string(r)), r);
  }
  for (Criticality c : {Criticality::Visible, Criticality::Near, Criticality::NearCollision}) {
    EXPECT_EQ(criticality_from_string(to_string(c)), c);
  }
  EXPECT_FALSE(node_class_from_string("Tram"));
  EXPECT_FALSE(relation_from_string(""));
}

TEST(Ontology, TripletValidity) {
  const auto& o = Ontology::builtin();
  EXPECT_TRUE(o.validate_triplet(NodeClass::Pedestrian, Relation::Near, NodeClass::Ego));
  EXPECT_TRUE(o.validate_triplet(NodeClass::Ego, Relation::IsIn, NodeClass::VehicleLane));
  EXPECT_TRUE(o.validate_triplet(NodeClass::TrafficLight, Relation::Red, NodeClass::TrafficLight));
  EXPECT_FALSE(o.validate_triplet(NodeClass::Ego, Relation::Near, NodeClass::Pedestrian));
  EXPECT_FALSE(o.validate_triplet(NodeClass::VehicleLane, Relation::IsIn, NodeClass::Ego));
  EXPECT_FALSE(o.validate_triplet(NodeClass::TrafficLight, Relation::MovingTowards, NodeClass::Ego));
}

TEST(Ontology, EgoCandidatesPerClass) {
  const auto& o = Ontology::builtin();
  const std::vector<Relation> agent = {Relation::MovingAway, Relation::MovingTowards,
                                       Relation::NearCollision, Relation::Near, Relation::Visible};
  EXPECT_EQ(o.ego_candidate_relations(NodeClass::Car), agent);
  EXPECT_EQ(o.ego_candidate_relations(NodeClass::TrafficLight),
            (std::vector<Relation>{Relation::NearCollision, Relation::Near, Relation::Visible}));
  EXPECT_EQ(o.ego_candidate_relations(NodeClass::Pavement), std::vector<Relation>{Relation::IsIn});
  EXPECT_TRUE(o.ego_candidate_relations(NodeClass::NearNode).empty());
  EXPECT_THROW(o.ego_candidate_relations(NodeClass::Ego), OntologyError);
  EXPECT_TRUE(o.ego_is_object(Relation::Near, NodeClass::Bus));
  EXPECT_FALSE(o.ego_is_object(Relation::IsIn, NodeClass::Junction));
}

TEST(Ontology, ExclusionGroups) {
  const auto& o = Ontology::builtin();
  const auto prox = o.exclusion_group_of(Relation::Near);
  ASSERT_TRUE(prox);
  EXPECT_EQ(o.exclusion_group_of(Relation::Visible), prox);
  EXPECT_EQ(o.exclusion_group_of(Relation::NearCollision), prox);
  EXPECT_NE(o.exclusion_group_of(Relation::MovingAway), prox);
  EXPECT_EQ(o.exclusion_group_of(Relation::MovingAway), o.exclusion_group_of(Relation::MovingTowards));
  EXPECT_FALSE(o.exclusion_group_of(Relation::IsIn));
  // Every relation belongs to at most one group.
  for (Relation r : Ontology::relation_vocabulary()) {
    int hits = 0;
    for (const auto& g : o.exclusion_groups()) hits += std::count(g.begin(), g.end(), r);
    EXPECT_LE(hits, 1) << to_string(r);
  }
}

TEST(Ontology, SeverityOrder) {
  const auto& o = Ontology::builtin();
  EXPECT_LT(o.severity_rank(Criticality::Visible), o.severity_rank(Criticality::Near));
  EXPECT_LT(o.severity_rank(Criticality::Near), o.severity_rank(Criticality::NearCollision));
  EXPECT_EQ(o.most_severe(Criticality::Near, Criticality::Visible), Criticality::Near);
  EXPECT_EQ(o.most_severe(Criticality::Near, Criticality::NearCollision), Criticality::NearCollision);
  for (Criticality c : {Criticality::Visible, Criticality::Near, Criticality::NearCollision}) {
    EXPECT_EQ(criticality_of(proximity_relation(c)), c);
    EXPECT_EQ(criticality_of(criticality_node_class(c)), c);
  }
}

TEST(Ontology, JsonRoundTrip) {
  const auto doc = Ontology::builtin().to_json();
  const Ontology back = Ontology::from_json(doc);
  EXPECT_EQ(back.to_json(), doc);
  EXPECT_EQ(back.triplet_count(), Ontology::builtin().triplet_count());
}

TEST(Ontology, RejectsReorderedVocabulary) {
  auto doc = Ontology::builtin().to_json();
  auto& classes = doc["node_classes"];
  std::swap(classes[1], classes[2]);
  EXPECT_THROW(Ontology::from_json(doc), OntologyError);
}

TEST(Ontology, RejectsUnknownTripletNames) {
  auto doc = Ontology::builtin().to_json();
  doc["triplets"].push_back({"Ego", "Flies", "Junction"});
  EXPECT_THROW(Ontology::from_json(doc), OntologyError);
}

TEST(Ontology, ClassPredicatesPartition) {
  for (NodeClass c : Ontology::node_class_vocabulary()) {
    const int kinds = (c == NodeClass::Ego) + is_agent(c) + is_location(c) + is_criticality_node(c);
    EXPECT_EQ(kinds, 1) << to_string(c);
  }
}

TEST(Ontology, BundledDocumentMatchesBuiltin) {
  std::ifstream in(CRITSCENE_DATA_DIR "/ontology.json");
  ASSERT_TRUE(in);
  const auto doc = nlohmann::json::parse(in);
  EXPECT_EQ(doc, Ontology::builtin().to_json());
  EXPECT_EQ(Ontology::from_json(doc).to_json(), doc);
}

}  // namespace
}  // namespace critscene
