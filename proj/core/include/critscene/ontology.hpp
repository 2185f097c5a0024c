#pragma once

#include <array>
#include <bitset>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace critscene {

/// Entity classes of the traffic ontology: agents, locations and the three
/// criticality nodes. The underlying value is the stable one-hot index.
enum class NodeClass : std::uint8_t {
  Ego,
  Pedestrian,
  Car,
  Cyclist,
  Motorbike,
  Bus,
  TrafficLight,
  VehicleLane,
  OutgoingLane,
  OutgoingCycleLane,
  IncomingLane,
  IncomingCycleLane,
  Pavement,
  Junction,
  PedestrianCrossing,
  BusStop,
  Parking,
  NearCollisionNode,
  NearNode,
  VisibleNode,
};

inline constexpr std::size_t kNumNodeClasses = 20;

/// Relation vocabulary. The underlying value is the stable one-hot index.
enum class Relation : std::uint8_t {
  IsIn,
  Move,
  Brake,
  Stop,
  IndicateLeft,
  IndicateRight,
  TurnLeft,
  TurnRight,
  Cross,
  Red,
  Amber,
  Green,
  MovingAway,
  MovingTowards,
  MustStop,
  NearCollision,
  Near,
  Visible,
  AvMove,
  AvMoveLeft,
  AvMoveRight,
  AvOvertake,
  AvStop,
  AvTurnLeft,
  AvTurnRight,
  CriticalityLink,
};

inline constexpr std::size_t kNumRelations = 26;

/// Scenario severity, ordered from least to most severe.
enum class Criticality : std::uint8_t { Visible = 0, Near = 1, NearCollision = 2 };

class OntologyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string_view to_string(NodeClass c);
std::string_view to_string(Relation r);
std::string_view to_string(Criticality c);

std::optional<NodeClass> node_class_from_string(std::string_view s);
std::optional<Relation> relation_from_string(std::string_view s);
std::optional<Criticality> criticality_from_string(std::string_view s);

constexpr std::size_t index_of(NodeClass c) { return static_cast<std::size_t>(c); }
constexpr std::size_t index_of(Relation r) { return static_cast<std::size_t>(r); }

bool is_dynamic_agent(NodeClass c);  // Pedestrian, Car, Cyclist, Motorbike, Bus
bool is_agent(NodeClass c);          // dynamic agents plus TrafficLight (not EGO)
bool is_location(NodeClass c);
bool is_criticality_node(NodeClass c);

bool is_agent_action(Relation r);
bool is_light_state(Relation r);
bool is_relative_motion(Relation r);
bool is_proximity(Relation r);
bool is_av_action(Relation r);

Relation proximity_relation(Criticality c);
Criticality criticality_of(Relation proximity);
NodeClass criticality_node_class(Criticality c);
Criticality criticality_of(NodeClass criticality_node);

/// The traffic-domain schema: vocabularies, valid triplets, mutual-exclusion
/// groups and the proximity severity order. Immutable once built.
class Ontology {
 public:
  /// The compiled-in table.
  static const Ontology& builtin();

  /// Loads an override document with keys `node_classes`, `relations`,
  /// `triplets`, `exclusion_groups`, `severity_order`. The vocabularies must
  /// match the compiled enums name-for-name and in order.
  static Ontology from_json(const nlohmann::json& doc);
  nlohmann::json to_json() const;

  static std::vector<NodeClass> node_class_vocabulary();
  static std::vector<Relation> relation_vocabulary();

  bool validate_triplet(NodeClass subject, Relation relation, NodeClass object) const;

  /// Relations the model may predict between EGO and an entity of class
  /// `object_class`. Throws for EGO.
  std::vector<Relation> ego_candidate_relations(NodeClass object_class) const;

  /// True when an ego candidate with this relation is stored as an edge from
  /// the entity to EGO (relative motion, proximity); false when EGO is the
  /// subject (IsIn).
  bool ego_is_object(Relation relation, NodeClass other) const;

  /// Index of the exclusion group containing `r`, if any.
  std::optional<std::size_t> exclusion_group_of(Relation r) const;
  const std::vector<std::vector<Relation>>& exclusion_groups() const { return groups_; }

  /// Severity rank of a criticality: Visible 0 < Near 1 < NearCollision 2.
  int severity_rank(Criticality c) const;
  Criticality most_severe(Criticality a, Criticality b) const;

  std::size_t triplet_count() const { return triplets_.count(); }

 private:
  Ontology() = default;
  static std::size_t key(NodeClass s, Relation r, NodeClass o);
  void allow(NodeClass s, Relation r, NodeClass o);
  void finalize();

  std::bitset<kNumNodeClasses * kNumRelations * kNumNodeClasses> triplets_;
  std::vector<std::vector<Relation>> groups_;
  std::array<int, 3> severity_{0, 1, 2};
  std::array<std::vector<Relation>, kNumNodeClasses> ego_candidates_;
};

}  // namespace critscene
