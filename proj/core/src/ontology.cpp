#include "critscene/ontology.hpp"

#include <algorithm>

#include <nlohmann/json.hpp>

namespace critscene {
namespace {

constexpr std::array<std::string_view, kNumNodeClasses> kNodeNames = {
    "EGO",          "Pedestrian",        "Car",
    "Cyclist",      "Motorbike",         "Bus",
    "TrafficLight", "VehicleLane",       "OutgoingLane",
    "OutgoingCycleLane", "IncomingLane", "IncomingCycleLane",
    "Pavement",     "Junction",          "PedestrianCrossing",
    "BusStop",      "Parking",           "NearCollision",
    "Near",         "Visible",
};

constexpr std::array<std::string_view, kNumRelations> kRelationNames = {
    "IsIn",        "Move",         "Brake",        "Stop",       "IndicateLeft",
    "IndicateRight", "TurnLeft",   "TurnRight",    "Cross",      "Red",
    "Amber",       "Green",        "MovingAway",   "MovingTowards", "MustStop",
    "NearCollision", "Near",       "Visible",      "AV-Move",    "AV-MoveLeft",
    "AV-MoveRight", "AV-Overtake", "AV-Stop",      "AV-TurnLeft", "AV-TurnRight",
    "Criticality",
};

constexpr std::array<std::string_view, 3> kCriticalityNames = {"Visible", "Near",
                                                               "NearCollision"};

template <typename Enum, std::size_t N>
std::optional<Enum> lookup(const std::array<std::string_view, N>& names, std::string_view s) {
  for (std::size_t i = 0; i < N; ++i) {
    if (names[i] == s) return static_cast<Enum>(i);
  }
  return std::nullopt;
}

}  // namespace

std::string_view to_string(NodeClass c) { return kNodeNames.at(index_of(c)); }
std::string_view to_string(Relation r) { return kRelationNames.at(index_of(r)); }
std::string_view to_string(Criticality c) {
  return kCriticalityNames.at(static_cast<std::size_t>(c));
}

std::optional<NodeClass> node_class_from_string(std::string_view s) {
  return lookup<NodeClass>(kNodeNames, s);
}
std::optional<Relation> relation_from_string(std::string_view s) {
  return lookup<Relation>(kRelationNames, s);
}
std::optional<Criticality> criticality_from_string(std::string_view s) {
  return lookup<Criticality>(kCriticalityNames, s);
}

bool is_dynamic_agent(NodeClass c) { return c >= NodeClass::Pedestrian && c <= NodeClass::Bus; }
bool is_agent(NodeClass c) { return c >= NodeClass::Pedestrian && c <= NodeClass::TrafficLight; }
bool is_location(NodeClass c) { return c >= NodeClass::VehicleLane && c <= NodeClass::Parking; }
bool is_criticality_node(NodeClass c) { return c >= NodeClass::NearCollisionNode; }

bool is_agent_action(Relation r) { return r >= Relation::Move && r <= Relation::Cross; }
bool is_light_state(Relation r) { return r >= Relation::Red && r <= Relation::Green; }
bool is_relative_motion(Relation r) {
  return r == Relation::MovingAway || r == Relation::MovingTowards;
}
bool is_proximity(Relation r) { return r >= Relation::NearCollision && r <= Relation::Visible; }
bool is_av_action(Relation r) { return r >= Relation::AvMove && r <= Relation::AvTurnRight; }

Relation proximity_relation(Criticality c) {
  switch (c) {
    case Criticality::Visible: return Relation::Visible;
    case Criticality::Near: return Relation::Near;
    case Criticality::NearCollision: return Relation::NearCollision;
  }
  throw OntologyError("bad criticality");
}

Criticality criticality_of(Relation proximity) {
  switch (proximity) {
    case Relation::Visible: return Criticality::Visible;
    case Relation::Near: return Criticality::Near;
    case Relation::NearCollision: return Criticality::NearCollision;
    default: throw OntologyError("not a proximity relation: " + std::string(to_string(proximity)));
  }
}

NodeClass criticality_node_class(Criticality c) {
  switch (c) {
    case Criticality::Visible: return NodeClass::VisibleNode;
    case Criticality::Near: return NodeClass::NearNode;
    case Criticality::NearCollision: return NodeClass::NearCollisionNode;
  }
  throw OntologyError("bad criticality");
}

Criticality criticality_of(NodeClass criticality_node) {
  switch (criticality_node) {
    case NodeClass::VisibleNode: return Criticality::Visible;
    case NodeClass::NearNode: return Criticality::Near;
    case NodeClass::NearCollisionNode: return Criticality::NearCollision;
    default:
      throw OntologyError("not a criticality node: " + std::string(to_string(criticality_node)));
  }
}

std::size_t Ontology::key(NodeClass s, Relation r, NodeClass o) {
  return (index_of(s) * kNumRelations + index_of(r)) * kNumNodeClasses + index_of(o);
}

void Ontology::allow(NodeClass s, Relation r, NodeClass o) { triplets_.set(key(s, r, o)); }

bool Ontology::validate_triplet(NodeClass subject, Relation relation, NodeClass object) const {
  return triplets_.test(key(subject, relation, object));
}

std::vector<NodeClass> Ontology::node_class_vocabulary() {
  std::vector<NodeClass> out;
  for (std::size_t i = 0; i < kNumNodeClasses; ++i) out.push_back(static_cast<NodeClass>(i));
  return out;
}

std::vector<Relation> Ontology::relation_vocabulary() {
  std::vector<Relation> out;
  for (std::size_t i = 0; i < kNumRelations; ++i) out.push_back(static_cast<Relation>(i));
  return out;
}

void Ontology::finalize() {
  // Groups must be disjoint.
  std::bitset<kNumRelations> seen;
  for (const auto& g : groups_) {
    for (Relation r : g) {
      if (seen.test(index_of(r))) {
        throw OntologyError("relation " + std::string(to_string(r)) +
                            " appears in more than one exclusion group");
      }
      seen.set(index_of(r));
    }
  }
  for (NodeClass o : node_class_vocabulary()) {
    auto& out = ego_candidates_[index_of(o)];
    out.clear();
    if (o == NodeClass::Ego) continue;
    for (Relation r : relation_vocabulary()) {
      // Conditioning relations are inputs, never predicted.
      if (is_av_action(r) || r == Relation::CriticalityLink) continue;
      if (validate_triplet(NodeClass::Ego, r, o) || validate_triplet(o, r, NodeClass::Ego)) {
        out.push_back(r);
      }
    }
  }
}

const Ontology& Ontology::builtin() {
  static const Ontology ont = [] {
    Ontology o;
    const auto classes = node_class_vocabulary();
    for (NodeClass a : classes) {
      if (is_location(a)) o.allow(NodeClass::Ego, Relation::IsIn, a);
      if (!is_dynamic_agent(a)) continue;
      for (NodeClass loc : classes) {
        if (is_location(loc)) o.allow(a, Relation::IsIn, loc);
      }
      for (Relation r : relation_vocabulary()) {
        if (!is_agent_action(r)) continue;
        if (r == Relation::Cross && a != NodeClass::Pedestrian && a != NodeClass::Cyclist) continue;
        o.allow(a, r, a);
      }
      o.allow(a, Relation::MovingAway, NodeClass::Ego);
      o.allow(a, Relation::MovingTowards, NodeClass::Ego);
      o.allow(a, Relation::MustStop, NodeClass::TrafficLight);
    }
    for (NodeClass a : classes) {
      if (!is_agent(a)) continue;
      o.allow(a, Relation::NearCollision, NodeClass::Ego);
      o.allow(a, Relation::Near, NodeClass::Ego);
      o.allow(a, Relation::Visible, NodeClass::Ego);
    }
    for (Relation r : {Relation::Red, Relation::Amber, Relation::Green}) {
      o.allow(NodeClass::TrafficLight, r, NodeClass::TrafficLight);
    }
    for (Relation r : relation_vocabulary()) {
      if (is_av_action(r)) o.allow(NodeClass::Ego, r, NodeClass::Ego);
    }
    for (NodeClass c : classes) {
      if (is_criticality_node(c)) o.allow(NodeClass::Ego, Relation::CriticalityLink, c);
    }
    o.groups_ = {
        {Relation::MovingAway, Relation::MovingTowards},
        {Relation::NearCollision, Relation::Near, Relation::Visible},
        {Relation::Red, Relation::Amber, Relation::Green},
        {Relation::AvMove, Relation::AvMoveLeft, Relation::AvMoveRight, Relation::AvOvertake,
         Relation::AvStop, Relation::AvTurnLeft, Relation::AvTurnRight},
    };
    o.finalize();
    return o;
  }();
  return ont;
}

Ontology Ontology::from_json(const nlohmann::json& doc) {
  for (const char* k : {"node_classes", "relations", "triplets", "exclusion_groups",
                        "severity_order"}) {
    if (!doc.contains(k)) throw OntologyError(std::string("ontology file missing key '") + k + "'");
  }
  const auto& nodes = doc.at("node_classes");
  if (!nodes.is_array() || nodes.size() != kNumNodeClasses) {
    throw OntologyError("node_classes must list exactly 20 classes");
  }
  for (std::size_t i = 0; i < kNumNodeClasses; ++i) {
    if (nodes[i].get<std::string>() != kNodeNames[i]) {
      throw OntologyError("node_classes[" + std::to_string(i) + "] must be '" +
                          std::string(kNodeNames[i]) + "'");
    }
  }
  const auto& rels = doc.at("relations");
  if (!rels.is_array() || rels.size() != kNumRelations) {
    throw OntologyError("relations must list exactly 26 relations");
  }
  for (std::size_t i = 0; i < kNumRelations; ++i) {
    if (rels[i].get<std::string>() != kRelationNames[i]) {
      throw OntologyError("relations[" + std::to_string(i) + "] must be '" +
                          std::string(kRelationNames[i]) + "'");
    }
  }

  Ontology o;
  auto node = [](const nlohmann::json& j) {
    auto c = node_class_from_string(j.get<std::string>());
    if (!c) throw OntologyError("unknown node class '" + j.get<std::string>() + "'");
    return *c;
  };
  auto rel = [](const nlohmann::json& j) {
    auto r = relation_from_string(j.get<std::string>());
    if (!r) throw OntologyError("unknown relation '" + j.get<std::string>() + "'");
    return *r;
  };
  for (const auto& t : doc.at("triplets")) {
    if (!t.is_array() || t.size() != 3) throw OntologyError("triplet must be [subject, relation, object]");
    o.allow(node(t[0]), rel(t[1]), node(t[2]));
  }
  for (const auto& g : doc.at("exclusion_groups")) {
    std::vector<Relation> group;
    for (const auto& r : g) group.push_back(rel(r));
    o.groups_.push_back(std::move(group));
  }
  const auto& sev = doc.at("severity_order");
  if (!sev.is_array() || sev.size() != 3) {
    throw OntologyError("severity_order must list the three criticality levels");
  }
  std::array<bool, 3> set{};
  for (int rank = 0; rank < 3; ++rank) {
    auto c = criticality_from_string(sev[rank].get<std::string>());
    if (!c) throw OntologyError("unknown criticality '" + sev[rank].get<std::string>() + "'");
    o.severity_[static_cast<std::size_t>(*c)] = rank;
    set[static_cast<std::size_t>(*c)] = true;
  }
  if (!set[0] || !set[1] || !set[2]) throw OntologyError("severity_order must be a permutation");
  o.finalize();
  return o;
}

nlohmann::json Ontology::to_json() const {
  nlohmann::json doc;
  doc["node_classes"] = nlohmann::json::array();
  for (auto n : kNodeNames) doc["node_classes"].push_back(std::string(n));
  doc["relations"] = nlohmann::json::array();
  for (auto r : kRelationNames) doc["relations"].push_back(std::string(r));
  doc["triplets"] = nlohmann::json::array();
  for (NodeClass s : node_class_vocabulary()) {
    for (Relation r : relation_vocabulary()) {
      for (NodeClass o : node_class_vocabulary()) {
        if (validate_triplet(s, r, o)) {
          doc["triplets"].push_back({std::string(to_string(s)), std::string(to_string(r)),
                                     std::string(to_string(o))});
        }
      }
    }
  }
  doc["exclusion_groups"] = nlohmann::json::array();
  for (const auto& g : groups_) {
    nlohmann::json jg = nlohmann::json::array();
    for (Relation r : g) jg.push_back(std::string(to_string(r)));
    doc["exclusion_groups"].push_back(jg);
  }
  std::array<std::string, 3> order;
  for (std::size_t c = 0; c < 3; ++c) {
    order[static_cast<std::size_t>(severity_[c])] = std::string(kCriticalityNames[c]);
  }
  doc["severity_order"] = order;
  return doc;
}

std::vector<Relation> Ontology::ego_candidate_relations(NodeClass object_class) const {
  if (object_class == NodeClass::Ego) {
    throw OntologyError("ego_candidate_relations: object class must not be EGO");
  }
  return ego_candidates_[index_of(object_class)];
}

bool Ontology::ego_is_object(Relation relation, NodeClass other) const {
  return validate_triplet(other, relation, NodeClass::Ego) &&
         !validate_triplet(NodeClass::Ego, relation, other);
}

std::optional<std::size_t> Ontology::exclusion_group_of(Relation r) const {
  for (std::size_t i = 0; i < groups_.size(); ++i) {
    if (std::find(groups_[i].begin(), groups_[i].end(), r) != groups_[i].end()) return i;
  }
  return std::nullopt;
}

int Ontology::severity_rank(Criticality c) const {
  return severity_[static_cast<std::size_t>(c)];
}

Criticality Ontology::most_severe(Criticality a, Criticality b) const {
  return severity_rank(a) >= severity_rank(b) ? a : b;
}

}  // namespace critscene
