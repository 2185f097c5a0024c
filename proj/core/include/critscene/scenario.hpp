#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "critscene/model.hpp"
#include "critscene/ontology.hpp"
#include "critscene/scene_graph.hpp"
#include "critscene/seed_database.hpp"

namespace critscene {

class CompileError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ------------------------------------------------------------------ request

struct ScenarioRequest {
  std::vector<NodeClass> agents;  // dynamic agents, duplicates allowed
  Relation av_action = Relation::AvMove;
  Criticality criticality = Criticality::Visible;
  std::uint64_t rng_seed = 0;

  /// Throws std::invalid_argument on an empty or non-agent multiset, or a
  /// non-AV action.
  void validate() const;
};

/// `{"agents":["Car","Pedestrian"],"av_action":"AV-Stop","criticality":"Near","seed":7}`
ScenarioRequest request_from_json(const nlohmann::json& j);
nlohmann::json request_to_json(const ScenarioRequest& r);

/// `n` requests cycling Visible, Near, NearCollision with agents and AV
/// actions drawn from `rng_seed`.
std::vector<ScenarioRequest> evenly_distributed_requests(std::size_t n, std::uint64_t rng_seed,
                                                         int max_agents = 2);

struct GeneratedScenario {
  TemporalGraph graph;  // Scenario flavor
  std::size_t seed_index = 0;
  SeedMatch match = SeedMatch::Exact;
};

/// Samples a seed for the requested agents, conditions it on the requested
/// AV action and criticality, and predicts the EGO relations.
GeneratedScenario handle_request(const ScenarioRequest& req, const SeedDatabase& db, Model& model,
                                 const Ontology& ont);

// ---------------------------------------------------------------------- map

enum class Handedness { Right, Left };
enum class Heading { SameDirection, Oncoming, Crossing };

std::string_view to_string(Handedness h);
std::string_view to_string(Heading h);

struct Lane {
  int id = 0;
  NodeClass cls = NodeClass::VehicleLane;  // location class the lane realises
  Heading direction = Heading::SameDirection;
  double center = 0.0;  // lateral position of the centreline (m)
  double width = 3.5;

  friend bool operator==(const Lane&, const Lane&) = default;
};

/// Straight road along s. Lane ids follow the sign convention of the
/// handedness: traffic with the ego runs on negative ids under Right.
struct MapLayout {
  std::vector<Lane> lanes;
  std::optional<double> junction_s;  // longitudinal position of the junction
  double crossing_s = 0.0;

  const Lane* find(int id) const;
  const Lane& lane(int id) const;

  friend bool operator==(const MapLayout&, const MapLayout&) = default;
};

/// The parametric layout: two same-direction and two oncoming lanes, a cycle
/// lane and a pavement on each side, one pedestrian crossing and, when
/// requested, one junction.
MapLayout default_map(Handedness h, bool with_junction);

// ------------------------------------------------------------------- script

struct SpawnBands {
  double near_collision = 4.0;
  double near = 8.0;
  double visible = 20.0;

  double of(Criticality c) const;
  /// Throws std::invalid_argument unless 0 < nc < near < visible.
  void validate() const;
};

struct LanePoint {
  int lane = 0;
  double offset = 0.0;  // signed longitudinal offset from the ego start (m)

  friend bool operator==(const LanePoint&, const LanePoint&) = default;
};

struct ActorSpec {
  int track_id = 0;
  NodeClass cls = NodeClass::Car;
  LanePoint spawn;
  LanePoint goal;
  Heading heading = Heading::SameDirection;
  /// Dominant action per tau; nullopt where the graph records none.
  std::array<std::optional<Relation>, kFramesPerScenario> timeline{};
  /// Target speed per tau (m/s) derived from the timeline.
  std::array<double, kFramesPerScenario> speeds{};
  /// Tau at which the actor moves to the goal lane; set iff the lanes differ.
  std::optional<int> lane_change_tau;

  friend bool operator==(const ActorSpec&, const ActorSpec&) = default;
};

struct EgoSpec {
  Relation av_action = Relation::AvMove;
  int start_lane = -1;
  /// Lane changes as (tau, target lane) in tau order.
  std::vector<std::pair<int, int>> lane_changes;
  /// Tau from which the ego aims to stand still (AV-Stop).
  std::optional<int> stop_from;
  /// Tau from which the ego slows for a turn, and the speed cap it uses.
  std::optional<int> slow_from;
  double slow_speed = 4.0;

  friend bool operator==(const EgoSpec&, const EgoSpec&) = default;
};

struct ScenarioScript {
  MapLayout map;
  EgoSpec ego;
  std::vector<ActorSpec> actors;
  Criticality criticality = Criticality::Visible;
  Handedness handedness = Handedness::Right;
  double frame_interval = 5.0 / 12.0;  // seconds per tau
  double start_s = 50.0;               // ego start on the road reference line

  /// Checks that every referenced lane exists and track ids are unique.
  /// Throws CompileError.
  void validate() const;

  friend bool operator==(const ScenarioScript&, const ScenarioScript&) = default;
};

nlohmann::json script_to_json(const ScenarioScript& s);
ScenarioScript script_from_json(const nlohmann::json& j);

struct CompileOptions {
  SpawnBands bands;
  Handedness handedness = Handedness::Right;
  double frame_interval = 5.0 / 12.0;
};

/// Nominal speed (m/s) of an agent class performing `action`.
double action_speed(NodeClass cls, std::optional<Relation> action);

/// Compiles a scenario graph into a script. Throws CompileError naming the
/// actor when a dynamic agent has no IsIn edge.
ScenarioScript graph_to_script(const TemporalGraph& g, const CompileOptions& opts = {});

/// Left/right mirror image: lane ids and lateral geometry are negated and
/// the left/right action labels swapped. mirror(mirror(s)) == s.
ScenarioScript mirror(const ScenarioScript& s);
Relation mirror_relation(Relation r);

/// OpenSCENARIO-subset document; "%.3f" numbers, no timestamps, so equal
/// scripts give identical bytes.
std::string emit_openscenario(const ScenarioScript& s);

/// Text of the schema the emitter targets.
std::string_view bundled_subset_xsd();

}  // namespace critscene
