#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "critscene/evaluation.hpp"
#include "critscene/scenario.hpp"

namespace critscene {

struct EgoPolicy {
  std::string name = "normal";
  double target_speed = 8.0;   // m/s
  double ttc_threshold = 3.0;  // s; braking starts below this time-to-collision
  double deceleration = 3.0;   // m/s^2, comfortable braking

  static EgoPolicy normal() { return {"normal", 8.0, 3.0, 3.0}; }
  static EgoPolicy cautious() { return {"cautious", 6.0, 4.0, 2.5}; }
  static EgoPolicy aggressive() { return {"aggressive", 10.0, 1.5, 4.5}; }
  /// "normal", "cautious" or "aggressive".
  static EgoPolicy named(const std::string& name);

  /// Throws std::invalid_argument unless every parameter is positive.
  void validate() const;
};

struct PlaybackConfig {
  double dt = 0.05;
  double horizon = 15.0;
  double ego_acceleration = 2.0;    // m/s^2
  double actor_acceleration = 3.0;  // m/s^2, both ways
  double lateral_speed = 1.5;       // m/s during lane changes
  /// Actors closer than this laterally and ahead of the ego are on its path.
  double conflict_lateral = 10.0;
  double collision_distance = 1.0;
  /// Relative spread of per-actor target speeds drawn from the run seed;
  /// zero keeps every run noise-free.
  double speed_noise = 0.0;

  void validate() const;
};

struct TrajectorySample {
  double time = 0.0;
  std::string entity;
  int lane = 0;
  double s = 0.0;  // road coordinate (m)
  double y = 0.0;  // lateral position (m)
  double speed = 0.0;
};

struct PlaybackResult {
  std::vector<TrajectorySample> trajectory;
  /// +infinity when the script has no actors.
  double min_distance = std::numeric_limits<double>::infinity();
  std::string closest_actor;
  bool collision = false;
  Criticality realized = Criticality::Visible;
};

/// Fixed-step integration of the script. Scripted actors travel from spawn
/// to goal at their per-tau target speeds; the ego follows its route and
/// brakes whenever the time-to-collision with an actor ahead on its path
/// drops below the policy threshold. From a standstill it waits while such
/// an actor is closer than target_speed * ttc_threshold.
PlaybackResult run(const ScenarioScript& script, const EgoPolicy& policy,
                   const PlaybackConfig& cfg = {}, std::uint64_t rng_seed = 0);

/// time,entity,lane,s,speed with "%.3f" numbers.
void write_trajectory_csv(std::ostream& out, const std::vector<TrajectorySample>& trajectory);

nlohmann::json playback_summary_json(const PlaybackResult& r);

struct BatchResult {
  std::vector<PlaybackResult> runs;  // input order
  ScrReport report;
};

/// Runs each (script, requested criticality) pair and reports the scenario
/// consistency rate. Runs may execute on `threads` workers; results keep the
/// input order. Trajectories are dropped unless `keep_trajectories`.
BatchResult batch_consistency(std::span<const std::pair<ScenarioScript, Criticality>> batch,
                              const EgoPolicy& policy, const PlaybackConfig& cfg = {},
                              std::uint64_t rng_seed = 0, unsigned threads = 1,
                              bool keep_trajectories = false);

/// A script whose minimum ego-actor distance follows in closed form.
struct OracleCase {
  std::string name;
  ScenarioScript script;
  Criticality requested = Criticality::Visible;
  double expected_min_distance = 0.0;
  double tolerance = 0.0;
};

/// Parked actors inside the standstill envelope, approaching actors that
/// stop at a known gap, and actors passed at a known lateral clearance;
/// several per criticality. Valid for the three built-in policies.
std::vector<OracleCase> oracle_cases();

/// Head-on family: an oncoming actor in the ego lane approaching from
/// `spawn_offset` at `speed` and stopping `goal_offset` ahead of the ego
/// start.
ScenarioScript head_on_script(double spawn_offset, double speed, double goal_offset);

}  // namespace critscene
