#include "critscene/playback.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <future>
#include <ostream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "critscene/ingestion.hpp"
#include "critscene/random.hpp"

namespace critscene {

EgoPolicy EgoPolicy::named(const std::string& name) {
  if (name == "normal") return normal();
  if (name == "cautious") return cautious();
  if (name == "aggressive") return aggressive();
  throw std::invalid_argument("unknown policy '" + name + "' (normal, cautious, aggressive)");
}

void EgoPolicy::validate() const {
  if (!(target_speed > 0.0 && ttc_threshold > 0.0 && deceleration > 0.0) ||
      !std::isfinite(target_speed) || !std::isfinite(deceleration)) {
    throw std::invalid_argument("policy '" + name + "': parameters must be positive");
  }
}

void PlaybackConfig::validate() const {
  const bool ok = dt > 0.0 && horizon > 0.0 && ego_acceleration > 0.0 && actor_acceleration > 0.0 &&
                  lateral_speed > 0.0 && conflict_lateral > 0.0 && collision_distance > 0.0 &&
                  speed_noise >= 0.0 && speed_noise < 1.0;
  if (!ok) throw std::invalid_argument("playback config: parameters out of range");
}

namespace {

struct Body {
  std::string name;
  double s = 0.0;      // offset from the ego start along the road
  double y = 0.0;
  double v = 0.0;      // speed magnitude
  double y_target = 0.0;
  int lane = 0;
};

void steer(Body& b, double lateral_speed, double dt) {
  const double dy = b.y_target - b.y;
  const double step = lateral_speed * dt;
  b.y = std::abs(dy) <= step ? b.y_target : b.y + std::copysign(step, dy);
}

int tau_at(double t, double interval) {
  const int k = static_cast<int>(std::floor(t / interval + 1e-9));
  return std::clamp(k, 0, kFramesPerScenario - 1);
}

}  // namespace

PlaybackResult run(const ScenarioScript& script, const EgoPolicy& policy,
                   const PlaybackConfig& cfg, std::uint64_t rng_seed) {
  script.validate();
  policy.validate();
  cfg.validate();
  const MapLayout& map = script.map;
  const double interval = script.frame_interval;

  Body ego{"ego", 0.0, map.lane(script.ego.start_lane).center, 0.0, 0.0, script.ego.start_lane};
  ego.y_target = ego.y;

  std::vector<Body> actors;
  std::vector<double> noise(script.actors.size(), 1.0);
  Rng rng(rng_seed);
  for (std::size_t i = 0; i < script.actors.size(); ++i) {
    const ActorSpec& a = script.actors[i];
    Body b;
    b.name = "actor_" + std::to_string(a.track_id);
    b.s = a.spawn.offset;
    b.y = map.lane(a.spawn.lane).center;
    b.y_target = b.y;
    b.lane = a.spawn.lane;
    if (cfg.speed_noise > 0.0) noise[i] = 1.0 + cfg.speed_noise * rng.uniform(-1.0, 1.0);
    b.v = a.speeds[0] * noise[i];
    actors.push_back(b);
  }

  PlaybackResult out;
  const auto record = [&](double t) {
    const auto sample = [&](const Body& b) {
      out.trajectory.push_back({t, b.name, b.lane, script.start_s + b.s, b.y, b.v});
    };
    sample(ego);
    for (const auto& b : actors) sample(b);
    for (const auto& b : actors) {
      const double d = std::hypot(b.s - ego.s, b.y - ego.y);
      if (d < out.min_distance) {
        out.min_distance = d;
        out.closest_actor = b.name;
      }
    }
  };

  const auto steps = static_cast<long>(std::llround(cfg.horizon / cfg.dt));
  bool braking = false;
  record(0.0);
  for (long step = 0; step < steps; ++step) {
    const double t = static_cast<double>(step) * cfg.dt;
    const int tau = tau_at(t, interval);

    // ---- ego
    for (const auto& [change_tau, lane] : script.ego.lane_changes) {
      if (tau >= change_tau && ego.lane != lane && t >= change_tau * interval) {
        ego.lane = lane;
        ego.y_target = map.lane(lane).center;
      }
    }
    double target = policy.target_speed;
    if (script.ego.stop_from && t >= *script.ego.stop_from * interval) target = 0.0;
    if (script.ego.slow_from && t >= *script.ego.slow_from * interval) {
      target = std::min(target, script.ego.slow_speed);
    }
    bool brake = false;
    bool hold = false;
    for (std::size_t i = 0; i < actors.size(); ++i) {
      const Body& b = actors[i];
      const double gap = b.s - ego.s;
      if (gap <= 0.0 || std::abs(b.y - ego.y) >= cfg.conflict_lateral) continue;
      const ActorSpec& spec = script.actors[i];
      const double dir = spec.goal.offset > b.s ? 1.0 : spec.goal.offset < b.s ? -1.0 : 0.0;
      const double closing = ego.v - dir * b.v;
      const bool in_envelope = gap < policy.target_speed * policy.ttc_threshold;
      if (closing > 0.0 && gap / closing < policy.ttc_threshold) brake = true;
      // A stop, once begun, runs to standstill while the actor keeps closing
      // inside the envelope; releasing it as soon as the TTC recovers would
      // let the ego creep up to the actor.
      if (braking && closing > 0.0 && in_envelope) brake = true;
      if (ego.v == 0.0 && in_envelope) hold = true;
    }
    braking = brake;
    if (brake || (hold && ego.v == 0.0)) {
      ego.v = std::max(0.0, ego.v - policy.deceleration * cfg.dt);
    } else if (ego.v < target) {
      ego.v = std::min(target, ego.v + cfg.ego_acceleration * cfg.dt);
    } else if (ego.v > target) {
      ego.v = std::max(target, ego.v - policy.deceleration * cfg.dt);
    }
    ego.s += ego.v * cfg.dt;
    steer(ego, cfg.lateral_speed, cfg.dt);

    // ---- actors
    for (std::size_t i = 0; i < actors.size(); ++i) {
      Body& b = actors[i];
      const ActorSpec& spec = script.actors[i];
      if (spec.lane_change_tau && t >= *spec.lane_change_tau * interval && b.lane != spec.goal.lane) {
        b.lane = spec.goal.lane;
        b.y_target = map.lane(spec.goal.lane).center;
      }
      const double remaining = std::abs(spec.goal.offset - b.s);
      const double dir = spec.goal.offset >= b.s ? 1.0 : -1.0;
      const double a = cfg.actor_acceleration;
      double want = spec.speeds[static_cast<std::size_t>(tau)] * noise[i];
      // Arrive at the goal at rest.
      if (remaining <= b.v * b.v / (2.0 * a) + b.v * cfg.dt) want = 0.0;
      if (b.v < want) b.v = std::min(want, b.v + a * cfg.dt);
      else if (b.v > want) b.v = std::max(want, b.v - a * cfg.dt);
      const double move = b.v * cfg.dt;
      b.s = move >= remaining ? spec.goal.offset : b.s + dir * move;
      steer(b, cfg.lateral_speed, cfg.dt);
    }
    record(static_cast<double>(step + 1) * cfg.dt);
  }

  out.collision = out.min_distance < cfg.collision_distance;
  if (out.collision || out.min_distance <= 0.0) {
    out.realized = Criticality::NearCollision;
  } else if (std::isinf(out.min_distance)) {
    out.realized = Criticality::Visible;
  } else {
    out.realized = proximity_from_distance(out.min_distance);
  }
  return out;
}

void write_trajectory_csv(std::ostream& out, const std::vector<TrajectorySample>& trajectory) {
  out << "time,entity,lane,s,speed\n";
  char buf[160];
  for (const auto& p : trajectory) {
    std::snprintf(buf, sizeof buf, "%.3f,%s,%d,%.3f,%.3f\n", p.time, p.entity.c_str(), p.lane, p.s,
                  p.speed);
    out << buf;
  }
}

nlohmann::json playback_summary_json(const PlaybackResult& r) {
  nlohmann::json j;
  j["min_distance"] = std::isinf(r.min_distance) ? nlohmann::json(nullptr) : nlohmann::json(r.min_distance);
  j["closest_actor"] = r.closest_actor;
  j["collision"] = r.collision;
  j["realized"] = to_string(r.realized);
  return j;
}

BatchResult batch_consistency(std::span<const std::pair<ScenarioScript, Criticality>> batch,
                              const EgoPolicy& policy, const PlaybackConfig& cfg,
                              std::uint64_t rng_seed, unsigned threads, bool keep_trajectories) {
  if (batch.empty()) throw std::invalid_argument("batch_consistency: empty batch");
  BatchResult out;
  out.runs.resize(batch.size());
  const auto work = [&](std::size_t begin, std::size_t stride) {
    for (std::size_t i = begin; i < batch.size(); i += stride) {
      out.runs[i] = run(batch[i].first, policy, cfg, rng_seed + i);
      if (!keep_trajectories) out.runs[i].trajectory.clear();
    }
  };
  const std::size_t n_workers = std::clamp<std::size_t>(threads, 1, batch.size());
  if (n_workers == 1) {
    work(0, 1);
  } else {
    std::vector<std::future<void>> jobs;
    for (std::size_t w = 0; w < n_workers; ++w) jobs.push_back(std::async(std::launch::async, work, w, n_workers));
    for (auto& j : jobs) j.get();
  }
  std::vector<std::pair<Criticality, Criticality>> pairs;
  for (std::size_t i = 0; i < batch.size(); ++i) pairs.emplace_back(batch[i].second, out.runs[i].realized);
  out.report = scenario_consistency_rate(pairs);
  return out;
}

// ------------------------------------------------------------ fixtures

namespace {

ScenarioScript single_actor(Criticality c, int lane, NodeClass cls, double spawn, double goal,
                            double speed, Heading heading) {
  ScenarioScript s;
  s.map = default_map(Handedness::Right, false);
  s.criticality = c;
  ActorSpec a;
  a.track_id = 1;
  a.cls = cls;
  a.spawn = {lane, spawn};
  a.goal = {lane, goal};
  a.heading = heading;
  a.timeline.fill(Relation::Move);
  a.speeds.fill(speed);
  if (speed == 0.0) a.timeline.fill(Relation::Stop);
  s.actors.push_back(a);
  return s;
}

}  // namespace

ScenarioScript head_on_script(double spawn_offset, double speed, double goal_offset) {
  return single_actor(Criticality::NearCollision, -1, NodeClass::Car, spawn_offset, goal_offset,
                      speed, Heading::Oncoming);
}

std::vector<OracleCase> oracle_cases() {
  // The standstill envelope of the most permissive built-in policy is
  // 10 m/s * 1.5 s = 15 m, so a parked actor closer than that keeps every
  // policy at rest and the minimum distance is the spawn gap itself.
  std::vector<OracleCase> out;
  const auto parked = [&](Criticality c, double gap) {
    out.push_back({"parked-" + std::string(to_string(c)) + "-" + std::to_string(gap),
                   single_actor(c, -1, NodeClass::Car, gap, gap, 0.0, Heading::SameDirection), c,
                   gap, 1e-9});
  };
  // An oncoming actor that starts inside the envelope and stops at `goal`.
  const auto approaching = [&](Criticality c, double spawn, double goal) {
    out.push_back({"approach-" + std::string(to_string(c)) + "-" + std::to_string(goal),
                   single_actor(c, -1, NodeClass::Car, spawn, goal, 3.0, Heading::Oncoming), c, goal,
                   1e-9});
  };
  // The ego drives past a pedestrian on the far pavement: clearance is the
  // lateral gap between the lane centres (within one step of travel).
  const auto passed = [&](Criticality c, int lane, double offset) {
    ScenarioScript s = single_actor(c, lane, NodeClass::Pedestrian, offset, offset, 0.0,
                                    Heading::SameDirection);
    const double lateral = std::abs(s.map.lane(lane).center - s.map.lane(-1).center);
    out.push_back({"passed-" + std::string(to_string(c)) + "-" + std::to_string(lane), s, c, lateral,
                   0.5});
  };
  parked(Criticality::NearCollision, 2.0);
  parked(Criticality::NearCollision, 4.5);
  approaching(Criticality::NearCollision, 12.0, 3.0);
  parked(Criticality::Near, 6.0);
  parked(Criticality::Near, 9.5);
  approaching(Criticality::Near, 14.0, 7.0);
  parked(Criticality::Visible, 12.0);
  parked(Criticality::Visible, 14.5);
  approaching(Criticality::Visible, 14.5, 11.0);
  passed(Criticality::Visible, 4, 40.0);
  return out;
}

}  // namespace critscene
