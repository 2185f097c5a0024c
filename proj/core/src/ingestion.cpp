#include "critscene/ingestion.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <cstdio>
#include <map>
#include <set>

#include <nlohmann/json.hpp>

#include "critscene/random.hpp"

namespace critscene {

Criticality proximity_from_distance(double distance_m) {
  if (!(distance_m > 0.0)) {
    throw SchemaError("distance must be positive, got " + std::to_string(distance_m));
  }
  if (distance_m < 5.0) return Criticality::NearCollision;
  if (distance_m <= 10.0) return Criticality::Near;
  return Criticality::Visible;
}

// ------------------------------------------------------------------ parsing

namespace {

using nlohmann::json;

template <typename T, typename F>
T label(const json& j, const std::string& field, F from_string) {
  if (!j.is_string()) throw SchemaError(field + ": expected a string label");
  const auto s = j.get<std::string>();
  const auto v = from_string(s);
  if (!v) throw SchemaError(field + ": unknown label '" + s + "'");
  return *v;
}

int integer(const json& j, const std::string& field) {
  if (!j.is_number_integer()) throw SchemaError(field + ": expected an integer");
  return j.get<int>();
}

LocationRef parse_location(const json& j, const std::string& field) {
  if (!j.is_object()) throw SchemaError(field + ": expected {\"cls\", \"id\"}");
  LocationRef ref;
  ref.cls = label<NodeClass>(j.at("cls"), field + ".cls", node_class_from_string);
  if (!is_location(ref.cls)) {
    throw SchemaError(field + ".cls: '" + std::string(to_string(ref.cls)) + "' is not a location");
  }
  ref.instance = j.contains("id") ? integer(j["id"], field + ".id") : 0;
  if (ref.instance < 0) throw SchemaError(field + ".id: negative instance id");
  return ref;
}

EntityAnnotation parse_entity(const json& j, const std::string& at) {
  EntityAnnotation e;
  if (!j.contains("track_id")) throw SchemaError(at + ": missing 'track_id'");
  e.track_id = integer(j["track_id"], at + ".track_id");
  if (e.track_id < 0) throw SchemaError(at + ".track_id: negative");
  const std::string here = at + " (track " + std::to_string(e.track_id) + ")";
  if (!j.contains("cls")) throw SchemaError(here + ": missing 'cls'");
  e.cls = label<NodeClass>(j["cls"], here + ".cls", node_class_from_string);
  if (!is_agent(e.cls)) {
    throw SchemaError(here + ".cls: '" + std::string(to_string(e.cls)) + "' is not an agent class");
  }
  if (j.contains("location") && !j["location"].is_null()) {
    e.location = parse_location(j["location"], here + ".location");
  }
  if (j.contains("actions")) {
    for (const auto& a : j["actions"]) {
      const Relation r = label<Relation>(a, here + ".actions", relation_from_string);
      if (!is_agent_action(r)) {
        throw SchemaError(here + ".actions: '" + std::string(to_string(r)) +
                          "' is not an agent action");
      }
      e.actions.push_back(r);
    }
  }
  if (j.contains("light") && !j["light"].is_null()) {
    e.light_state = label<Relation>(j["light"], here + ".light", relation_from_string);
    if (!is_light_state(*e.light_state)) {
      throw SchemaError(here + ".light: '" + std::string(to_string(*e.light_state)) +
                        "' is not a light state");
    }
  }
  if (j.contains("motion") && !j["motion"].is_null()) {
    e.relative_motion = label<Relation>(j["motion"], here + ".motion", relation_from_string);
    if (!is_relative_motion(*e.relative_motion)) {
      throw SchemaError(here + ".motion: '" + std::string(to_string(*e.relative_motion)) +
                        "' is not a relative motion");
    }
  }
  const bool has_d = j.contains("distance_m") && !j["distance_m"].is_null();
  const bool has_p = j.contains("proximity") && !j["proximity"].is_null();
  if (has_d == has_p) {
    throw SchemaError(here + ": exactly one of 'distance_m' and 'proximity' is required");
  }
  if (has_d) {
    if (!j["distance_m"].is_number()) throw SchemaError(here + ".distance_m: expected a number");
    e.distance_m = j["distance_m"].get<double>();
    if (!(*e.distance_m > 0.0) || !std::isfinite(*e.distance_m)) {
      throw SchemaError(here + ".distance_m: must be positive and finite");
    }
  } else {
    e.proximity = label<Criticality>(j["proximity"], here + ".proximity", criticality_from_string);
  }
  return e;
}

json location_to_json(const LocationRef& ref) {
  return {{"cls", to_string(ref.cls)}, {"id", ref.instance}};
}

}  // namespace

AnnotatedVideo parse_annotations(const nlohmann::json& doc) {
  if (!doc.is_object()) throw SchemaError("annotation document must be a JSON object");
  AnnotatedVideo video;
  if (doc.contains("video_id")) {
    if (!doc["video_id"].is_string()) throw SchemaError("video_id: expected a string");
    video.video_id = doc["video_id"].get<std::string>();
  }
  if (!doc.contains("frames") || !doc["frames"].is_array()) {
    throw SchemaError("missing 'frames' array");
  }
  std::set<int> seen_frames;
  for (std::size_t k = 0; k < doc["frames"].size(); ++k) {
    const json& fj = doc["frames"][k];
    const std::string pos = "frames[" + std::to_string(k) + "]";
    if (!fj.is_object() || !fj.contains("frame_index")) {
      throw SchemaError(pos + ": missing 'frame_index'");
    }
    FrameAnnotation f;
    f.frame_index = integer(fj["frame_index"], pos + ".frame_index");
    const std::string at = "frame " + std::to_string(f.frame_index);
    if (!seen_frames.insert(f.frame_index).second) {
      throw SchemaError(at + ": duplicate frame_index");
    }
    if (fj.contains("av_action") && !fj["av_action"].is_null()) {
      f.av_action = label<Relation>(fj["av_action"], at + ".av_action", relation_from_string);
      if (!is_av_action(*f.av_action)) {
        throw SchemaError(at + ".av_action: '" + std::string(to_string(*f.av_action)) +
                          "' is not an AV action");
      }
    }
    if (fj.contains("ego_location") && !fj["ego_location"].is_null()) {
      f.ego_location = parse_location(fj["ego_location"], at + ".ego_location");
    }
    std::set<int> tracks;
    if (fj.contains("entities")) {
      for (std::size_t i = 0; i < fj["entities"].size(); ++i) {
        EntityAnnotation e =
            parse_entity(fj["entities"][i], at + ".entities[" + std::to_string(i) + "]");
        if (!tracks.insert(e.track_id).second) {
          throw SchemaError(at + ": duplicate track_id " + std::to_string(e.track_id));
        }
        f.entities.push_back(std::move(e));
      }
    }
    video.frames.push_back(std::move(f));
  }
  std::stable_sort(video.frames.begin(), video.frames.end(),
                   [](const auto& a, const auto& b) { return a.frame_index < b.frame_index; });
  return video;
}

AnnotatedVideo parse_annotations(std::istream& in) {
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw SchemaError(std::string("malformed annotation JSON: ") + e.what());
  }
  try {
    return parse_annotations(doc);
  } catch (const json::exception& e) {
    throw SchemaError(std::string("annotation schema: ") + e.what());
  }
}

nlohmann::json annotations_to_json(const AnnotatedVideo& video) {
  json frames = json::array();
  for (const auto& f : video.frames) {
    json fj;
    fj["frame_index"] = f.frame_index;
    fj["av_action"] = f.av_action ? json(to_string(*f.av_action)) : json();
    fj["ego_location"] = f.ego_location ? location_to_json(*f.ego_location) : json();
    json ents = json::array();
    for (const auto& e : f.entities) {
      json ej;
      ej["track_id"] = e.track_id;
      ej["cls"] = to_string(e.cls);
      if (e.location) ej["location"] = location_to_json(*e.location);
      json acts = json::array();
      for (Relation a : e.actions) acts.push_back(to_string(a));
      ej["actions"] = std::move(acts);
      if (e.light_state) ej["light"] = to_string(*e.light_state);
      if (e.relative_motion) ej["motion"] = to_string(*e.relative_motion);
      if (e.distance_m) ej["distance_m"] = *e.distance_m;
      if (e.proximity) ej["proximity"] = to_string(*e.proximity);
      ents.push_back(std::move(ej));
    }
    fj["entities"] = std::move(ents);
    frames.push_back(std::move(fj));
  }
  return {{"video_id", video.video_id}, {"frames", std::move(frames)}};
}

// ---------------------------------------------------------- windows, splits

std::vector<std::vector<FrameAnnotation>> window_scenarios(const std::vector<FrameAnnotation>& frames,
                                                           int downsample, int window) {
  if (downsample < 1 || window < 1) {
    throw std::invalid_argument("window_scenarios: downsample and window must be positive");
  }
  std::vector<FrameAnnotation> kept;
  for (std::size_t i = 0; i < frames.size(); i += static_cast<std::size_t>(downsample)) {
    kept.push_back(frames[i]);
  }
  std::vector<std::vector<FrameAnnotation>> out;
  const auto w = static_cast<std::size_t>(window);
  for (std::size_t start = 0; start + w <= kept.size(); start += w) {
    out.emplace_back(kept.begin() + static_cast<std::ptrdiff_t>(start),
                     kept.begin() + static_cast<std::ptrdiff_t>(start + w));
  }
  return out;
}

DatasetSplit split_dataset(const std::vector<ScenarioWindow>& windows, std::uint64_t rng_seed) {
  std::map<Relation, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < windows.size(); ++i) groups[windows[i].av_action].push_back(i);
  Rng rng(rng_seed);
  DatasetSplit split;
  for (auto& [action, idx] : groups) {
    rng.shuffle(std::span<std::size_t>(idx));
    const std::size_t n = idx.size();
    const std::size_t n_val = n * 20 / 100;
    const std::size_t n_test = n * 10 / 100;
    split.val.insert(split.val.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_val));
    split.test.insert(split.test.end(), idx.begin() + static_cast<std::ptrdiff_t>(n_val),
                      idx.begin() + static_cast<std::ptrdiff_t>(n_val + n_test));
    split.train.insert(split.train.end(), idx.begin() + static_cast<std::ptrdiff_t>(n_val + n_test),
                       idx.end());
  }
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.val.begin(), split.val.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

// ---------------------------------------------------------------- synthetic

void SynthConfig::validate() const {
  if (n_scenarios < 0) throw std::invalid_argument("synth: n_scenarios must be >= 0");
  if (min_agents < 1 || max_agents < min_agents) {
    throw std::invalid_argument("synth: need 1 <= min_agents <= max_agents");
  }
  const auto check = [](std::span<const double> w, const char* what) {
    double total = 0.0;
    for (double x : w) {
      if (!(x >= 0.0) || !std::isfinite(x)) {
        throw std::invalid_argument(std::string("synth: negative ") + what + " weight");
      }
      total += x;
    }
    if (total <= 0.0) throw std::invalid_argument(std::string("synth: all ") + what + " weights are zero");
  };
  check(action_weights, "action");
  check(criticality_weights, "criticality");
  check(agent_class_weights, "agent class");
  for (double p : {traffic_light_probability, missing_action_probability}) {
    if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("synth: probability outside [0,1]");
  }
  if (!(jitter >= 0.0) || !std::isfinite(jitter)) {
    throw std::invalid_argument("synth: jitter must be >= 0");
  }
}

namespace {

constexpr std::array<Relation, 7> kAvActions = {
    Relation::AvMove, Relation::AvMoveLeft, Relation::AvMoveRight, Relation::AvOvertake,
    Relation::AvStop, Relation::AvTurnLeft, Relation::AvTurnRight};
constexpr std::array<NodeClass, 5> kDynamicAgents = {NodeClass::Pedestrian, NodeClass::Car,
                                                     NodeClass::Cyclist, NodeClass::Motorbike,
                                                     NodeClass::Bus};

// Every location class has one fixed instance id in the synthetic world.
int instance_of(NodeClass loc) {
  switch (loc) {
    case NodeClass::VehicleLane: return 0;
    case NodeClass::OutgoingLane: return 1;
    case NodeClass::Pavement: return 2;
    case NodeClass::IncomingLane: return 3;
    case NodeClass::OutgoingCycleLane: return 4;
    case NodeClass::IncomingCycleLane: return 5;
    case NodeClass::Junction: return 6;
    case NodeClass::PedestrianCrossing: return 7;
    case NodeClass::BusStop: return 8;
    case NodeClass::Parking: return 9;
    default: return 0;
  }
}

LocationRef at(NodeClass loc) { return {loc, instance_of(loc)}; }

std::array<Relation, kFramesPerScenario> ego_action_timeline(Relation av) {
  using R = Relation;
  switch (av) {
    case R::AvStop: return {R::AvMove, R::AvMove, R::AvStop, R::AvStop, R::AvStop};
    case R::AvTurnLeft:
    case R::AvTurnRight: return {R::AvMove, R::AvMove, R::AvMove, av, av};
    case R::AvMoveLeft:
    case R::AvMoveRight:
    case R::AvOvertake: return {R::AvMove, av, av, av, av};
    default: return {av, av, av, av, av};
  }
}

NodeClass ego_location(Relation av, int tau) {
  switch (av) {
    case Relation::AvTurnLeft:
    case Relation::AvTurnRight: return tau >= 3 ? NodeClass::Junction : NodeClass::VehicleLane;
    case Relation::AvMoveLeft:
    case Relation::AvMoveRight:
    case Relation::AvOvertake: return tau >= 2 ? NodeClass::OutgoingLane : NodeClass::VehicleLane;
    default: return NodeClass::VehicleLane;
  }
}

NodeClass agent_location(Rng& rng, NodeClass cls, bool approaching) {
  switch (cls) {
    case NodeClass::Pedestrian:
      return approaching ? (rng.bernoulli(0.6) ? NodeClass::PedestrianCrossing : NodeClass::Pavement)
                         : NodeClass::Pavement;
    case NodeClass::Cyclist:
      return approaching ? NodeClass::IncomingCycleLane
                         : (rng.bernoulli(0.5) ? NodeClass::OutgoingCycleLane
                                               : NodeClass::IncomingCycleLane);
    case NodeClass::Bus:
      if (!approaching && rng.bernoulli(0.4)) return NodeClass::BusStop;
      [[fallthrough]];
    default: {
      if (approaching) return rng.bernoulli(0.7) ? NodeClass::IncomingLane : NodeClass::VehicleLane;
      const double u = rng.uniform();
      if (u < 0.4) return NodeClass::OutgoingLane;
      if (u < 0.8) return NodeClass::IncomingLane;
      return NodeClass::Parking;
    }
  }
}

// Agent actions evolve under Move -> Brake -> Stop -> Move with the given
// per-step transition probability; pedestrians on a crossing cross instead.
std::array<Relation, kFramesPerScenario> agent_actions(Rng& rng, NodeClass cls, NodeClass loc,
                                                       bool approaching) {
  std::array<Relation, kFramesPerScenario> out{};
  if (cls == NodeClass::Pedestrian && loc == NodeClass::PedestrianCrossing) {
    out.fill(Relation::Cross);
    return out;
  }
  if (approaching || loc == NodeClass::Parking) {
    out.fill(loc == NodeClass::Parking ? Relation::Stop : Relation::Move);
    return out;
  }
  Relation a = rng.bernoulli(0.7) ? Relation::Move : Relation::Stop;
  for (auto& slot : out) {
    slot = a;
    if (rng.bernoulli(0.25)) {
      a = a == Relation::Move ? Relation::Brake : a == Relation::Brake ? Relation::Stop : Relation::Move;
    }
  }
  return out;
}

}  // namespace

std::vector<AnnotatedVideo> generate_synthetic(const SynthConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.rng_seed);
  std::vector<AnnotatedVideo> out;
  out.reserve(static_cast<std::size_t>(cfg.n_scenarios));
  const double j = std::min(cfg.jitter, 1.0);

  for (int s = 0; s < cfg.n_scenarios; ++s) {
    AnnotatedVideo video;
    char id[32];
    std::snprintf(id, sizeof id, "synth-%06d", s);
    video.video_id = id;

    const Relation av = kAvActions[static_cast<std::size_t>(rng.weighted(cfg.action_weights))];
    const auto crit = static_cast<Criticality>(rng.weighted(cfg.criticality_weights));
    const int n_agents = rng.between(cfg.min_agents, cfg.max_agents);
    const int base = 25 * rng.between(0, 40);

    // Primary agent (track 1) approaches and realises the criticality at tau = 4.
    // Each bucket's range sits inside the distance thresholds, so per-frame
    // proximity labels depend only on (criticality, tau).
    double d_last, rate = 5.0 + j * rng.uniform(-0.5, 0.5);
    switch (crit) {
      case Criticality::NearCollision: d_last = 3.0 + j * rng.uniform(-1.0, 1.0); break;
      case Criticality::Near: d_last = 7.5 + j * rng.uniform(-1.5, 1.5); break;
      default: d_last = 15.0 + j * rng.uniform(-3.0, 3.0); break;
    }

    struct Agent {
      int track;
      NodeClass cls;
      NodeClass loc;
      bool approaching;
      std::array<Relation, kFramesPerScenario> actions;
      double d0, rate;
    };
    std::vector<Agent> agents;
    for (int a = 0; a < n_agents; ++a) {
      Agent ag;
      ag.track = a + 1;
      ag.cls = kDynamicAgents[static_cast<std::size_t>(rng.weighted(cfg.agent_class_weights))];
      ag.approaching = a == 0;
      ag.loc = agent_location(rng, ag.cls, ag.approaching);
      ag.actions = agent_actions(rng, ag.cls, ag.loc, ag.approaching);
      if (ag.approaching) {
        ag.d0 = d_last;
        ag.rate = rate;
      } else {
        // Receding agents stay beyond the Near bucket.
        ag.d0 = 12.0 + j * rng.uniform(0.0, 8.0);
        ag.rate = 1.5 + j * rng.uniform(0.0, 1.5);
      }
      agents.push_back(ag);
    }
    const bool light = rng.bernoulli(cfg.traffic_light_probability);
    const int light_track = n_agents + 1;
    const double light_d = 20.0 + j * rng.uniform(-5.0, 5.0);
    // Green -> Amber -> Red with the change point drawn per scenario.
    const int red_from = rng.between(2, kFramesPerScenario + 1);

    const auto timeline = ego_action_timeline(av);
    for (int tau = 0; tau < kFramesPerScenario; ++tau) {
      FrameAnnotation f;
      f.frame_index = base + 5 * tau;
      const bool last = tau == kFramesPerScenario - 1;
      if (last || !rng.bernoulli(cfg.missing_action_probability)) f.av_action = timeline[tau];
      f.ego_location = at(ego_location(av, tau));
      for (const auto& ag : agents) {
        EntityAnnotation e;
        e.track_id = ag.track;
        e.cls = ag.cls;
        e.location = at(ag.loc);
        e.actions = {ag.actions[static_cast<std::size_t>(tau)]};
        if (ag.approaching) {
          e.distance_m = ag.d0 + ag.rate * static_cast<double>(kFramesPerScenario - 1 - tau);
          e.relative_motion = Relation::MovingTowards;
        } else {
          e.distance_m = ag.d0 + ag.rate * static_cast<double>(tau);
          e.relative_motion = Relation::MovingAway;
        }
        f.entities.push_back(std::move(e));
      }
      if (light) {
        EntityAnnotation e;
        e.track_id = light_track;
        e.cls = NodeClass::TrafficLight;
        e.light_state = tau >= red_from       ? Relation::Red
                        : tau == red_from - 1 ? Relation::Amber
                                              : Relation::Green;
        e.distance_m = light_d;
        f.entities.push_back(std::move(e));
      }
      video.frames.push_back(std::move(f));
    }
    out.push_back(std::move(video));
  }
  return out;
}

}  // namespace critscene
