#include "critscene/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>

#include <nlohmann/json.hpp>

#include "critscene/bundled_schema.hpp"
#include "critscene/ingestion.hpp"
#include "critscene/random.hpp"
#include "critscene/xml.hpp"

namespace critscene {

namespace {

constexpr std::array<NodeClass, 5> kAgentClasses = {NodeClass::Pedestrian, NodeClass::Car,
                                                    NodeClass::Cyclist, NodeClass::Motorbike,
                                                    NodeClass::Bus};
constexpr std::array<Relation, 7> kAvActions = {
    Relation::AvMove,   Relation::AvMoveLeft,  Relation::AvMoveRight, Relation::AvOvertake,
    Relation::AvStop,   Relation::AvTurnLeft,  Relation::AvTurnRight};

constexpr int kCrossingLane = 10;
constexpr int kJunctionLane = 20;
constexpr double kHorizonS = 15.0;

std::string fmt3(double v) {
  if (v == 0.0) v = 0.0;  // no "-0.000"
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

template <typename T, typename F>
T parse_name(const nlohmann::json& j, const char* what, F&& from_string) {
  if (!j.is_string()) throw std::invalid_argument(std::string(what) + " must be a string");
  const auto v = from_string(j.get<std::string>());
  if (!v) throw std::invalid_argument("unknown " + std::string(what) + " '" + j.get<std::string>() + "'");
  return *v;
}

}  // namespace

// ------------------------------------------------------------------ request

void ScenarioRequest::validate() const {
  if (agents.empty()) throw std::invalid_argument("request: agents must not be empty");
  for (auto a : agents) {
    if (!is_dynamic_agent(a)) {
      throw std::invalid_argument("request: '" + std::string(to_string(a)) +
                                  "' is not a dynamic agent");
    }
  }
  if (!is_av_action(av_action)) {
    throw std::invalid_argument("request: '" + std::string(to_string(av_action)) +
                                "' is not an AV action");
  }
}

ScenarioRequest request_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw std::invalid_argument("request must be a JSON object");
  for (const auto& [k, v] : j.items()) {
    if (k != "agents" && k != "av_action" && k != "criticality" && k != "seed") {
      throw std::invalid_argument("request: unknown key '" + k + "'");
    }
  }
  ScenarioRequest r;
  if (!j.contains("agents") || !j["agents"].is_array()) {
    throw std::invalid_argument("request: 'agents' must be an array");
  }
  for (const auto& a : j["agents"]) {
    r.agents.push_back(parse_name<NodeClass>(a, "agent class", node_class_from_string));
  }
  if (!j.contains("av_action")) throw std::invalid_argument("request: missing 'av_action'");
  r.av_action = parse_name<Relation>(j["av_action"], "AV action", relation_from_string);
  if (!j.contains("criticality")) throw std::invalid_argument("request: missing 'criticality'");
  r.criticality = parse_name<Criticality>(j["criticality"], "criticality", criticality_from_string);
  if (j.contains("seed")) {
    const auto& seed = j["seed"];
    if (!seed.is_number_integer() || (!seed.is_number_unsigned() && seed.get<std::int64_t>() < 0)) {
      throw std::invalid_argument("request: 'seed' must be >= 0");
    }
    r.rng_seed = j["seed"].get<std::uint64_t>();
  }
  r.validate();
  return r;
}

nlohmann::json request_to_json(const ScenarioRequest& r) {
  nlohmann::json agents = nlohmann::json::array();
  for (auto a : r.agents) agents.push_back(to_string(a));
  return {{"agents", agents},
          {"av_action", to_string(r.av_action)},
          {"criticality", to_string(r.criticality)},
          {"seed", r.rng_seed}};
}

std::vector<ScenarioRequest> evenly_distributed_requests(std::size_t n, std::uint64_t rng_seed,
                                                         int max_agents) {
  if (max_agents < 1) throw std::invalid_argument("max_agents must be >= 1");
  constexpr std::array<Criticality, 3> kOrder = {Criticality::Visible, Criticality::Near,
                                                 Criticality::NearCollision};
  const SynthConfig defaults;
  Rng rng(rng_seed);
  std::vector<ScenarioRequest> out;
  for (std::size_t i = 0; i < n; ++i) {
    ScenarioRequest r;
    r.criticality = kOrder[i % 3];
    const int k = rng.between(1, max_agents);
    for (int a = 0; a < k; ++a) {
      r.agents.push_back(
          kAgentClasses[static_cast<std::size_t>(rng.weighted(defaults.agent_class_weights))]);
    }
    r.av_action = kAvActions[rng.below(kAvActions.size())];
    r.rng_seed = rng.next();
    out.push_back(std::move(r));
  }
  return out;
}

GeneratedScenario handle_request(const ScenarioRequest& req, const SeedDatabase& db, Model& model,
                                 const Ontology& ont) {
  req.validate();
  if (db.size() == 0) throw std::runtime_error("seed database is empty");
  SeedSample smp = db.sample(req.agents, req.rng_seed);
  const TemporalGraph seed = add_conditioning(smp.seed, req.av_action, req.criticality);
  Prediction pred = predict(model, seed, ont);

  // The conditioning must survive prediction unchanged.
  const TemporalGraph& g = pred.graph;
  const auto ego = g.ego_uid();
  const auto crit = g.criticality_node_uid();
  const bool av_ok = ego && std::any_of(g.edges.begin(), g.edges.end(), [&](const Edge& e) {
                       return e.src == *ego && e.dst == *ego && e.relation == req.av_action;
                     });
  if (!av_ok || !crit || g.node(*crit).cls != criticality_node_class(req.criticality) ||
      g.av_action != req.av_action || g.criticality != req.criticality) {
    throw GraphError("generated graph lost its conditioning");
  }
  return {pred.graph, smp.index, smp.match};
}

// ---------------------------------------------------------------------- map

std::string_view to_string(Handedness h) { return h == Handedness::Right ? "right" : "left"; }

std::string_view to_string(Heading h) {
  switch (h) {
    case Heading::SameDirection: return "same-direction";
    case Heading::Oncoming: return "oncoming";
    case Heading::Crossing: return "crossing";
  }
  return "?";
}

namespace {

Handedness handedness_from(const std::string& s) {
  if (s == "right") return Handedness::Right;
  if (s == "left") return Handedness::Left;
  throw std::invalid_argument("unknown handedness '" + s + "'");
}

Heading heading_from(const std::string& s) {
  for (auto h : {Heading::SameDirection, Heading::Oncoming, Heading::Crossing}) {
    if (to_string(h) == s) return h;
  }
  throw std::invalid_argument("unknown heading '" + s + "'");
}

int mirror_lane(int id) { return std::abs(id) < kCrossingLane ? -id : id; }
double negate(double v) { return v == 0.0 ? 0.0 : -v; }

}  // namespace

const Lane* MapLayout::find(int id) const {
  for (const auto& l : lanes) {
    if (l.id == id) return &l;
  }
  return nullptr;
}

const Lane& MapLayout::lane(int id) const {
  if (const Lane* l = find(id)) return *l;
  throw CompileError("lane " + std::to_string(id) + " is not in the map");
}

MapLayout default_map(Handedness h, bool with_junction) {
  MapLayout m;
  const auto S = Heading::SameDirection;
  const auto O = Heading::Oncoming;
  m.lanes = {
      {-1, NodeClass::VehicleLane, S, -1.75, 3.5},
      {-2, NodeClass::OutgoingLane, S, -5.25, 3.5},
      {-3, NodeClass::OutgoingCycleLane, S, -7.75, 1.5},
      {-4, NodeClass::Pavement, S, -9.75, 2.5},
      {1, NodeClass::IncomingLane, O, 1.75, 3.5},
      {2, NodeClass::IncomingLane, O, 5.25, 3.5},
      {3, NodeClass::IncomingCycleLane, O, 7.75, 1.5},
      {4, NodeClass::Pavement, O, 9.75, 2.5},
      {kCrossingLane, NodeClass::PedestrianCrossing, Heading::Crossing, 0.0, 4.0},
  };
  m.crossing_s = 30.0;
  if (with_junction) {
    m.lanes.push_back({kJunctionLane, NodeClass::Junction, Heading::Crossing, 0.0, 7.0});
    m.junction_s = 40.0;
  }
  if (h == Handedness::Left) {
    for (auto& l : m.lanes) {
      l.id = mirror_lane(l.id);
      l.center = negate(l.center);
    }
  }
  return m;
}

// ------------------------------------------------------------------- script

double SpawnBands::of(Criticality c) const {
  switch (c) {
    case Criticality::NearCollision: return near_collision;
    case Criticality::Near: return near;
    case Criticality::Visible: return visible;
  }
  return visible;
}

void SpawnBands::validate() const {
  if (!(near_collision > 0.0 && near_collision < near && near < visible)) {
    throw std::invalid_argument("spawn bands must satisfy 0 < near_collision < near < visible");
  }
}

void ScenarioScript::validate() const {
  const auto need = [&](int lane, const std::string& who) {
    if (!map.find(lane)) {
      throw CompileError(who + " references lane " + std::to_string(lane) + " missing from the map");
    }
  };
  if (!(frame_interval > 0.0) || !std::isfinite(frame_interval)) {
    throw CompileError("frame interval must be positive");
  }
  if (!is_av_action(ego.av_action)) throw CompileError("ego action is not an AV action");
  need(ego.start_lane, "ego");
  for (const auto& [tau, lane] : ego.lane_changes) {
    if (tau < 0 || tau >= kFramesPerScenario) throw CompileError("ego lane change tau out of range");
    need(lane, "ego lane change");
  }
  std::set<int> tracks;
  for (const auto& a : actors) {
    const std::string who = std::string(to_string(a.cls)) + " " + std::to_string(a.track_id);
    if (!is_dynamic_agent(a.cls)) throw CompileError(who + " is not a dynamic agent");
    if (!tracks.insert(a.track_id).second) throw CompileError("duplicate actor track " + who);
    need(a.spawn.lane, who);
    need(a.goal.lane, who);
    if (a.lane_change_tau.has_value() != (a.spawn.lane != a.goal.lane)) {
      throw CompileError(who + ": lane change tau must be set exactly when lanes differ");
    }
    for (double v : a.speeds) {
      if (!(v >= 0.0) || !std::isfinite(v)) throw CompileError(who + ": invalid target speed");
    }
  }
}

// ------------------------------------------------------------- JSON codec

namespace {

nlohmann::json optional_relation(const std::optional<Relation>& r) {
  return r ? nlohmann::json(to_string(*r)) : nlohmann::json(nullptr);
}

}  // namespace

nlohmann::json script_to_json(const ScenarioScript& s) {
  nlohmann::json lanes = nlohmann::json::array();
  for (const auto& l : s.map.lanes) {
    lanes.push_back({{"id", l.id},
                     {"class", to_string(l.cls)},
                     {"direction", to_string(l.direction)},
                     {"center", l.center},
                     {"width", l.width}});
  }
  nlohmann::json map = {{"lanes", lanes}, {"crossing_s", s.map.crossing_s}};
  map["junction_s"] = s.map.junction_s ? nlohmann::json(*s.map.junction_s) : nlohmann::json(nullptr);

  nlohmann::json changes = nlohmann::json::array();
  for (const auto& [tau, lane] : s.ego.lane_changes) changes.push_back({tau, lane});
  nlohmann::json ego = {{"av_action", to_string(s.ego.av_action)},
                        {"start_lane", s.ego.start_lane},
                        {"lane_changes", changes},
                        {"slow_speed", s.ego.slow_speed}};
  ego["stop_from"] = s.ego.stop_from ? nlohmann::json(*s.ego.stop_from) : nlohmann::json(nullptr);
  ego["slow_from"] = s.ego.slow_from ? nlohmann::json(*s.ego.slow_from) : nlohmann::json(nullptr);

  nlohmann::json actors = nlohmann::json::array();
  for (const auto& a : s.actors) {
    nlohmann::json timeline = nlohmann::json::array();
    for (const auto& r : a.timeline) timeline.push_back(optional_relation(r));
    nlohmann::json j = {{"track_id", a.track_id},
                        {"class", to_string(a.cls)},
                        {"spawn", {{"lane", a.spawn.lane}, {"offset", a.spawn.offset}}},
                        {"goal", {{"lane", a.goal.lane}, {"offset", a.goal.offset}}},
                        {"heading", to_string(a.heading)},
                        {"timeline", timeline},
                        {"speeds", a.speeds}};
    j["lane_change_tau"] =
        a.lane_change_tau ? nlohmann::json(*a.lane_change_tau) : nlohmann::json(nullptr);
    actors.push_back(std::move(j));
  }
  return {{"map", map},
          {"ego", ego},
          {"actors", actors},
          {"criticality", to_string(s.criticality)},
          {"handedness", to_string(s.handedness)},
          {"frame_interval", s.frame_interval},
          {"start_s", s.start_s}};
}

ScenarioScript script_from_json(const nlohmann::json& j) {
  try {
    ScenarioScript s;
    const auto& m = j.at("map");
    for (const auto& l : m.at("lanes")) {
      Lane lane;
      lane.id = l.at("id").get<int>();
      lane.cls = parse_name<NodeClass>(l.at("class"), "lane class", node_class_from_string);
      if (!is_location(lane.cls)) throw std::invalid_argument("lane class must be a location");
      lane.direction = heading_from(l.at("direction").get<std::string>());
      lane.center = l.at("center").get<double>();
      lane.width = l.at("width").get<double>();
      s.map.lanes.push_back(lane);
    }
    s.map.crossing_s = m.at("crossing_s").get<double>();
    if (!m.at("junction_s").is_null()) s.map.junction_s = m["junction_s"].get<double>();

    const auto& e = j.at("ego");
    s.ego.av_action = parse_name<Relation>(e.at("av_action"), "AV action", relation_from_string);
    s.ego.start_lane = e.at("start_lane").get<int>();
    for (const auto& c : e.at("lane_changes")) {
      s.ego.lane_changes.emplace_back(c.at(0).get<int>(), c.at(1).get<int>());
    }
    if (!e.at("stop_from").is_null()) s.ego.stop_from = e["stop_from"].get<int>();
    if (!e.at("slow_from").is_null()) s.ego.slow_from = e["slow_from"].get<int>();
    s.ego.slow_speed = e.at("slow_speed").get<double>();

    for (const auto& a : j.at("actors")) {
      ActorSpec spec;
      spec.track_id = a.at("track_id").get<int>();
      spec.cls = parse_name<NodeClass>(a.at("class"), "actor class", node_class_from_string);
      spec.spawn = {a.at("spawn").at("lane").get<int>(), a["spawn"].at("offset").get<double>()};
      spec.goal = {a.at("goal").at("lane").get<int>(), a["goal"].at("offset").get<double>()};
      spec.heading = heading_from(a.at("heading").get<std::string>());
      const auto& tl = a.at("timeline");
      const auto& sp = a.at("speeds");
      if (tl.size() != kFramesPerScenario || sp.size() != kFramesPerScenario) {
        throw std::invalid_argument("actor timeline and speeds need one entry per tau");
      }
      for (std::size_t t = 0; t < kFramesPerScenario; ++t) {
        if (!tl[t].is_null()) {
          spec.timeline[t] = parse_name<Relation>(tl[t], "actor action", relation_from_string);
        }
        spec.speeds[t] = sp[t].get<double>();
      }
      if (!a.at("lane_change_tau").is_null()) spec.lane_change_tau = a["lane_change_tau"].get<int>();
      s.actors.push_back(spec);
    }
    s.criticality = parse_name<Criticality>(j.at("criticality"), "criticality",
                                            criticality_from_string);
    s.handedness = handedness_from(j.at("handedness").get<std::string>());
    s.frame_interval = j.at("frame_interval").get<double>();
    s.start_s = j.at("start_s").get<double>();
    s.validate();
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw CompileError(std::string("malformed script: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw CompileError(std::string("malformed script: ") + e.what());
  }
}

// ---------------------------------------------------------------- compile

double action_speed(NodeClass cls, std::optional<Relation> action) {
  double base;
  switch (cls) {
    case NodeClass::Pedestrian: base = 1.4; break;
    case NodeClass::Cyclist: base = 4.0; break;
    case NodeClass::Motorbike: base = 7.0; break;
    case NodeClass::Bus: base = 5.0; break;
    default: base = 6.0; break;
  }
  if (!action) return base;
  switch (*action) {
    case Relation::Stop: return 0.0;
    case Relation::Brake: return 0.5 * base;
    case Relation::TurnLeft:
    case Relation::TurnRight: return 0.6 * base;
    default: return base;
  }
}

namespace {

// Lower value wins when several actions share a tau.
int action_rank(Relation r) {
  switch (r) {
    case Relation::Stop: return 0;
    case Relation::Brake: return 1;
    case Relation::Cross: return 2;
    case Relation::TurnLeft:
    case Relation::TurnRight: return 3;
    case Relation::Move: return 4;
    default: return 5;  // indicators
  }
}

EgoSpec ego_for(Relation av) {
  EgoSpec e;
  e.av_action = av;
  e.start_lane = -1;
  switch (av) {
    case Relation::AvMoveLeft:
      e.start_lane = -2;
      e.lane_changes = {{1, -1}};
      break;
    case Relation::AvMoveRight: e.lane_changes = {{1, -2}}; break;
    case Relation::AvOvertake: e.lane_changes = {{1, 1}, {4, -1}}; break;
    case Relation::AvStop: e.stop_from = 2; break;
    case Relation::AvTurnLeft:
    case Relation::AvTurnRight: e.slow_from = 3; break;
    default: break;
  }
  return e;
}

int lane_for(NodeClass loc, const EgoSpec& ego) {
  switch (loc) {
    case NodeClass::VehicleLane: return ego.start_lane;
    case NodeClass::OutgoingLane: return ego.start_lane == -1 ? -2 : -1;
    case NodeClass::OutgoingCycleLane: return -3;
    case NodeClass::Pavement:
    case NodeClass::BusStop:
    case NodeClass::Parking: return -4;
    case NodeClass::IncomingLane: return 1;
    case NodeClass::IncomingCycleLane: return 3;
    case NodeClass::PedestrianCrossing: return kCrossingLane;
    case NodeClass::Junction: return kJunctionLane;
    default: throw CompileError("'" + std::string(to_string(loc)) + "' is not a location");
  }
}

Heading heading_for(NodeClass loc) {
  switch (loc) {
    case NodeClass::IncomingLane:
    case NodeClass::IncomingCycleLane: return Heading::Oncoming;
    case NodeClass::PedestrianCrossing:
    case NodeClass::Junction: return Heading::Crossing;
    default: return Heading::SameDirection;
  }
}

}  // namespace

ScenarioScript graph_to_script(const TemporalGraph& g, const CompileOptions& opts) {
  opts.bands.validate();
  if (!(opts.frame_interval > 0.0)) throw std::invalid_argument("frame interval must be positive");
  const auto ego_uid = g.ego_uid();
  if (!ego_uid) throw CompileError("scenario graph has no EGO node");
  const Relation av = g.av_action.value_or(Relation::AvMove);
  const Criticality crit = g.criticality.value_or(Criticality::Visible);

  ScenarioScript s;
  s.ego = ego_for(av);
  s.criticality = crit;
  s.frame_interval = opts.frame_interval;
  bool junction = av == Relation::AvTurnLeft || av == Relation::AvTurnRight;
  for (const auto& n : g.nodes) junction = junction || n.cls == NodeClass::Junction;
  s.map = default_map(Handedness::Right, junction);

  for (const auto& n : g.nodes) {
    if (!is_dynamic_agent(n.cls)) continue;
    const std::string who = std::string(to_string(n.cls)) + " " + std::to_string(n.track);
    std::array<std::optional<NodeClass>, kFramesPerScenario> where{};
    std::array<std::optional<Relation>, kFramesPerScenario> proximity{};
    bool towards_at_start = false;
    ActorSpec a;
    a.track_id = n.track;
    a.cls = n.cls;
    for (const auto& e : g.edges) {
      if (e.tau < 0 || e.tau >= kFramesPerScenario) continue;
      const auto t = static_cast<std::size_t>(e.tau);
      if (e.src == n.uid && e.relation == Relation::IsIn) {
        if (!where[t]) where[t] = g.node(e.dst).cls;
      } else if (e.src == n.uid && e.dst == n.uid && is_agent_action(e.relation)) {
        if (!a.timeline[t] || action_rank(e.relation) < action_rank(*a.timeline[t])) {
          a.timeline[t] = e.relation;
        }
      } else if ((e.src == n.uid && e.dst == *ego_uid) || (e.dst == n.uid && e.src == *ego_uid)) {
        if (is_proximity(e.relation)) proximity[t] = e.relation;
        if (e.relation == Relation::MovingTowards && t == 0) towards_at_start = true;
      }
    }
    std::optional<NodeClass> first, last;
    int last_tau = 0;
    for (int t = 0; t < kFramesPerScenario; ++t) {
      if (!where[static_cast<std::size_t>(t)]) continue;
      if (!first) first = where[static_cast<std::size_t>(t)];
      last = where[static_cast<std::size_t>(t)];
      last_tau = t;
    }
    if (!first) throw CompileError("actor " + who + " has no IsIn edge");

    a.heading = heading_for(*first);
    a.spawn.lane = lane_for(*first, s.ego);
    a.goal.lane = lane_for(*last, s.ego);
    if (a.goal.lane != a.spawn.lane) {
      for (int t = 1; t <= last_tau; ++t) {
        const auto& w = where[static_cast<std::size_t>(t)];
        if (w && lane_for(*w, s.ego) != a.spawn.lane) {
          a.lane_change_tau = t;
          break;
        }
      }
    }

    // An actor closing in on a neighbouring same-direction lane is overtaking
    // the ego and starts behind it; everyone else starts ahead.
    const bool overtaking = towards_at_start && (*first == NodeClass::OutgoingLane ||
                                                 *first == NodeClass::OutgoingCycleLane);
    const double sign = overtaking ? -1.0 : 1.0;
    a.spawn.offset = sign * opts.bands.of(crit);
    std::optional<Relation> final_prox;
    for (const auto& p : proximity) {
      if (p) final_prox = p;
    }
    a.goal.offset = sign * opts.bands.of(final_prox ? criticality_of(*final_prox) : crit);

    std::optional<Relation> carried;
    for (std::size_t t = 0; t < kFramesPerScenario; ++t) {
      if (a.timeline[t]) carried = a.timeline[t];
      a.speeds[t] = action_speed(a.cls, carried);
    }
    s.actors.push_back(a);
  }
  s.validate();
  return opts.handedness == Handedness::Left ? mirror(s) : s;
}

Relation mirror_relation(Relation r) {
  switch (r) {
    case Relation::AvMoveLeft: return Relation::AvMoveRight;
    case Relation::AvMoveRight: return Relation::AvMoveLeft;
    case Relation::AvTurnLeft: return Relation::AvTurnRight;
    case Relation::AvTurnRight: return Relation::AvTurnLeft;
    case Relation::TurnLeft: return Relation::TurnRight;
    case Relation::TurnRight: return Relation::TurnLeft;
    case Relation::IndicateLeft: return Relation::IndicateRight;
    case Relation::IndicateRight: return Relation::IndicateLeft;
    default: return r;
  }
}

ScenarioScript mirror(const ScenarioScript& s) {
  ScenarioScript m = s;
  for (auto& l : m.map.lanes) {
    l.id = mirror_lane(l.id);
    l.center = negate(l.center);
  }
  m.ego.av_action = mirror_relation(s.ego.av_action);
  m.ego.start_lane = mirror_lane(s.ego.start_lane);
  for (auto& [tau, lane] : m.ego.lane_changes) lane = mirror_lane(lane);
  for (auto& a : m.actors) {
    a.spawn.lane = mirror_lane(a.spawn.lane);
    a.goal.lane = mirror_lane(a.goal.lane);
    for (auto& r : a.timeline) {
      if (r) r = mirror_relation(*r);
    }
  }
  m.handedness = s.handedness == Handedness::Right ? Handedness::Left : Handedness::Right;
  return m;
}

// ------------------------------------------------------------------- emit

namespace {

using xml::Element;

std::string actor_name(const ActorSpec& a) { return "actor_" + std::to_string(a.track_id); }

Element entity_object(const std::string& name, NodeClass cls) {
  Element obj("ScenarioObject");
  obj.attr("name", name);
  if (cls == NodeClass::Pedestrian) {
    obj.add(Element("Pedestrian")
                .attr("name", name + "_model")
                .attr("pedestrianCategory", "pedestrian")
                .attr("mass", fmt3(80.0)));
    return obj;
  }
  std::string category = "car";
  if (cls == NodeClass::Bus) category = "bus";
  else if (cls == NodeClass::Motorbike) category = "motorbike";
  else if (cls == NodeClass::Cyclist) category = "bicycle";
  obj.add(Element("Vehicle").attr("name", name + "_model").attr("vehicleCategory", category));
  return obj;
}

Element speed_action(double target, const char* shape, double value, const char* dimension) {
  Element dyn("SpeedActionDynamics");
  dyn.attr("dynamicsShape", shape).attr("value", fmt3(value)).attr("dynamicsDimension", dimension);
  Element tgt("SpeedActionTarget");
  tgt.add(Element("AbsoluteTargetSpeed").attr("value", fmt3(target)));
  Element speed("SpeedAction");
  speed.add(std::move(dyn)).add(std::move(tgt));
  Element lon("LongitudinalAction");
  lon.add(std::move(speed));
  Element pa("PrivateAction");
  pa.add(std::move(lon));
  return pa;
}

Element lane_change_action(int lane) {
  Element dyn("LaneChangeActionDynamics");
  dyn.attr("dynamicsShape", "sinusoidal").attr("value", fmt3(2.0)).attr("dynamicsDimension", "time");
  Element tgt("LaneChangeTarget");
  tgt.add(Element("AbsoluteTargetLane").attr("value", std::to_string(lane)));
  Element lc("LaneChangeAction");
  lc.add(std::move(dyn)).add(std::move(tgt));
  Element lat("LateralAction");
  lat.add(std::move(lc));
  Element pa("PrivateAction");
  pa.add(std::move(lat));
  return pa;
}

Element time_trigger(const std::string& name, double t) {
  Element cond("Condition");
  cond.attr("name", name).attr("delay", fmt3(0.0)).attr("conditionEdge", "rising");
  Element byv("ByValueCondition");
  byv.add(Element("SimulationTimeCondition").attr("value", fmt3(t)).attr("rule", "greaterThan"));
  cond.add(std::move(byv));
  Element grp("ConditionGroup");
  grp.add(std::move(cond));
  Element trig("StartTrigger");
  trig.add(std::move(grp));
  return trig;
}

Element event(const std::string& name, Element private_action, double t) {
  Element ev("Event");
  ev.attr("name", name).attr("priority", "overwrite");
  Element act("Action");
  act.attr("name", name + "_action");
  act.add(std::move(private_action));
  ev.add(std::move(act));
  ev.add(time_trigger(name + "_time", t));
  return ev;
}

Element maneuver_group(const std::string& entity, std::vector<Element> events) {
  Element mg("ManeuverGroup");
  mg.attr("name", entity + "_group").attr("maximumExecutionCount", "1");
  Element actors("Actors");
  actors.attr("selectTriggeringEntities", "false");
  actors.add(Element("EntityRef").attr("entityRef", entity));
  mg.add(std::move(actors));
  if (!events.empty()) {
    Element man("Maneuver");
    man.attr("name", entity + "_maneuver");
    for (auto& e : events) man.add(std::move(e));
    mg.add(std::move(man));
  }
  return mg;
}

Element init_private(const std::string& entity, int lane, double s, double speed) {
  Element pos("Position");
  pos.add(Element("LanePosition")
              .attr("roadId", "0")
              .attr("laneId", std::to_string(lane))
              .attr("s", fmt3(s))
              .attr("offset", fmt3(0.0)));
  Element tp("TeleportAction");
  tp.add(std::move(pos));
  Element pa("PrivateAction");
  pa.add(std::move(tp));
  Element priv("Private");
  priv.attr("entityRef", entity);
  priv.add(std::move(pa));
  priv.add(speed_action(speed, "step", 0.0, "time"));
  return priv;
}

}  // namespace

std::string emit_openscenario(const ScenarioScript& s) {
  s.validate();
  Element root("OpenSCENARIO");
  root.add(Element("FileHeader")
               .attr("revMajor", "1")
               .attr("revMinor", "0")
               .attr("date", "1970-01-01T00:00:00")
               .attr("description", "Generated scenario: " + std::string(to_string(s.ego.av_action)) +
                                        ", criticality " + std::string(to_string(s.criticality)) +
                                        ", " + std::string(to_string(s.handedness)) + "-hand traffic")
               .attr("author", "critscene"));
  Element road("RoadNetwork");
  road.add(Element("LogicFile").attr("filepath", "straight_road.xodr"));
  root.add(std::move(road));

  Element entities("Entities");
  entities.add(entity_object("ego", NodeClass::Car));
  for (const auto& a : s.actors) entities.add(entity_object(actor_name(a), a.cls));
  root.add(std::move(entities));

  Element actions("Actions");
  actions.add(init_private("ego", s.ego.start_lane, s.start_s, 0.0));
  for (const auto& a : s.actors) {
    actions.add(init_private(actor_name(a), a.spawn.lane, s.start_s + a.spawn.offset, a.speeds[0]));
  }
  Element init("Init");
  init.add(std::move(actions));

  Element act("Act");
  act.attr("name", "scenario_act");
  {
    std::vector<Element> events;
    for (const auto& [tau, lane] : s.ego.lane_changes) {
      events.push_back(event("ego_lane_change_tau" + std::to_string(tau), lane_change_action(lane),
                             tau * s.frame_interval));
    }
    if (s.ego.stop_from) {
      events.push_back(event("ego_stop_tau" + std::to_string(*s.ego.stop_from),
                             speed_action(0.0, "linear", 3.0, "rate"),
                             *s.ego.stop_from * s.frame_interval));
    }
    if (s.ego.slow_from) {
      events.push_back(event("ego_slow_tau" + std::to_string(*s.ego.slow_from),
                             speed_action(s.ego.slow_speed, "linear", 3.0, "rate"),
                             *s.ego.slow_from * s.frame_interval));
    }
    act.add(maneuver_group("ego", std::move(events)));
  }
  for (const auto& a : s.actors) {
    const std::string name = actor_name(a);
    std::vector<Element> events;
    for (int t = 1; t < kFramesPerScenario; ++t) {
      const auto ti = static_cast<std::size_t>(t);
      if (a.speeds[ti] == a.speeds[ti - 1]) continue;
      const std::string kind = a.speeds[ti] == 0.0 ? "_stop_tau" : "_speed_tau";
      events.push_back(event(name + kind + std::to_string(t),
                             speed_action(a.speeds[ti], "linear", 3.0, "rate"), t * s.frame_interval));
    }
    if (a.lane_change_tau) {
      events.push_back(event(name + "_lane_change_tau" + std::to_string(*a.lane_change_tau),
                             lane_change_action(a.goal.lane), *a.lane_change_tau * s.frame_interval));
    }
    act.add(maneuver_group(name, std::move(events)));
  }
  act.add(time_trigger("act_start", 0.0));

  Element story("Story");
  story.attr("name", "scenario_story");
  story.add(std::move(act));

  Element stop("StopTrigger");
  {
    Element cond("Condition");
    cond.attr("name", "horizon").attr("delay", fmt3(0.0)).attr("conditionEdge", "rising");
    Element byv("ByValueCondition");
    byv.add(Element("SimulationTimeCondition").attr("value", fmt3(kHorizonS)).attr("rule", "greaterThan"));
    cond.add(std::move(byv));
    Element grp("ConditionGroup");
    grp.add(std::move(cond));
    stop.add(std::move(grp));
  }

  Element board("Storyboard");
  board.add(std::move(init)).add(std::move(story)).add(std::move(stop));
  root.add(std::move(board));
  return xml::write(root);
}

std::string_view bundled_subset_xsd() { return detail::kBundledSubsetXsd; }

}  // namespace critscene
