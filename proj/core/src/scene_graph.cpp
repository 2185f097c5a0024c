#include "critscene/scene_graph.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>

#include "critscene/ingestion.hpp"

namespace critscene {

namespace {

constexpr int kLastTau = kFramesPerScenario - 1;

std::string where(int frame, int track) {
  return "frame " + std::to_string(frame) + " entity " + std::to_string(track);
}

}  // namespace

std::string_view to_string(Flavor f) {
  switch (f) {
    case Flavor::Scenario: return "scenario";
    case Flavor::Seed: return "seed";
    case Flavor::DatabaseSeed: return "database_seed";
    case Flavor::Augmented: return "augmented";
  }
  return "?";
}

std::optional<Flavor> flavor_from_string(std::string_view s) {
  for (Flavor f : {Flavor::Scenario, Flavor::Seed, Flavor::DatabaseSeed, Flavor::Augmented}) {
    if (to_string(f) == s) return f;
  }
  return std::nullopt;
}

// ------------------------------------------------------------ TemporalGraph

const Node* TemporalGraph::find(int uid) const {
  for (const auto& n : nodes) {
    if (n.uid == uid) return &n;
  }
  return nullptr;
}

const Node& TemporalGraph::node(int uid) const {
  const Node* n = find(uid);
  if (n == nullptr) throw GraphError("no node with uid " + std::to_string(uid));
  return *n;
}

std::optional<int> TemporalGraph::ego_uid() const {
  for (const auto& n : nodes) {
    if (n.cls == NodeClass::Ego) return n.uid;
  }
  return std::nullopt;
}

std::optional<int> TemporalGraph::criticality_node_uid() const {
  for (const auto& n : nodes) {
    if (is_criticality_node(n.cls)) return n.uid;
  }
  return std::nullopt;
}

bool TemporalGraph::is_conditioning(const Edge& e) const {
  if (e.relation == Relation::CriticalityLink) return true;
  if (!is_av_action(e.relation) || e.src != e.dst) return false;
  const auto ego = ego_uid();
  return ego && *ego == e.src;
}

std::vector<NodeClass> TemporalGraph::agent_classes() const {
  std::vector<NodeClass> out;
  for (const auto& n : nodes) {
    if (is_agent(n.cls)) out.push_back(n.cls);
  }
  return out;
}

int TemporalGraph::next_uid() const {
  int m = -1;
  for (const auto& n : nodes) m = std::max(m, n.uid);
  return m + 1;
}

// ---------------------------------------------------------------- validate

void validate(const TemporalGraph& g, const Ontology& ont) {
  std::unordered_map<int, NodeClass> cls;
  int egos = 0, crit_nodes = 0;
  for (const auto& n : g.nodes) {
    if (!cls.emplace(n.uid, n.cls).second) {
      throw GraphError("duplicate node uid " + std::to_string(n.uid));
    }
    if (n.track < 0) throw GraphError("negative track id on node " + std::to_string(n.uid));
    if (n.cls == NodeClass::Ego) {
      ++egos;
      if (n.track != 0) throw GraphError("EGO must have track id 0");
    }
    if (is_criticality_node(n.cls)) ++crit_nodes;
  }
  if (egos > 1) throw GraphError("more than one EGO node");
  if (crit_nodes > 1) throw GraphError("more than one criticality node");

  const auto ego = g.ego_uid();
  int av_edges = 0, crit_links = 0, other_ego_edges = 0;
  for (const auto& e : g.edges) {
    const auto s = cls.find(e.src), d = cls.find(e.dst);
    if (s == cls.end() || d == cls.end()) {
      throw GraphError("edge " + std::to_string(e.src) + "->" + std::to_string(e.dst) +
                       " has a dangling endpoint");
    }
    if (e.tau < 0 || e.tau > kLastTau) {
      throw GraphError("edge tau " + std::to_string(e.tau) + " outside [0, " +
                       std::to_string(kLastTau) + "]");
    }
    if (!ont.validate_triplet(s->second, e.relation, d->second)) {
      throw GraphError("invalid triplet (" + std::string(to_string(s->second)) + ", " +
                       std::string(to_string(e.relation)) + ", " +
                       std::string(to_string(d->second)) + ")");
    }
    if (g.is_conditioning(e)) {
      if (e.relation == Relation::CriticalityLink) {
        ++crit_links;
        if (g.criticality && d->second != criticality_node_class(*g.criticality)) {
          throw GraphError("criticality link does not point at the graph's criticality");
        }
      } else {
        ++av_edges;
        if (g.av_action && e.relation != *g.av_action) {
          throw GraphError("AV-action self-loop disagrees with the graph's av_action");
        }
      }
    } else if (ego && (e.src == *ego || e.dst == *ego)) {
      ++other_ego_edges;
    }
  }

  const auto require_conditioning = [&](std::string_view flavor) {
    if (!g.av_action || !g.criticality) {
      throw GraphError(std::string(flavor) + " graph needs av_action and criticality");
    }
    if (av_edges != 1 || crit_links != 1 || crit_nodes != 1) {
      throw GraphError(std::string(flavor) +
                       " graph needs exactly one AV-action self-loop and one criticality link");
    }
  };
  switch (g.flavor) {
    case Flavor::Scenario:
    case Flavor::Augmented:
      require_conditioning(to_string(g.flavor));
      break;
    case Flavor::Seed:
      require_conditioning("seed");
      if (other_ego_edges != 0) throw GraphError("seed graph has EGO-incident relation edges");
      break;
    case Flavor::DatabaseSeed:
      if (other_ego_edges + av_edges + crit_links != 0) {
        throw GraphError("database seed has EGO-incident edges");
      }
      if (crit_nodes != 0 || g.av_action || g.criticality) {
        throw GraphError("database seed carries conditioning");
      }
      break;
  }
}

// ------------------------------------------------------------ construction

FrameGraph build_frame_graph(const FrameAnnotation& frame, const Ontology& ont) {
  FrameGraph fg;
  fg.frame_index = frame.frame_index;
  fg.av_action = frame.av_action;
  if (fg.av_action && !is_av_action(*fg.av_action)) {
    throw SchemaError("frame " + std::to_string(frame.frame_index) + " field 'av_action': '" +
                      std::string(to_string(*fg.av_action)) + "' is not an AV action");
  }
  fg.nodes.push_back({0, 0, NodeClass::Ego});

  std::unordered_map<int, int> agent_uid;  // track -> uid
  for (const auto& ent : frame.entities) {
    const std::string at = where(frame.frame_index, ent.track_id);
    if (!is_agent(ent.cls)) {
      throw SchemaError(at + " field 'cls': '" + std::string(to_string(ent.cls)) +
                        "' is not an agent class");
    }
    if (ent.track_id < 0) throw SchemaError(at + " field 'track_id': negative");
    const int uid = static_cast<int>(fg.nodes.size());
    if (!agent_uid.emplace(ent.track_id, uid).second) {
      throw SchemaError("frame " + std::to_string(frame.frame_index) + ": duplicate track_id " +
                        std::to_string(ent.track_id));
    }
    fg.nodes.push_back({uid, ent.track_id, ent.cls});
  }

  std::map<std::pair<NodeClass, int>, int> location_uid;
  const auto location = [&](const LocationRef& ref, const std::string& field) {
    if (!is_location(ref.cls)) {
      throw SchemaError(field + ": '" + std::string(to_string(ref.cls)) +
                        "' is not a location class");
    }
    if (ref.instance < 0) throw SchemaError(field + ": negative location instance");
    auto [it, fresh] = location_uid.try_emplace({ref.cls, ref.instance}, 0);
    if (fresh) {
      it->second = static_cast<int>(fg.nodes.size());
      fg.nodes.push_back({it->second, ref.instance, ref.cls});
    }
    return it->second;
  };
  const auto add = [&](int src, Relation r, int dst, const std::string& field) {
    const NodeClass s = fg.nodes[static_cast<std::size_t>(src)].cls;
    const NodeClass d = fg.nodes[static_cast<std::size_t>(dst)].cls;
    if (!ont.validate_triplet(s, r, d)) {
      throw SchemaError(field + ": relation '" + std::string(to_string(r)) + "' is not valid for (" +
                        std::string(to_string(s)) + ", " + std::string(to_string(d)) + ")");
    }
    fg.edges.push_back({src, dst, r, 0});
  };

  std::vector<int> red_lights;
  for (const auto& ent : frame.entities) {
    const std::string at = where(frame.frame_index, ent.track_id);
    const int uid = agent_uid.at(ent.track_id);
    if (ent.location) {
      add(uid, Relation::IsIn, location(*ent.location, at + " field 'location'"),
          at + " field 'location'");
    }
    for (Relation a : ent.actions) {
      if (!is_agent_action(a)) {
        throw SchemaError(at + " field 'actions': '" + std::string(to_string(a)) +
                          "' is not an agent action");
      }
      add(uid, a, uid, at + " field 'actions'");
    }
    if (ent.light_state) {
      if (!is_light_state(*ent.light_state)) {
        throw SchemaError(at + " field 'light': '" + std::string(to_string(*ent.light_state)) +
                          "' is not a light state");
      }
      add(uid, *ent.light_state, uid, at + " field 'light'");
      if (*ent.light_state == Relation::Red) red_lights.push_back(uid);
    }
    if (ent.relative_motion) {
      if (!is_relative_motion(*ent.relative_motion)) {
        throw SchemaError(at + " field 'motion': '" +
                          std::string(to_string(*ent.relative_motion)) +
                          "' is not a relative motion");
      }
      add(uid, *ent.relative_motion, 0, at + " field 'motion'");
    }
    if (ent.distance_m.has_value() == ent.proximity.has_value()) {
      throw SchemaError(at + ": exactly one of 'distance_m' and 'proximity' is required");
    }
    Criticality prox;
    if (ent.distance_m) {
      if (!(*ent.distance_m > 0.0) || !std::isfinite(*ent.distance_m)) {
        throw SchemaError(at + " field 'distance_m': must be a positive finite distance");
      }
      prox = proximity_from_distance(*ent.distance_m);
    } else {
      prox = *ent.proximity;
    }
    add(uid, proximity_relation(prox), 0,
        at + (ent.distance_m ? " field 'distance_m'" : " field 'proximity'"));
  }

  for (int light : red_lights) {
    for (const auto& ent : frame.entities) {
      if (!is_dynamic_agent(ent.cls)) continue;
      const int uid = agent_uid.at(ent.track_id);
      add(uid, Relation::MustStop, light, where(frame.frame_index, ent.track_id) + " MustStop");
    }
  }

  if (frame.ego_location) {
    const std::string field = "frame " + std::to_string(frame.frame_index) + " field 'ego_location'";
    add(0, Relation::IsIn, location(*frame.ego_location, field), field);
  }
  return fg;
}

TemporalGraph build_temporal_graph(std::span<const FrameGraph> frames, const Ontology& ont) {
  if (frames.size() != static_cast<std::size_t>(kFramesPerScenario)) {
    throw GraphError("a temporal graph needs exactly " + std::to_string(kFramesPerScenario) +
                     " frames, got " + std::to_string(frames.size()));
  }
  TemporalGraph g;
  g.flavor = Flavor::Scenario;
  g.frame_times.clear();
  g.nodes.push_back({0, 0, NodeClass::Ego});

  std::map<int, int> agents;                         // track -> uid
  std::map<std::pair<NodeClass, int>, int> places;  // (class, instance) -> uid
  for (std::size_t tau = 0; tau < frames.size(); ++tau) {
    const FrameGraph& f = frames[tau];
    g.frame_times.push_back(f.frame_index);
    std::unordered_map<int, int> local;
    for (const auto& n : f.nodes) {
      int uid;
      if (n.cls == NodeClass::Ego) {
        uid = 0;
      } else if (is_location(n.cls)) {
        auto [it, fresh] = places.try_emplace({n.cls, n.track}, g.next_uid());
        if (fresh) g.nodes.push_back({it->second, n.track, n.cls});
        uid = it->second;
      } else if (is_agent(n.cls)) {
        auto [it, fresh] = agents.try_emplace(n.track, g.next_uid());
        if (fresh) {
          g.nodes.push_back({it->second, n.track, n.cls});
        } else if (g.node(it->second).cls != n.cls) {
          throw GraphError("track " + std::to_string(n.track) + " changes class from " +
                           std::string(to_string(g.node(it->second).cls)) + " to " +
                           std::string(to_string(n.cls)) + " at frame " +
                           std::to_string(f.frame_index));
        }
        uid = it->second;
      } else {
        throw GraphError("frame graph contains a criticality node");
      }
      local[n.uid] = uid;
    }
    for (const auto& e : f.edges) {
      g.edges.push_back({local.at(e.src), local.at(e.dst), e.relation, static_cast<int>(tau)});
    }
  }

  g.criticality = derive_criticality(g, ont);
  g.av_action = derive_av_action(frames);
  const int crit = g.next_uid();
  g.nodes.push_back({crit, 0, criticality_node_class(*g.criticality)});
  g.edges.push_back({0, 0, *g.av_action, kLastTau});
  g.edges.push_back({0, crit, Relation::CriticalityLink, kLastTau});
  return g;
}

Criticality derive_criticality(const TemporalGraph& g, const Ontology& ont) {
  Criticality c = Criticality::Visible;
  for (const auto& e : g.edges) {
    if (is_proximity(e.relation)) c = ont.most_severe(c, criticality_of(e.relation));
  }
  return c;
}

namespace {

template <typename Frame>
Relation last_recorded_action(std::span<const Frame> frames) {
  for (std::size_t i = frames.size(); i-- > 0;) {
    if (frames[i].av_action) return *frames[i].av_action;
  }
  throw LabelingError("no frame in the window records an AV action");
}

}  // namespace

Relation derive_av_action(std::span<const FrameGraph> frames) {
  return last_recorded_action(frames);
}

Relation derive_av_action(std::span<const FrameAnnotation> frames) {
  return last_recorded_action(frames);
}

TemporalGraph prune_to_seed(const TemporalGraph& g, bool keep_conditioning) {
  if (g.flavor != Flavor::Scenario) {
    throw GraphError("prune_to_seed expects a scenario graph, got " +
                     std::string(to_string(g.flavor)));
  }
  const auto ego = g.ego_uid();
  TemporalGraph out;
  out.frame_times = g.frame_times;
  for (const auto& n : g.nodes) {
    if (!keep_conditioning && is_criticality_node(n.cls)) continue;
    out.nodes.push_back(n);
  }
  for (const auto& e : g.edges) {
    if (g.is_conditioning(e)) {
      if (keep_conditioning) out.edges.push_back(e);
      continue;
    }
    if (ego && (e.src == *ego || e.dst == *ego)) continue;
    out.edges.push_back(e);
  }
  if (keep_conditioning) {
    out.flavor = Flavor::Seed;
    out.av_action = g.av_action;
    out.criticality = g.criticality;
  } else {
    out.flavor = Flavor::DatabaseSeed;
  }
  return out;
}

TemporalGraph add_conditioning(const TemporalGraph& db_seed, Relation av_action,
                               Criticality criticality) {
  if (db_seed.flavor != Flavor::DatabaseSeed) {
    throw GraphError("add_conditioning expects a database seed");
  }
  if (!is_av_action(av_action)) {
    throw GraphError("'" + std::string(to_string(av_action)) + "' is not an AV action");
  }
  TemporalGraph g = db_seed;
  g.flavor = Flavor::Seed;
  g.av_action = av_action;
  g.criticality = criticality;
  int ego;
  if (const auto e = g.ego_uid()) {
    ego = *e;
  } else {
    ego = g.next_uid();
    g.nodes.insert(g.nodes.begin(), Node{ego, 0, NodeClass::Ego});
  }
  const int crit = g.next_uid();
  g.nodes.push_back({crit, 0, criticality_node_class(criticality)});
  g.edges.push_back({ego, ego, av_action, kLastTau});
  g.edges.push_back({ego, crit, Relation::CriticalityLink, kLastTau});
  return g;
}

FrameGraph slice(const TemporalGraph& g, int tau) {
  if (tau < 0 || tau > kLastTau) throw GraphError("slice: tau out of range");
  FrameGraph f;
  f.frame_index = static_cast<std::size_t>(tau) < g.frame_times.size()
                      ? g.frame_times[static_cast<std::size_t>(tau)]
                      : tau;
  std::set<int> used;
  if (const auto ego = g.ego_uid()) used.insert(*ego);
  for (const auto& e : g.edges) {
    if (e.tau != tau || g.is_conditioning(e)) continue;
    used.insert(e.src);
    used.insert(e.dst);
    f.edges.push_back({e.src, e.dst, e.relation, 0});
  }
  for (const auto& n : g.nodes) {
    if (used.count(n.uid)) f.nodes.push_back(n);
  }
  return f;
}

// ------------------------------------------------------------ augmentation

AugmentedGraph augment(const TemporalGraph& seed, const Ontology& ont) {
  if (seed.flavor != Flavor::Seed) {
    throw GraphError("augment expects a seed graph, got " + std::string(to_string(seed.flavor)));
  }
  const auto ego = seed.ego_uid();
  if (!ego) throw GraphError("augment: seed graph has no EGO node");
  AugmentedGraph out;
  out.graph = seed;
  out.graph.flavor = Flavor::Augmented;
  for (int tau = 0; tau < kFramesPerScenario; ++tau) {
    for (const auto& n : seed.nodes) {
      if (n.cls == NodeClass::Ego || is_criticality_node(n.cls)) continue;
      for (Relation r : ont.ego_candidate_relations(n.cls)) {
        out.candidates.push_back({*ego, n.uid, r, tau, std::nullopt, std::nullopt});
      }
    }
  }
  return out;
}

Edge candidate_edge(const TripletCandidate& c, const TemporalGraph& g, const Ontology& ont) {
  if (ont.ego_is_object(c.relation, g.node(c.dst).cls)) return {c.dst, c.src, c.relation, c.tau};
  return {c.src, c.dst, c.relation, c.tau};
}

void label_candidates(std::span<TripletCandidate> candidates, const TemporalGraph& ground_truth,
                      const Ontology& ont) {
  const std::set<Edge> truth(ground_truth.edges.begin(), ground_truth.edges.end());
  for (auto& c : candidates) {
    c.label = truth.count(candidate_edge(c, ground_truth, ont)) ? 1 : 0;
  }
}

// ---------------------------------------------------------------- features

std::array<double, 2> positional_encoding(int track) {
  if (track < 0) throw GraphError("positional_encoding: negative track id");
  const double t = static_cast<double>(track);
  return {std::sin(t), std::cos(t)};
}

nn::Tensor node_features(const Node& n, bool with_positional_encoding) {
  nn::Tensor x(1, kNodeFeatureWidth, 0.0);
  x[index_of(n.cls)] = 1.0;
  if (with_positional_encoding) {
    const auto pe = positional_encoding(n.track);
    x[kNumNodeClasses] = pe[0];
    x[kNumNodeClasses + 1] = pe[1];
  }
  return x;
}

nn::Tensor edge_features(Relation r, int tau) {
  nn::Tensor x(1, kEdgeFeatureWidth, 0.0);
  x[index_of(r)] = 1.0;
  x[kNumRelations] = static_cast<double>(tau) / static_cast<double>(kLastTau);
  return x;
}

FeatureVectors assemble_features(const AugmentedGraph& g, bool with_positional_encoding) {
  FeatureVectors fv;
  const auto& nodes = g.graph.nodes;
  const auto& edges = g.graph.edges;
  fv.nodes = nn::Tensor(nodes.size(), kNodeFeatureWidth, 0.0);
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const nn::Tensor x = node_features(nodes[i], with_positional_encoding);
    for (std::size_t k = 0; k < kNodeFeatureWidth; ++k) fv.nodes(i, k) = x[k];
  }
  fv.seed_edges = nn::Tensor(edges.size(), kEdgeFeatureWidth, 0.0);
  fv.conditioning.resize(edges.size());
  for (std::size_t i = 0; i < edges.size(); ++i) {
    const nn::Tensor x = edge_features(edges[i].relation, edges[i].tau);
    for (std::size_t k = 0; k < kEdgeFeatureWidth; ++k) fv.seed_edges(i, k) = x[k];
    fv.conditioning[i] = g.graph.is_conditioning(edges[i]);
  }
  fv.candidate_edges = nn::Tensor(g.candidates.size(), kEdgeFeatureWidth, 0.0);
  for (std::size_t i = 0; i < g.candidates.size(); ++i) {
    const nn::Tensor x = edge_features(g.candidates[i].relation, g.candidates[i].tau);
    for (std::size_t k = 0; k < kEdgeFeatureWidth; ++k) fv.candidate_edges(i, k) = x[k];
  }
  return fv;
}

}  // namespace critscene
