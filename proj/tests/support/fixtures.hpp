#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <tuple>
#include <vector>

#include "critscene/ingestion.hpp"
#include "critscene/scene_graph.hpp"

namespace critscene::testing {

inline TemporalGraph graph_of(const AnnotatedVideo& v, const Ontology& ont = Ontology::builtin()) {
  std::vector<FrameGraph> frames;
  for (const auto& f : v.frames) frames.push_back(build_frame_graph(f, ont));
  return build_temporal_graph(frames, ont);
}

inline std::vector<TemporalGraph> synthetic_graphs(int n, std::uint64_t seed) {
  SynthConfig cfg;
  cfg.n_scenarios = n;
  cfg.rng_seed = seed;
  std::vector<TemporalGraph> out;
  for (const auto& v : generate_synthetic(cfg)) out.push_back(graph_of(v));
  return out;
}

/// Node identity that survives uid renumbering.
using NodeKey = std::pair<NodeClass, int>;
using EdgeKey = std::tuple<NodeKey, Relation, NodeKey, int>;

inline std::set<EdgeKey> edge_keys(const std::vector<Node>& nodes, const std::vector<Edge>& edges) {
  std::map<int, NodeKey> key;
  for (const auto& n : nodes) key[n.uid] = {n.cls, n.track};
  std::set<EdgeKey> out;
  for (const auto& e : edges) out.insert({key.at(e.src), e.relation, key.at(e.dst), e.tau});
  return out;
}

/// EGO-incident edges other than the AV-action self-loop and the criticality link.
inline std::set<EdgeKey> ego_relation_keys(const TemporalGraph& g) {
  std::vector<Edge> picked;
  const int ego = *g.ego_uid();
  for (const auto& e : g.edges) {
    if ((e.src == ego || e.dst == ego) && !g.is_conditioning(e)) picked.push_back(e);
  }
  return edge_keys(g.nodes, picked);
}

/// A small hand-built scenario: EGO on a vehicle lane, a pedestrian on a
/// pavement that gets near at tau 2, and a car that stays visible.
inline TemporalGraph tiny_scenario() {
  TemporalGraph g;
  g.nodes = {{0, 0, NodeClass::Ego},          {1, 1, NodeClass::Pedestrian},
             {2, 2, NodeClass::Car},          {3, 0, NodeClass::VehicleLane},
             {4, 1, NodeClass::Pavement},     {5, 0, NodeClass::NearNode}};
  g.av_action = Relation::AvStop;
  g.criticality = Criticality::Near;
  for (int t = 0; t < kFramesPerScenario; ++t) {
    g.edges.push_back({0, 3, Relation::IsIn, t});
    g.edges.push_back({1, 4, Relation::IsIn, t});
    g.edges.push_back({1, 1, Relation::Move, t});
    g.edges.push_back({2, 3, Relation::IsIn, t});
    g.edges.push_back({2, 2, Relation::Move, t});
    g.edges.push_back({1, 0, Relation::MovingTowards, t});
    g.edges.push_back({1, 0, t >= 2 ? Relation::Near : Relation::Visible, t});
    g.edges.push_back({2, 0, Relation::Visible, t});
  }
  g.edges.push_back({0, 0, Relation::AvStop, kFramesPerScenario - 1});
  g.edges.push_back({0, 5, Relation::CriticalityLink, kFramesPerScenario - 1});
  return g;
}

}  // namespace critscene::testing
