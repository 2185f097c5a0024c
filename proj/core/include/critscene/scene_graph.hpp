#pragma once

#include <array>
#include <compare>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "critscene/annotation.hpp"
#include "critscene/nn/tensor.hpp"
#include "critscene/ontology.hpp"

namespace critscene {

/// Frames per scenario window; temporal labels run over [0, kFramesPerScenario).
inline constexpr int kFramesPerScenario = 5;
inline constexpr std::size_t kNodeFeatureWidth = kNumNodeClasses + 2;
inline constexpr std::size_t kEdgeFeatureWidth = kNumRelations + 1;

class GraphError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when a scenario cannot be labelled (for example no AV action).
class LabelingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Node {
  int uid = 0;
  int track = 0;  // agents: track id; locations: instance id; EGO: 0
  NodeClass cls = NodeClass::Ego;

  friend bool operator==(const Node&, const Node&) = default;
};

struct Edge {
  int src = 0;
  int dst = 0;
  Relation relation = Relation::IsIn;
  int tau = 0;

  friend auto operator<=>(const Edge&, const Edge&) = default;
};

enum class Flavor { Scenario, Seed, DatabaseSeed, Augmented };

std::string_view to_string(Flavor f);
std::optional<Flavor> flavor_from_string(std::string_view s);

/// Scene graph of a single frame. Node uids are local to the frame.
struct FrameGraph {
  int frame_index = 0;
  std::optional<Relation> av_action;
  std::vector<Node> nodes;
  std::vector<Edge> edges;  // tau is always 0 here
};

/// Union of the per-frame graphs of one scenario, each edge tagged with the
/// position (tau) of the frame it came from.
struct TemporalGraph {
  std::vector<Node> nodes;
  std::vector<Edge> edges;
  std::optional<Relation> av_action;
  std::optional<Criticality> criticality;
  Flavor flavor = Flavor::Scenario;
  /// Absolute frame index of each tau slice.
  std::vector<int> frame_times = {0, 1, 2, 3, 4};

  const Node* find(int uid) const;
  const Node& node(int uid) const;
  std::optional<int> ego_uid() const;
  std::optional<int> criticality_node_uid() const;
  bool is_conditioning(const Edge& e) const;
  /// Dynamic agents and traffic lights, in node order.
  std::vector<NodeClass> agent_classes() const;
  int next_uid() const;

  friend bool operator==(const TemporalGraph&, const TemporalGraph&) = default;
};

/// Checks uid uniqueness, endpoint existence, tau range, triplet validity and
/// the structural invariants of the graph's flavor. Throws GraphError.
void validate(const TemporalGraph& g, const Ontology& ont);

FrameGraph build_frame_graph(const FrameAnnotation& frame, const Ontology& ont);
TemporalGraph build_temporal_graph(std::span<const FrameGraph> frames, const Ontology& ont);

/// Most severe proximity relation present; Visible when there is none.
Criticality derive_criticality(const TemporalGraph& g, const Ontology& ont);
/// AV action of the latest frame that records one.
Relation derive_av_action(std::span<const FrameGraph> frames);
Relation derive_av_action(std::span<const FrameAnnotation> frames);

/// Removes every EGO-incident edge. With keep_conditioning the AV-action
/// self-loop and the criticality link survive (Seed); otherwise they go too,
/// together with the criticality node (DatabaseSeed).
TemporalGraph prune_to_seed(const TemporalGraph& g, bool keep_conditioning);

/// Reintroduces a requested AV action and criticality into a database seed.
TemporalGraph add_conditioning(const TemporalGraph& db_seed, Relation av_action,
                               Criticality criticality);

/// Frame graph of one tau slice: the edges labelled tau and their endpoints.
FrameGraph slice(const TemporalGraph& g, int tau);

/// A candidate EGO relation to be scored by the model.
struct TripletCandidate {
  int src = 0;  // EGO
  int dst = 0;
  Relation relation = Relation::IsIn;
  int tau = 0;
  std::optional<int> label;
  std::optional<double> probability;
};

struct AugmentedGraph {
  TemporalGraph graph;  // seed edges, including conditioning
  std::vector<TripletCandidate> candidates;
};

/// Adds one candidate per (entity, permitted ego relation, tau). Candidates
/// are ordered by tau, then node order, then relation index.
AugmentedGraph augment(const TemporalGraph& seed, const Ontology& ont);

/// The edge a candidate stands for, oriented as the ontology stores it
/// (EGO -IsIn-> location, agent -Near-> EGO).
Edge candidate_edge(const TripletCandidate& c, const TemporalGraph& g, const Ontology& ont);

/// Sets label = 1 iff the candidate's edge exists in the ground truth.
void label_candidates(std::span<TripletCandidate> candidates, const TemporalGraph& ground_truth,
                      const Ontology& ont);

/// [sin(track), cos(track)].
std::array<double, 2> positional_encoding(int track);

struct FeatureVectors {
  nn::Tensor nodes;            // [N, 22]: one-hot class ++ positional encoding
  nn::Tensor seed_edges;       // [E, 27]: one-hot relation ++ tau/4
  std::vector<bool> conditioning;  // per seed edge
  nn::Tensor candidate_edges;  // [C, 27]
};

nn::Tensor node_features(const Node& n, bool with_positional_encoding = true);
nn::Tensor edge_features(Relation r, int tau);
FeatureVectors assemble_features(const AugmentedGraph& g, bool with_positional_encoding = true);

}  // namespace critscene
