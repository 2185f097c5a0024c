#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "critscene/scene_graph.hpp"

namespace critscene {

// --------------------------------------------------------- classification

struct MetricBundle {
  std::uint64_t tp = 0, fp = 0, tn = 0, fn = 0;
  double f1 = 0.0, accuracy = 0.0, precision = 0.0, recall = 0.0;
  /// Set when the ratio's denominator was zero (the value is then 0).
  bool precision_undefined = false;
  bool recall_undefined = false;
  bool f1_undefined = false;
};

/// Confusion-matrix metrics of binary predictions. Throws std::invalid_argument
/// on length mismatch or empty input.
MetricBundle classification_metrics(std::span<const int> pred, std::span<const int> gold);
/// Metrics from accumulated counts.
MetricBundle metrics_from_counts(std::uint64_t tp, std::uint64_t fp, std::uint64_t tn,
                                 std::uint64_t fn);

nlohmann::json metrics_to_json(const MetricBundle& m);
/// Aligned one-row table: Model | F1 | Accuracy | Precision | Recall.
std::string metrics_table(const std::vector<std::pair<std::string, MetricBundle>>& rows);

// ------------------------------------------------------------- statements

using StatementSet = std::set<std::string>;

/// Fixed phrase per relation, e.g. Near -> "is near".
std::string_view relation_phrase(Relation r);

/// "At time {t}: {Src} {track} {phrase} {Dst} {track}." with EGO written as
/// "the ego-vehicle", self-loops without an object and criticality nodes
/// without a track. t is the absolute frame index of the edge's tau slice.
std::string edge_statement(const TemporalGraph& g, const Edge& e);
StatementSet graph_to_statements(const TemporalGraph& g);

struct StatementFact {
  int time = 0;
  NodeClass src_cls = NodeClass::Ego;
  int src_track = 0;
  Relation relation = Relation::IsIn;
  NodeClass dst_cls = NodeClass::Ego;
  int dst_track = 0;

  friend auto operator<=>(const StatementFact&, const StatementFact&) = default;
};

/// Inverse of edge_statement; nullopt when the text is not a canonical statement.
std::optional<StatementFact> parse_statement(std::string_view text);

/// F1 of the statement overlap; 1.0 when both sets are empty.
double factual_correctness(const StatementSet& pred, const StatementSet& gold);

/// Pluggable stand-in for the embedding-based half of answer correctness.
using SemanticScorer = std::function<double(const StatementSet&, const StatementSet&)>;
/// Jaccard similarity of the word sets of both statement collections.
double token_jaccard(const StatementSet& pred, const StatementSet& gold);

struct AnswerCorrectness {
  double factual = 0.0;
  double semantic = 0.0;
};
AnswerCorrectness answer_correctness(const StatementSet& pred, const StatementSet& gold,
                                     const SemanticScorer& scorer = token_jaccard);

// ---------------------------------------------- scenario consistency rate

struct ScrGroup {
  std::uint64_t total = 0;
  std::uint64_t matched = 0;
  /// Percentage; absent when the group has no runs.
  std::optional<double> rate;
};

struct ScrReport {
  /// Indexed by Criticality: Visible, Near, NearCollision.
  std::array<ScrGroup, 3> groups;
  ScrGroup overall;
};

/// 100 * matches / total per requested criticality and overall. Throws
/// std::invalid_argument on an empty list.
ScrReport scenario_consistency_rate(std::span<const std::pair<Criticality, Criticality>> results);

nlohmann::json scr_to_json(const ScrReport& r);
/// Table with one row per label and columns Visible | Near | Near Collision | Overall.
std::string scr_table(const std::vector<std::pair<std::string, ScrReport>>& rows);

}  // namespace critscene
