#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "critscene/annotation.hpp"
#include "critscene/scene_graph.hpp"

namespace critscene {

/// Distance thresholds: d < 5 m NearCollision, 5 <= d <= 10 m Near, d > 10 m Visible.
Criticality proximity_from_distance(double distance_m);

/// Reads `{"video_id": str, "frames": [...]}`. Frames come back sorted by
/// frame_index.
AnnotatedVideo parse_annotations(std::istream& in);
AnnotatedVideo parse_annotations(const nlohmann::json& doc);
nlohmann::json annotations_to_json(const AnnotatedVideo& video);

/// Keeps every `downsample`-th frame, then cuts consecutive non-overlapping
/// windows of `window` frames. Trailing partial windows are dropped.
std::vector<std::vector<FrameAnnotation>> window_scenarios(
    const std::vector<FrameAnnotation>& frames, int downsample = 5, int window = kFramesPerScenario);

/// A labelled scenario window ready for splitting.
struct ScenarioWindow {
  std::string id;
  Relation av_action = Relation::AvMove;
  std::vector<FrameAnnotation> frames;
};

struct DatasetSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;
};

inline constexpr double kValRatio = 0.20;
inline constexpr double kTestRatio = 0.10;

/// Per-AV-action shuffled 70/20/10 split of window indices; val and test take
/// floor(ratio * n) and the remainder goes to train.
DatasetSplit split_dataset(const std::vector<ScenarioWindow>& windows, std::uint64_t rng_seed);

struct SynthConfig {
  int n_scenarios = 100;
  int min_agents = 1;
  int max_agents = 3;
  /// AV-Move, AV-MoveLeft, AV-MoveRight, AV-Overtake, AV-Stop, AV-TurnLeft, AV-TurnRight.
  std::array<double, 7> action_weights = {1, 1, 1, 1, 1, 1, 1};
  /// Visible, Near, NearCollision.
  std::array<double, 3> criticality_weights = {1, 1, 1};
  /// Dynamic agent classes Pedestrian, Car, Cyclist, Motorbike, Bus.
  std::array<double, 5> agent_class_weights = {0.3, 0.35, 0.15, 0.1, 0.1};
  double traffic_light_probability = 0.2;
  /// Spread of the per-scenario distance trajectories; 0 makes every scenario
  /// follow the nominal profile for its labels.
  double jitter = 1.0;
  /// Probability that a non-final frame carries no AV action annotation.
  double missing_action_probability = 0.1;
  std::uint64_t rng_seed = 1;

  void validate() const;
};

/// Procedurally generated scenarios, each a sequence of kFramesPerScenario
/// frames whose ground-truth temporal graph realises the sampled AV action
/// and criticality.
std::vector<AnnotatedVideo> generate_synthetic(const SynthConfig& cfg);

}  // namespace critscene
