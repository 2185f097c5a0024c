#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "critscene/ontology.hpp"

namespace critscene {

/// Annotation content that violates the input schema or the ontology.
class SchemaError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A location referenced by an annotation: its class plus the instance id
/// that distinguishes, for example, two different pavements.
struct LocationRef {
  NodeClass cls = NodeClass::VehicleLane;
  int instance = 0;

  friend bool operator==(const LocationRef&, const LocationRef&) = default;
};

struct EntityAnnotation {
  int track_id = 0;
  NodeClass cls = NodeClass::Car;
  std::optional<LocationRef> location;
  std::vector<Relation> actions;
  std::optional<Relation> light_state;     // traffic lights only
  std::optional<Relation> relative_motion; // MovingAway / MovingTowards
  std::optional<double> distance_m;        // exactly one of distance_m / proximity
  std::optional<Criticality> proximity;
};

struct FrameAnnotation {
  int frame_index = 0;
  std::optional<Relation> av_action;
  std::optional<LocationRef> ego_location;
  std::vector<EntityAnnotation> entities;
};

/// One annotated video: frames ordered by frame_index.
struct AnnotatedVideo {
  std::string video_id;
  std::vector<FrameAnnotation> frames;
};

}  // namespace critscene
