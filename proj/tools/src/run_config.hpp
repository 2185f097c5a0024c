#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>

#include "critscene/ingestion.hpp"
#include "critscene/model.hpp"
#include "critscene/playback.hpp"
#include "critscene/scenario.hpp"

namespace critscene::cli {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Everything a subcommand may read, resolved from defaults, then the config
/// file, then command-line flags.
struct RunConfig {
  std::string out_dir = "out";
  std::uint64_t seed = 1;
  unsigned threads = 1;

  SynthConfig synth;
  ModelConfig model;
  CompileOptions compile;
  PlaybackConfig playback;
  std::map<std::string, EgoPolicy> policies = {{"normal", EgoPolicy::normal()},
                                               {"cautious", EgoPolicy::cautious()},
                                               {"aggressive", EgoPolicy::aggressive()}};

  /// Pushes the global seed into the module configs that draw randomness.
  void apply_seed();
  /// Validates every module config. Throws ConfigError.
  void validate() const;
  const EgoPolicy& policy(const std::string& name) const;
};

/// Reads an INI document with sections [general], [synth], [model],
/// [scenario], [playback] and [policy.<name>]. Unknown sections or keys are
/// errors.
void load_config_file(const std::string& path, RunConfig& cfg);
void load_config_text(const std::string& text, RunConfig& cfg);

}  // namespace critscene::cli
