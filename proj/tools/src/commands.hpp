#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "critscene/annotation.hpp"
#include "critscene/evaluation.hpp"
#include "critscene/ingestion.hpp"
#include "critscene/scene_graph.hpp"

namespace critscene::cli {

/// Scenario graphs with their split. Each window is one scenario.
struct Dataset {
  std::vector<std::string> ids;
  std::vector<TemporalGraph> graphs;
  DatasetSplit split;
  std::uint64_t seed = 0;
};

/// Builds the temporal graph of every window and splits by AV action.
/// Throws SchemaError naming the window when it does not have exactly
/// kFramesPerScenario frames.
Dataset build_dataset(const std::vector<AnnotatedVideo>& windows, const Ontology& ont,
                      std::uint64_t seed);

/// graphs.jsonl, manifest.json and seeds/ (seed database of the train split).
void write_dataset(const std::filesystem::path& dir, const Dataset& d);
Dataset read_dataset(const std::filesystem::path& dir);

/// Edges incident to EGO that are not conditioning edges, as statements.
StatementSet ego_statements(const TemporalGraph& g);

/// Entry point of the `critscene` executable. Returns the process exit code:
/// 0 on success, 1 on a runtime error, 2 on a usage error.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace critscene::cli
