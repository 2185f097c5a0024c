#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "critscene/scene_graph.hpp"

namespace critscene {

/// `{"nodes":[{"uid","track","cls"}], "edges":[{"src","dst","rel","tau"}],
///   "av_action", "criticality", "flavor", "frames"}`. Absent labels are null.
nlohmann::json graph_to_json(const TemporalGraph& g);
/// "flavor" and "frames" are optional on input; without a flavor the graph is
/// read as a scenario when it carries conditioning and a database seed otherwise.
TemporalGraph graph_from_json(const nlohmann::json& doc);

/// Single-line JSON, no trailing newline.
std::string graph_to_line(const TemporalGraph& g);

void write_graphs_jsonl(std::ostream& out, const std::vector<TemporalGraph>& graphs);
std::vector<TemporalGraph> read_graphs_jsonl(std::istream& in);

void write_graphs_file(const std::string& path, const std::vector<TemporalGraph>& graphs);
std::vector<TemporalGraph> read_graphs_file(const std::string& path);

}  // namespace critscene
