#include "critscene/graph_io.hpp"

#include <fstream>
#include <istream>
#include <ostream>

#include <nlohmann/json.hpp>

namespace critscene {

namespace {

template <typename T, typename F>
T parse_label(const nlohmann::json& j, std::string_view field, F from_string) {
  const auto s = j.get<std::string>();
  const auto v = from_string(s);
  if (!v) throw GraphError("unknown " + std::string(field) + " label '" + s + "'");
  return *v;
}

}  // namespace

nlohmann::json graph_to_json(const TemporalGraph& g) {
  nlohmann::json nodes = nlohmann::json::array();
  for (const auto& n : g.nodes) {
    nodes.push_back({{"uid", n.uid}, {"track", n.track}, {"cls", to_string(n.cls)}});
  }
  nlohmann::json edges = nlohmann::json::array();
  for (const auto& e : g.edges) {
    edges.push_back({{"src", e.src}, {"dst", e.dst}, {"rel", to_string(e.relation)}, {"tau", e.tau}});
  }
  nlohmann::json j;
  j["nodes"] = std::move(nodes);
  j["edges"] = std::move(edges);
  j["av_action"] = g.av_action ? nlohmann::json(to_string(*g.av_action)) : nlohmann::json();
  j["criticality"] = g.criticality ? nlohmann::json(to_string(*g.criticality)) : nlohmann::json();
  j["flavor"] = to_string(g.flavor);
  j["frames"] = g.frame_times;
  return j;
}

TemporalGraph graph_from_json(const nlohmann::json& doc) {
  try {
    TemporalGraph g;
    for (const auto& n : doc.at("nodes")) {
      g.nodes.push_back({n.at("uid").get<int>(), n.at("track").get<int>(),
                         parse_label<NodeClass>(n.at("cls"), "node class", node_class_from_string)});
    }
    for (const auto& e : doc.at("edges")) {
      g.edges.push_back({e.at("src").get<int>(), e.at("dst").get<int>(),
                         parse_label<Relation>(e.at("rel"), "relation", relation_from_string),
                         e.at("tau").get<int>()});
    }
    if (doc.contains("av_action") && !doc["av_action"].is_null()) {
      g.av_action = parse_label<Relation>(doc["av_action"], "relation", relation_from_string);
    }
    if (doc.contains("criticality") && !doc["criticality"].is_null()) {
      g.criticality =
          parse_label<Criticality>(doc["criticality"], "criticality", criticality_from_string);
    }
    if (doc.contains("flavor")) {
      g.flavor = parse_label<Flavor>(doc["flavor"], "flavor", flavor_from_string);
    } else {
      g.flavor = g.av_action ? Flavor::Scenario : Flavor::DatabaseSeed;
    }
    if (doc.contains("frames")) g.frame_times = doc["frames"].get<std::vector<int>>();
    return g;
  } catch (const nlohmann::json::exception& e) {
    throw GraphError(std::string("malformed graph JSON: ") + e.what());
  }
}

std::string graph_to_line(const TemporalGraph& g) { return graph_to_json(g).dump(); }

void write_graphs_jsonl(std::ostream& out, const std::vector<TemporalGraph>& graphs) {
  for (const auto& g : graphs) out << graph_to_line(g) << '\n';
}

std::vector<TemporalGraph> read_graphs_jsonl(std::istream& in) {
  std::vector<TemporalGraph> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(graph_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw GraphError("line " + std::to_string(lineno) + ": " + e.what());
    } catch (const GraphError& e) {
      throw GraphError("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

void write_graphs_file(const std::string& path, const std::vector<TemporalGraph>& graphs) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  write_graphs_jsonl(out, graphs);
}

std::vector<TemporalGraph> read_graphs_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  return read_graphs_jsonl(in);
}

}  // namespace critscene
