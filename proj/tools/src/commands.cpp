#include "commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "critscene/graph_io.hpp"
#include "critscene/model.hpp"
#include "critscene/playback.hpp"
#include "critscene/scenario.hpp"
#include "critscene/seed_database.hpp"
#include "critscene/xml.hpp"
#include "run_config.hpp"

namespace critscene::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kXsdName = "openscenario_subset.xsd";

class Logger {
 public:
  explicit Logger(std::ostream& err) : err_(err) {}

  void info(const std::string& msg) const { line("info", msg); }
  void warn(const std::string& msg) const { line("warning", msg); }
  void error(const std::string& msg) const { line("error", msg); }

 private:
  void line(const char* level, const std::string& msg) const {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char stamp[32];
    std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", &tm);
    err_ << '[' << stamp << "] " << level << ": " << msg << '\n';
  }

  std::ostream& err_;
};

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json read_json(const fs::path& path) {
  try {
    return json::parse(read_text(path));
  } catch (const json::parse_error& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

/// Files of `dir` ending in `suffix`, sorted by name.
std::vector<fs::path> files_with_suffix(const fs::path& dir, const std::string& suffix) {
  if (!fs::is_directory(dir)) throw std::runtime_error("not a directory: " + dir.string());
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    const std::string name = e.path().filename().string();
    if (e.is_regular_file() && name.size() >= suffix.size() &&
        name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0) {
      out.push_back(e.path());
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

AnnotatedVideo read_annotation_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  try {
    return parse_annotations(in);
  } catch (const SchemaError& e) {
    throw SchemaError(path.string() + ": " + e.what());
  }
}

/// Removes the *.json files a previous run left in an annotations directory,
/// so that rebuilding from the directory sees only this run's windows.
void clear_annotations(const fs::path& dir) {
  if (!fs::exists(dir)) return;
  for (const auto& p : files_with_suffix(dir, ".json")) fs::remove(p);
}

void write_annotations(const fs::path& dir, const std::vector<AnnotatedVideo>& videos) {
  fs::create_directories(dir);
  for (const auto& v : videos) {
    write_text(dir / (v.video_id + ".json"), annotations_to_json(v).dump(2) + "\n");
  }
}

std::vector<Sample> samples_of(const Dataset& d, const std::vector<std::size_t>& idx,
                               const Ontology& ont) {
  std::vector<Sample> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(make_sample(d.graphs[i], ont));
  return out;
}

std::string agents_text(const std::vector<NodeClass>& agents) {
  std::string s;
  for (NodeClass c : agents) {
    if (!s.empty()) s += ",";
    s += std::string(to_string(c));
  }
  return s;
}

/// "--request" takes either inline JSON or a path to a JSON file.
json request_document(const std::string& arg) {
  const auto first = arg.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && arg[first] == '{') {
    try {
      return json::parse(arg);
    } catch (const json::parse_error& e) {
      throw ConfigError(std::string("request: ") + e.what());
    }
  }
  return read_json(arg);
}

std::string strip_suffix(std::string name) {
  for (const std::string suffix : {".script.json", ".json"}) {
    if (name.size() > suffix.size() &&
        name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0) {
      return name.substr(0, name.size() - suffix.size());
    }
  }
  return name;
}

ScenarioScript read_script(const fs::path& path) {
  try {
    return script_from_json(read_json(path));
  } catch (const CompileError& e) {
    throw CompileError(path.string() + ": " + e.what());
  }
}

// ------------------------------------------------------------- commands

struct Globals {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  std::optional<unsigned> threads;
};

RunConfig resolve(const Globals& g) {
  RunConfig cfg;
  if (!g.config_path.empty()) load_config_file(g.config_path, cfg);
  if (g.seed) cfg.seed = *g.seed;
  if (g.out_dir) cfg.out_dir = *g.out_dir;
  if (g.threads) cfg.threads = *g.threads;
  cfg.apply_seed();
  return cfg;
}

int cmd_synth(RunConfig cfg, std::optional<int> n, std::ostream& out, const Logger& log) {
  if (n) cfg.synth.n_scenarios = *n;
  cfg.validate();
  const auto& ont = Ontology::builtin();
  const auto videos = generate_synthetic(cfg.synth);
  const fs::path dir = cfg.out_dir;
  clear_annotations(dir / "annotations");
  write_annotations(dir / "annotations", videos);
  const Dataset d = build_dataset(videos, ont, cfg.seed);
  write_dataset(dir, d);
  log.info("wrote " + std::to_string(videos.size()) + " synthetic scenarios to " + dir.string());
  out << "scenarios " << d.graphs.size() << "  train " << d.split.train.size() << "  val "
      << d.split.val.size() << "  test " << d.split.test.size() << '\n';
  return 0;
}

int cmd_ingest(const RunConfig& cfg, const std::vector<std::string>& inputs, int downsample,
               int window, std::ostream& out, const Logger& log) {
  cfg.validate();
  const auto& ont = Ontology::builtin();
  std::vector<AnnotatedVideo> windows;
  for (const auto& input : inputs) {
    const AnnotatedVideo video = read_annotation_file(input);
    const auto cut = window_scenarios(video.frames, downsample, window);
    if (cut.empty()) log.warn(input + ": too few frames for one window");
    for (std::size_t k = 0; k < cut.size(); ++k) {
      char suffix[16];
      std::snprintf(suffix, sizeof suffix, "_w%04zu", k);
      windows.push_back({video.video_id + suffix, cut[k]});
    }
  }
  const fs::path dir = cfg.out_dir;
  clear_annotations(dir / "annotations");
  write_annotations(dir / "annotations", windows);
  const Dataset d = build_dataset(windows, ont, cfg.seed);
  write_dataset(dir, d);
  log.info("ingested " + std::to_string(inputs.size()) + " videos into " +
           std::to_string(windows.size()) + " windows");
  out << "scenarios " << d.graphs.size() << '\n';
  return 0;
}

int cmd_build_graphs(const RunConfig& cfg, const std::string& annotations_dir, std::ostream& out,
                     const Logger& log) {
  cfg.validate();
  const fs::path dir = cfg.out_dir;
  const fs::path src = annotations_dir.empty() ? dir / "annotations" : fs::path(annotations_dir);
  std::vector<AnnotatedVideo> windows;
  for (const auto& p : files_with_suffix(src, ".json")) windows.push_back(read_annotation_file(p));
  const Dataset d = build_dataset(windows, Ontology::builtin(), cfg.seed);
  write_dataset(dir, d);
  log.info("built " + std::to_string(d.graphs.size()) + " scenario graphs");
  out << "scenarios " << d.graphs.size() << '\n';
  return 0;
}

struct TrainArgs {
  std::string data;
  std::optional<int> epochs;
  std::optional<std::string> variant;
  std::optional<double> lr;
  int kfold = 0;
};

int cmd_train(RunConfig cfg, const TrainArgs& a, std::ostream& out, const Logger& log) {
  if (a.epochs) cfg.model.epochs = *a.epochs;
  if (a.lr) cfg.model.adam.lr = *a.lr;
  if (a.variant) {
    const auto v = triplet_encoder_from_string(*a.variant);
    if (!v) throw ConfigError("unknown variant '" + *a.variant + "'");
    cfg.model.variant = *v;
  }
  if (cfg.model.epochs < 0) throw ConfigError("epochs must be >= 0");
  if (a.kfold == 1 || a.kfold < 0) throw ConfigError("kfold needs at least 2 folds");
  cfg.validate();

  const auto& ont = Ontology::builtin();
  const fs::path dir = cfg.out_dir;
  const Dataset d = read_dataset(a.data.empty() ? dir : fs::path(a.data));
  const auto train_set = samples_of(d, d.split.train, ont);
  const auto val_set = samples_of(d, d.split.val, ont);
  if (train_set.empty() && cfg.model.epochs > 0) throw std::runtime_error("train split is empty");

  log.info("training " + std::string(to_string(cfg.model.variant)) + " on " +
           std::to_string(train_set.size()) + " scenarios for " +
           std::to_string(cfg.model.epochs) + " epochs");
  Model model(cfg.model);
  const TrainResult result = train(model, train_set, val_set, &out);
  save_checkpoint((dir / "checkpoint.json").string(), model, &result.adam);
  std::ostringstream hist;
  write_history_csv(hist, result.history);
  write_text(dir / "history.csv", hist.str());

  std::vector<std::pair<std::string, MetricBundle>> rows;
  if (!train_set.empty()) rows.emplace_back("train", evaluate_classification(model, train_set));
  if (!val_set.empty()) rows.emplace_back("val", evaluate_classification(model, val_set));
  if (!rows.empty()) out << metrics_table(rows);
  log.info("best epoch " + std::to_string(result.best_epoch) + "; checkpoint " +
           (dir / "checkpoint.json").string());

  if (a.kfold >= 2) {
    std::vector<std::size_t> pool = d.split.train;
    pool.insert(pool.end(), d.split.val.begin(), d.split.val.end());
    std::sort(pool.begin(), pool.end());
    json folds = json::array();
    double f1_sum = 0.0;
    const auto k = static_cast<std::size_t>(a.kfold);
    for (std::size_t f = 0; f < k; ++f) {
      std::vector<std::size_t> fit, held;
      for (std::size_t i = 0; i < pool.size(); ++i) (i % k == f ? held : fit).push_back(pool[i]);
      Model m(cfg.model);
      train(m, samples_of(d, fit, ont), {}, nullptr);
      const MetricBundle mb = evaluate_classification(m, samples_of(d, held, ont));
      folds.push_back(metrics_to_json(mb));
      f1_sum += mb.f1;
      out << "fold " << f + 1 << "/" << k << "  f1 " << mb.f1 << '\n';
    }
    json report = {{"folds", folds}, {"mean_f1", f1_sum / static_cast<double>(k)}};
    write_text(dir / "kfold.json", report.dump(2) + "\n");
  }
  return 0;
}

int cmd_eval(const RunConfig& cfg, const std::string& checkpoint, const std::string& data,
             const std::string& split_name, std::ostream& out, const Logger& log) {
  cfg.validate();
  const auto& ont = Ontology::builtin();
  const fs::path dir = cfg.out_dir;
  const Dataset d = read_dataset(data.empty() ? dir : fs::path(data));
  const std::vector<std::size_t>* idx = nullptr;
  if (split_name == "train") idx = &d.split.train;
  else if (split_name == "val") idx = &d.split.val;
  else if (split_name == "test") idx = &d.split.test;
  else throw ConfigError("split must be train, val or test");
  if (idx->empty()) throw std::runtime_error(split_name + " split is empty");

  Model model = load_checkpoint(checkpoint.empty() ? (dir / "checkpoint.json").string() : checkpoint);
  const MetricBundle mb = evaluate_classification(model, samples_of(d, *idx, ont));

  double factual = 0.0, semantic = 0.0;
  for (std::size_t i : *idx) {
    const TemporalGraph& gold = d.graphs[i];
    const Prediction p = predict(model, prune_to_seed(gold, true), ont);
    const AnswerCorrectness ac = answer_correctness(ego_statements(p.graph), ego_statements(gold));
    factual += ac.factual;
    semantic += ac.semantic;
  }
  const auto n = static_cast<double>(idx->size());
  json report = {{"split", split_name},
                 {"scenarios", idx->size()},
                 {"classification", metrics_to_json(mb)},
                 {"factual_correctness", factual / n},
                 {"semantic_similarity", semantic / n}};
  write_text(dir / "metrics.json", report.dump(2) + "\n");
  out << metrics_table({{std::string(to_string(model.config().variant)), mb}});
  char line[128];
  std::snprintf(line, sizeof line, "factual correctness %.4f  semantic similarity %.4f\n",
                factual / n, semantic / n);
  out << line;
  log.info("wrote " + (dir / "metrics.json").string());
  return 0;
}

struct GenerateArgs {
  std::string request;
  std::size_t evenly = 0;
  int max_agents = 2;
  std::string checkpoint;
  std::string data;
  bool mirror = false;
};

int cmd_generate(const RunConfig& cfg, const GenerateArgs& a, std::ostream& out,
                 const Logger& log) {
  cfg.validate();
  if (a.request.empty() == (a.evenly == 0)) {
    throw ConfigError("give exactly one of --request or --evenly");
  }
  const auto& ont = Ontology::builtin();
  const fs::path dir = cfg.out_dir;
  const fs::path data = a.data.empty() ? dir : fs::path(a.data);

  std::vector<std::pair<std::string, ScenarioRequest>> requests;
  if (!a.request.empty()) {
    const json doc = request_document(a.request);
    ScenarioRequest r;
    try {
      r = request_from_json(doc);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
    if (!doc.contains("seed")) r.rng_seed = cfg.seed;
    requests.emplace_back("scenario", r);
  } else {
    const auto rs = evenly_distributed_requests(a.evenly, cfg.seed, a.max_agents);
    for (std::size_t i = 0; i < rs.size(); ++i) {
      char name[32];
      std::snprintf(name, sizeof name, "req_%03zu", i);
      requests.emplace_back(name, rs[i]);
    }
  }

  const SeedDatabase db = SeedDatabase::load(data / "seeds", ont);
  Model model =
      load_checkpoint(a.checkpoint.empty() ? (dir / "checkpoint.json").string() : a.checkpoint);
  const xml::Schema schema = xml::Schema::parse(bundled_subset_xsd());
  CompileOptions opts = cfg.compile;
  opts.handedness = Handedness::Right;

  const fs::path gen_dir = dir / "generated";
  fs::create_directories(gen_dir);
  write_text(gen_dir / kXsdName, std::string(bundled_subset_xsd()));
  std::string request_lines;
  for (const auto& [name, req] : requests) {
    const GeneratedScenario g = handle_request(req, db, model, ont);
    if (g.match != SeedMatch::Exact) {
      log.warn(name + ": no seed with agents {" + agents_text(req.agents) + "}; used " +
               std::string(to_string(g.match)) + " match, seed #" + std::to_string(g.seed_index));
    }
    ScenarioScript script = graph_to_script(g.graph, opts);
    if (a.mirror) script = mirror(script);
    const std::string xosc = emit_openscenario(script);
    const auto errors = schema.validate(xml::parse(xosc));
    if (!errors.empty()) throw std::runtime_error(name + ": emitted XML is invalid: " + errors.front());

    write_text(gen_dir / (name + ".graph.jsonl"), graph_to_line(g.graph) + "\n");
    write_text(gen_dir / (name + ".script.json"), script_to_json(script).dump(2) + "\n");
    write_text(gen_dir / (name + ".xosc"), xosc);
    json line = request_to_json(req);
    line["name"] = name;
    line["seed_index"] = g.seed_index;
    line["match"] = std::string(to_string(g.match));
    request_lines += line.dump() + "\n";
    out << name << "  " << to_string(req.criticality) << "  " << to_string(req.av_action) << "  {"
        << agents_text(req.agents) << "}  -> " << (gen_dir / (name + ".xosc")).string() << '\n';
  }
  write_text(gen_dir / "requests.jsonl", request_lines);
  return 0;
}

int cmd_emit(const RunConfig& cfg, const std::string& script_path, const std::string& output,
             std::ostream& out, const Logger& log) {
  cfg.validate();
  const ScenarioScript script = read_script(script_path);
  const std::string xosc = emit_openscenario(script);
  const auto errors = xml::Schema::parse(bundled_subset_xsd()).validate(xml::parse(xosc));
  if (!errors.empty()) {
    for (const auto& e : errors) log.error(e);
    return 1;
  }
  const fs::path target =
      output.empty() ? fs::path(cfg.out_dir) / (strip_suffix(fs::path(script_path).filename().string()) + ".xosc")
                     : fs::path(output);
  write_text(target, xosc);
  out << target.string() << '\n';
  return 0;
}

struct PlayArgs {
  std::vector<std::string> scripts;
  bool oracle = false;
  std::string policy = "normal";
  bool trajectories = false;
};

int cmd_play(const RunConfig& cfg, const PlayArgs& a, std::ostream& out, const Logger& log) {
  cfg.validate();
  if (a.oracle == !a.scripts.empty()) throw ConfigError("give script paths or --oracle, not both");

  std::vector<std::string> names;
  std::vector<std::pair<ScenarioScript, Criticality>> batch;
  std::vector<const OracleCase*> cases;
  const auto oracle = a.oracle ? oracle_cases() : std::vector<OracleCase>{};
  if (a.oracle) {
    for (const auto& c : oracle) {
      names.push_back(c.name);
      batch.emplace_back(c.script, c.requested);
      cases.push_back(&c);
    }
  } else {
    for (const auto& arg : a.scripts) {
      std::vector<fs::path> paths;
      if (fs::is_directory(arg)) paths = files_with_suffix(arg, ".script.json");
      else paths.push_back(arg);
      for (const auto& p : paths) {
        ScenarioScript s = read_script(p);
        names.push_back(strip_suffix(p.filename().string()));
        const Criticality requested = s.criticality;
        batch.emplace_back(std::move(s), requested);
      }
    }
  }
  if (batch.empty()) throw std::runtime_error("no scripts to play");

  std::vector<std::string> policies;
  if (a.policy == "all") policies = {"normal", "cautious", "aggressive"};
  else policies = {a.policy};

  const fs::path play_dir = fs::path(cfg.out_dir) / "playback";
  std::vector<std::pair<std::string, ScrReport>> rows;
  bool oracle_ok = true;
  const bool keep = a.trajectories || batch.size() == 1;
  for (const auto& pname : policies) {
    const EgoPolicy& policy = cfg.policy(pname);
    const BatchResult br =
        batch_consistency(batch, policy, cfg.playback, cfg.seed, cfg.threads, keep);
    json runs = json::array();
    for (std::size_t i = 0; i < batch.size(); ++i) {
      json r = playback_summary_json(br.runs[i]);
      r["name"] = names[i];
      r["requested"] = std::string(to_string(batch[i].second));
      runs.push_back(r);
      if (keep) {
        std::ostringstream csv;
        write_trajectory_csv(csv, br.runs[i].trajectory);
        write_text(play_dir / (names[i] + "_" + pname + ".csv"), csv.str());
      }
      if (a.oracle) {
        const OracleCase& c = *cases[i];
        const bool ok = br.runs[i].realized == c.requested &&
                        std::abs(br.runs[i].min_distance - c.expected_min_distance) <= c.tolerance;
        if (!ok) {
          oracle_ok = false;
          log.error(pname + " " + c.name + ": min distance " +
                    std::to_string(br.runs[i].min_distance) + ", expected " +
                    std::to_string(c.expected_min_distance));
        }
      }
    }
    json report = {{"policy", pname}, {"report", scr_to_json(br.report)}, {"runs", runs}};
    write_text(play_dir / ("scr_" + pname + ".json"), report.dump(2) + "\n");
    rows.emplace_back(pname, br.report);
  }
  out << scr_table(rows);
  log.info("wrote playback reports to " + play_dir.string());
  return oracle_ok ? 0 : 1;
}

int cmd_metrics(const std::string& pred_path, const std::string& gold_path, bool ego_only,
                std::ostream& out) {
  const auto pred = read_graphs_file(pred_path);
  const auto gold = read_graphs_file(gold_path);
  if (pred.size() != gold.size()) {
    throw std::runtime_error("prediction and reference files hold " + std::to_string(pred.size()) +
                             " and " + std::to_string(gold.size()) + " graphs");
  }
  if (pred.empty()) throw std::runtime_error("no graphs to compare");
  json per = json::array();
  double factual = 0.0, semantic = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const auto sp = ego_only ? ego_statements(pred[i]) : graph_to_statements(pred[i]);
    const auto sg = ego_only ? ego_statements(gold[i]) : graph_to_statements(gold[i]);
    const AnswerCorrectness ac = answer_correctness(sp, sg);
    per.push_back({{"factual_correctness", ac.factual}, {"semantic_similarity", ac.semantic}});
    factual += ac.factual;
    semantic += ac.semantic;
  }
  const auto n = static_cast<double>(pred.size());
  json report = {{"pairs", pred.size()},
                 {"factual_correctness", factual / n},
                 {"semantic_similarity", semantic / n},
                 {"per_pair", per}};
  out << report.dump(2) << '\n';
  return 0;
}

}  // namespace

// -------------------------------------------------------------- dataset

Dataset build_dataset(const std::vector<AnnotatedVideo>& windows, const Ontology& ont,
                      std::uint64_t seed) {
  Dataset d;
  d.seed = seed;
  std::vector<ScenarioWindow> split_input;
  for (const auto& w : windows) {
    if (w.frames.size() != static_cast<std::size_t>(kFramesPerScenario)) {
      throw SchemaError(w.video_id + ": a scenario window needs " +
                        std::to_string(kFramesPerScenario) + " frames, got " +
                        std::to_string(w.frames.size()));
    }
    std::vector<FrameGraph> frames;
    for (const auto& f : w.frames) frames.push_back(build_frame_graph(f, ont));
    d.ids.push_back(w.video_id);
    d.graphs.push_back(build_temporal_graph(frames, ont));
    split_input.push_back({w.video_id, derive_av_action(std::span<const FrameGraph>(frames)), w.frames});
  }
  d.split = split_dataset(split_input, seed);
  return d;
}

void write_dataset(const fs::path& dir, const Dataset& d) {
  const auto& ont = Ontology::builtin();
  fs::create_directories(dir);
  write_graphs_file((dir / "graphs.jsonl").string(), d.graphs);
  json manifest = {{"format", "critscene-dataset"},
                   {"version", 1},
                   {"seed", d.seed},
                   {"scenarios", d.ids},
                   {"split", {{"train", d.split.train}, {"val", d.split.val}, {"test", d.split.test}}}};
  write_text(dir / "manifest.json", manifest.dump(2) + "\n");
  SeedDatabase db;
  for (std::size_t i : d.split.train) db.insert(prune_to_seed(d.graphs[i], false), ont);
  db.save(dir / "seeds");
}

Dataset read_dataset(const fs::path& dir) {
  const json m = read_json(dir / "manifest.json");
  if (m.value("format", "") != "critscene-dataset" || m.value("version", 0) != 1) {
    throw std::runtime_error((dir / "manifest.json").string() + ": not a dataset manifest");
  }
  Dataset d;
  d.seed = m.at("seed").get<std::uint64_t>();
  d.ids = m.at("scenarios").get<std::vector<std::string>>();
  d.graphs = read_graphs_file((dir / "graphs.jsonl").string());
  if (d.graphs.size() != d.ids.size()) {
    throw std::runtime_error("manifest lists " + std::to_string(d.ids.size()) +
                             " scenarios but graphs.jsonl holds " + std::to_string(d.graphs.size()));
  }
  const json& s = m.at("split");
  d.split.train = s.at("train").get<std::vector<std::size_t>>();
  d.split.val = s.at("val").get<std::vector<std::size_t>>();
  d.split.test = s.at("test").get<std::vector<std::size_t>>();
  for (const auto* part : {&d.split.train, &d.split.val, &d.split.test}) {
    for (std::size_t i : *part) {
      if (i >= d.graphs.size()) throw std::runtime_error("split index out of range");
    }
  }
  return d;
}

StatementSet ego_statements(const TemporalGraph& g) {
  StatementSet out;
  const auto ego = g.ego_uid();
  if (!ego) return out;
  for (const auto& e : g.edges) {
    if ((e.src == *ego || e.dst == *ego) && !g.is_conditioning(e)) out.insert(edge_statement(g, e));
  }
  return out;
}

// ------------------------------------------------------------------ CLI

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Critical driving scenario generation from scene graphs"};
  app.name("critscene");
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  app.add_option("--config", g.config_path, "INI configuration file")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "Random seed for every stage");
  app.add_option("--out-dir", g.out_dir, "Output directory");
  app.add_option("--threads", g.threads, "Worker threads for playback batches");

  auto* synth = app.add_subcommand("synth", "Generate a synthetic annotated dataset");
  std::optional<int> synth_n;
  synth->add_option("--n", synth_n, "Number of scenarios");

  auto* ingest = app.add_subcommand("ingest", "Window annotated videos into a dataset");
  std::vector<std::string> ingest_inputs;
  int downsample = 5, window = kFramesPerScenario;
  ingest->add_option("inputs", ingest_inputs, "Annotation JSON files")->required()->check(CLI::ExistingFile);
  ingest->add_option("--downsample", downsample, "Keep every n-th frame")->check(CLI::PositiveNumber);
  ingest->add_option("--window", window, "Frames per window")->check(CLI::Range(kFramesPerScenario, kFramesPerScenario));

  auto* build = app.add_subcommand("build-graphs", "Rebuild graphs and split from annotation windows");
  std::string annotations_dir;
  build->add_option("--annotations", annotations_dir, "Directory of window files (default <out-dir>/annotations)");

  auto* train_cmd = app.add_subcommand("train", "Train the edge prediction model");
  TrainArgs ta;
  train_cmd->add_option("--data", ta.data, "Dataset directory (default <out-dir>)");
  train_cmd->add_option("--epochs", ta.epochs, "Training epochs");
  train_cmd->add_option("--variant", ta.variant, "mlp-gcn, gru-gcn, gat, gru or mlp");
  train_cmd->add_option("--lr", ta.lr, "Adam learning rate");
  train_cmd->add_option("--kfold", ta.kfold, "Also run k-fold cross-validation over train+val");

  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on a split");
  std::string eval_ckpt, eval_data, eval_split = "test";
  eval_cmd->add_option("--checkpoint", eval_ckpt, "Checkpoint (default <out-dir>/checkpoint.json)");
  eval_cmd->add_option("--data", eval_data, "Dataset directory (default <out-dir>)");
  eval_cmd->add_option("--split", eval_split, "train, val or test");

  auto* gen = app.add_subcommand("generate", "Generate scenarios for requests");
  GenerateArgs ga;
  gen->add_option("--request", ga.request, "Request JSON, inline or as a file path");
  gen->add_option("--evenly", ga.evenly, "Generate n requests spread over criticality levels");
  gen->add_option("--max-agents", ga.max_agents, "Agent count cap for --evenly")->check(CLI::PositiveNumber);
  gen->add_option("--checkpoint", ga.checkpoint, "Checkpoint (default <out-dir>/checkpoint.json)");
  gen->add_option("--data", ga.data, "Directory holding seeds/ (default <out-dir>)");
  gen->add_flag("--mirror", ga.mirror, "Emit the left-hand-traffic mirror image");

  auto* emit = app.add_subcommand("emit", "Write the OpenSCENARIO document of a script");
  std::string emit_script, emit_output;
  emit->add_option("script", emit_script, "Script JSON")->required()->check(CLI::ExistingFile);
  emit->add_option("-o,--output", emit_output, "Output path");

  auto* play = app.add_subcommand("play", "Play scripts back and report consistency");
  PlayArgs pa;
  play->add_option("scripts", pa.scripts, "Script files or directories of *.script.json");
  play->add_flag("--oracle", pa.oracle, "Play the built-in oracle scripts");
  play->add_option("--policy", pa.policy, "normal, cautious, aggressive or all")
      ->check(CLI::IsMember({"normal", "cautious", "aggressive", "all"}));
  play->add_flag("--trajectories", pa.trajectories, "Write a trajectory CSV per run");

  auto* metrics = app.add_subcommand("metrics", "Statement metrics between two graph files");
  std::string pred_path, gold_path;
  bool ego_only = false;
  metrics->add_option("--pred", pred_path, "Predicted graphs (JSONL)")->required()->check(CLI::ExistingFile);
  metrics->add_option("--gold", gold_path, "Reference graphs (JSONL)")->required()->check(CLI::ExistingFile);
  metrics->add_flag("--ego-only", ego_only, "Compare only EGO relations");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  const Logger log(err);
  try {
    const RunConfig cfg = resolve(g);
    if (*synth) return cmd_synth(cfg, synth_n, out, log);
    if (*ingest) return cmd_ingest(cfg, ingest_inputs, downsample, window, out, log);
    if (*build) return cmd_build_graphs(cfg, annotations_dir, out, log);
    if (*train_cmd) return cmd_train(cfg, ta, out, log);
    if (*eval_cmd) return cmd_eval(cfg, eval_ckpt, eval_data, eval_split, out, log);
    if (*gen) return cmd_generate(cfg, ga, out, log);
    if (*emit) return cmd_emit(cfg, emit_script, emit_output, out, log);
    if (*play) return cmd_play(cfg, pa, out, log);
    if (*metrics) return cmd_metrics(pred_path, gold_path, ego_only, out);
  } catch (const ConfigError& e) {
    log.error(e.what());
    return 2;
  } catch (const std::exception& e) {
    log.error(e.what());
    return 1;
  }
  return 2;
}

}  // namespace critscene::cli
