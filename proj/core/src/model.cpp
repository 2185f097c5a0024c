#include "critscene/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "critscene/random.hpp"

namespace critscene {

using nn::Tape;
using nn::Tensor;
using nn::Var;

std::string_view to_string(TripletEncoder v) {
  switch (v) {
    case TripletEncoder::MlpGcn: return "mlp-gcn";
    case TripletEncoder::GruGcn: return "gru-gcn";
    case TripletEncoder::Gru: return "gru";
    case TripletEncoder::Gat: return "gat";
    case TripletEncoder::NonTemporalMlp: return "mlp";
  }
  return "?";
}

std::optional<TripletEncoder> triplet_encoder_from_string(std::string_view s) {
  for (auto v : {TripletEncoder::MlpGcn, TripletEncoder::GruGcn, TripletEncoder::Gru,
                 TripletEncoder::Gat, TripletEncoder::NonTemporalMlp}) {
    if (to_string(v) == s) return v;
  }
  return std::nullopt;
}

// ------------------------------------------------------------------- config

void ModelConfig::validate() const {
  const auto fail = [](const std::string& m) { throw std::invalid_argument("model config: " + m); };
  for (const auto* dims : {&mlp_n, &mlp_e, &mlp_tr, &mlp_gat}) {
    if (dims->size() < 2) fail("every MLP needs at least an input and an output width");
    for (auto d : *dims) {
      if (d == 0) fail("zero-width layer");
    }
  }
  if (pe_length != 2) fail("positional encoding length must be 2");
  if (mlp_n.front() != kNodeFeatureWidth) fail("mlp_n input must be 22");
  if (mlp_e.front() != kEdgeFeatureWidth) fail("mlp_e input must be 27");
  if (mlp_e.back() != 1) fail("mlp_e must produce one scalar per edge");
  if (mlp_n.back() != gat1_in) fail("mlp_n output must equal gat1 input");
  if (mlp_e.back() != mlp_n.back()) fail("conditioning fusion needs mlp_e and mlp_n outputs to match");
  if (gat1_out != mlp_gat.front()) fail("gat1 output must equal mlp_gat input");
  if (mlp_gat.back() != gat2_in) fail("mlp_gat output must equal gat2 input");
  if (gcn_width != gat2_out) fail("gcn width must equal gat2 output");
  if (mlp_tr.front() != 2 * gat2_out + mlp_e.back()) fail("mlp_tr input must be 2*node + edge width");
  if (mlp_tr.back() != 1) fail("mlp_tr must produce one logit");
  if (gru_hidden == 0) fail("gru_hidden must be positive");
  if (epochs < 0) fail("epochs must be >= 0");
  if (!(threshold >= 0.0 && threshold <= 1.0)) fail("threshold must lie in [0,1]");
  if (!(clip > 0.0)) fail("clip bound must be positive");
}

nlohmann::json config_to_json(const ModelConfig& c) {
  return {{"mlp_n", c.mlp_n},
          {"mlp_e", c.mlp_e},
          {"mlp_tr", c.mlp_tr},
          {"mlp_gat", c.mlp_gat},
          {"gat1", {c.gat1_in, c.gat1_out}},
          {"gat2", {c.gat2_in, c.gat2_out}},
          {"gcn", {c.gcn_width, c.gcn_width}},
          {"gru_hidden", c.gru_hidden},
          {"pe_length", c.pe_length},
          {"epochs", c.epochs},
          {"rng_seed", c.rng_seed},
          {"threshold", c.threshold},
          {"variant", to_string(c.variant)},
          {"positional_encoding", c.positional_encoding},
          {"gat_bidirectional", c.gat_bidirectional},
          {"gcn_scope", c.gcn_scope == GcnScope::CurrentTau ? "current-tau" : "all"},
          {"gat_edge_in_message", c.gat.edge_in_message},
          {"gat_edge_in_logit", c.gat.edge_in_logit},
          {"gat_negative_slope", c.gat.negative_slope},
          {"lr", c.adam.lr},
          {"beta1", c.adam.beta1},
          {"beta2", c.adam.beta2},
          {"adam_eps", c.adam.eps},
          {"weight_decay", c.adam.weight_decay},
          {"clip", c.clip}};
}

ModelConfig config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  const auto get = [&](const char* k, auto& v) {
    if (j.contains(k)) v = j.at(k).get<std::remove_reference_t<decltype(v)>>();
  };
  get("mlp_n", c.mlp_n);
  get("mlp_e", c.mlp_e);
  get("mlp_tr", c.mlp_tr);
  get("mlp_gat", c.mlp_gat);
  if (j.contains("gat1")) {
    c.gat1_in = j["gat1"].at(0).get<std::size_t>();
    c.gat1_out = j["gat1"].at(1).get<std::size_t>();
  }
  if (j.contains("gat2")) {
    c.gat2_in = j["gat2"].at(0).get<std::size_t>();
    c.gat2_out = j["gat2"].at(1).get<std::size_t>();
  }
  if (j.contains("gcn")) c.gcn_width = j["gcn"].at(0).get<std::size_t>();
  get("gru_hidden", c.gru_hidden);
  get("pe_length", c.pe_length);
  get("epochs", c.epochs);
  get("rng_seed", c.rng_seed);
  get("threshold", c.threshold);
  if (j.contains("variant")) {
    const auto v = triplet_encoder_from_string(j["variant"].get<std::string>());
    if (!v) throw std::invalid_argument("unknown model variant");
    c.variant = *v;
  }
  get("positional_encoding", c.positional_encoding);
  get("gat_bidirectional", c.gat_bidirectional);
  if (j.contains("gcn_scope")) {
    const auto s = j["gcn_scope"].get<std::string>();
    if (s == "current-tau") c.gcn_scope = GcnScope::CurrentTau;
    else if (s == "all") c.gcn_scope = GcnScope::AllCandidates;
    else throw std::invalid_argument("unknown gcn_scope '" + s + "'");
  }
  get("gat_edge_in_message", c.gat.edge_in_message);
  get("gat_edge_in_logit", c.gat.edge_in_logit);
  get("gat_negative_slope", c.gat.negative_slope);
  get("lr", c.adam.lr);
  get("beta1", c.adam.beta1);
  get("beta2", c.adam.beta2);
  get("adam_eps", c.adam.eps);
  get("weight_decay", c.adam.weight_decay);
  get("clip", c.clip);
  c.validate();
  return c;
}

// ------------------------------------------------------------------ samples

Sample make_sample(const TemporalGraph& scenario, const Ontology& ont) {
  Sample s = augment(prune_to_seed(scenario, true), ont);
  label_candidates(s.candidates, scenario, ont);
  return s;
}

std::vector<double> sample_labels(const Sample& s) {
  std::vector<double> y;
  y.reserve(s.candidates.size());
  for (const auto& c : s.candidates) {
    if (!c.label) throw std::invalid_argument("sample has unlabelled candidates");
    y.push_back(static_cast<double>(*c.label));
  }
  return y;
}

// -------------------------------------------------------------------- model

Model::Model(ModelConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  Rng rng(cfg_.rng_seed);
  nn::init_mlp(params_, "mlp_n", cfg_.mlp_n, rng);
  nn::init_mlp(params_, "mlp_e", cfg_.mlp_e, rng);
  nn::init_gat(params_, "gat1", cfg_.gat1_in, cfg_.gat1_out, rng);
  nn::init_mlp(params_, "mlp_gat", cfg_.mlp_gat, rng);
  nn::init_gat(params_, "gat2", cfg_.gat2_in, cfg_.gat2_out, rng);
  switch (cfg_.variant) {
    case TripletEncoder::MlpGcn:
      nn::init_mlp(params_, "mlp_tr", cfg_.mlp_tr, rng);
      nn::init_gcn(params_, "gcn", cfg_.gcn_width, rng);
      break;
    case TripletEncoder::GruGcn:
    case TripletEncoder::Gru: {
      nn::init_gru(params_, "gru_tr", cfg_.mlp_tr.front(), cfg_.gru_hidden, rng);
      const std::size_t out_dims[] = {cfg_.gru_hidden, 1};
      nn::init_mlp(params_, "gru_out", out_dims, rng);
      if (cfg_.variant == TripletEncoder::GruGcn) nn::init_gcn(params_, "gcn", cfg_.gcn_width, rng);
      break;
    }
    case TripletEncoder::Gat:
      params_.add("att_tr.W", nn::xavier_init(rng, cfg_.mlp_tr.front(), cfg_.mlp_tr[1]));
      params_.add("att_tr.a", nn::xavier_init(rng, cfg_.mlp_tr[1], 1));
      nn::init_gcn(params_, "gcn", cfg_.gcn_width, rng);
      break;
    case TripletEncoder::NonTemporalMlp:
      nn::init_mlp(params_, "mlp_tr", cfg_.mlp_tr, rng);
      break;
  }
}

namespace {

struct Layout {
  std::map<int, std::size_t> row;  // uid -> node row
  std::size_t ego_row = 0;
};

Layout layout_of(const TemporalGraph& g) {
  Layout l;
  for (std::size_t i = 0; i < g.nodes.size(); ++i) l.row[g.nodes[i].uid] = i;
  const auto ego = g.ego_uid();
  if (!ego) throw GraphError("model input has no EGO node");
  l.ego_row = l.row.at(*ego);
  return l;
}

Var rows_of(Tape& tape, const Tensor& t, const std::vector<std::size_t>& rows, std::size_t width) {
  Tensor out(rows.size(), width, 0.0);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t k = 0; k < width; ++k) out(i, k) = t(rows[i], k);
  }
  return tape.constant(std::move(out));
}

}  // namespace

Var Model::forward(Tape& tape, const Sample& s) {
  const TemporalGraph& g = s.graph;
  const Layout lay = layout_of(g);
  const std::size_t n = g.nodes.size();
  const FeatureVectors fv = assemble_features(s, cfg_.positional_encoding);

  // (1) encoders
  Var z_n = nn::mlp_forward(tape, params_, "mlp_n", tape.constant(fv.nodes), cfg_.mlp_n);

  std::vector<std::size_t> cond, plain;
  for (std::size_t i = 0; i < g.edges.size(); ++i) (fv.conditioning[i] ? cond : plain).push_back(i);

  // (2) conditioning fusion into the EGO embedding
  if (!cond.empty()) {
    Var z_c = nn::mlp_forward(tape, params_, "mlp_e",
                              rows_of(tape, fv.seed_edges, cond, kEdgeFeatureWidth), cfg_.mlp_e);
    const std::vector<std::size_t> to_ego(cond.size(), lay.ego_row);
    z_n = nn::add(z_n, nn::scatter_add_rows(z_c, to_ego, n));
  }

  // (3) GAT stack over agent-structure edges
  nn::EdgeList seed_edges;
  std::vector<std::size_t> feat_of;
  for (std::size_t k = 0; k < plain.size(); ++k) {
    const Edge& e = g.edges[plain[k]];
    const std::size_t a = lay.row.at(e.src), b = lay.row.at(e.dst);
    seed_edges.add(a, b);
    feat_of.push_back(k);
    if (cfg_.gat_bidirectional && a != b) {
      seed_edges.add(b, a);
      feat_of.push_back(k);
    }
  }
  Var e_a = tape.constant(Tensor(0, 1));
  if (!plain.empty()) {
    Var z_a = nn::mlp_forward(tape, params_, "mlp_e",
                              rows_of(tape, fv.seed_edges, plain, kEdgeFeatureWidth), cfg_.mlp_e);
    e_a = nn::gather_rows(z_a, feat_of);
  }
  Var z = nn::gat_forward(tape, params_, "gat1", z_n, e_a, seed_edges, cfg_.gat1_in,
                          cfg_.gat1_out, cfg_.gat);
  z = nn::mlp_forward(tape, params_, "mlp_gat", z, cfg_.mlp_gat);
  z = nn::gat_forward(tape, params_, "gat2", z, e_a, seed_edges, cfg_.gat2_in, cfg_.gat2_out,
                      cfg_.gat);

  if (s.candidates.empty()) return tape.constant(Tensor(0, 1));
  Var z_e = nn::mlp_forward(tape, params_, "mlp_e", tape.constant(fv.candidate_edges), cfg_.mlp_e);

  // (4)-(5) triplet encoder and link probabilities
  return nn::sigmoid(triplet_scores(tape, s, z, z_e, lay.ego_row));
}

Var Model::triplet_scores(Tape& tape, const Sample& s, Var z, Var z_e, std::size_t ego_row) {
  const TemporalGraph& g = s.graph;
  const Layout lay = layout_of(g);
  const std::size_t n = g.nodes.size();
  const auto& cands = s.candidates;

  const auto triplets = [&](Var nodes, const std::vector<std::size_t>& idx) {
    std::vector<std::size_t> src(idx.size(), ego_row), dst;
    for (std::size_t i : idx) dst.push_back(lay.row.at(cands[i].dst));
    const Var parts[] = {nn::gather_rows(nodes, src), nn::gather_rows(z_e, idx),
                         nn::gather_rows(nodes, dst)};
    return nn::concat_cols(parts);
  };

  if (cfg_.variant == TripletEncoder::NonTemporalMlp) {
    std::vector<std::size_t> all(cands.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    return nn::mlp_forward(tape, params_, "mlp_tr", triplets(z, all), cfg_.mlp_tr);
  }

  std::vector<std::vector<std::size_t>> by_tau(kFramesPerScenario);
  for (std::size_t i = 0; i < cands.size(); ++i) {
    const int t = cands[i].tau;
    if (t < 0 || t >= kFramesPerScenario) throw GraphError("candidate tau out of range");
    by_tau[static_cast<std::size_t>(t)].push_back(i);
  }
  const auto gcn_edges = [&](int tau) {
    std::vector<char> seen(n, 0);
    nn::EdgeList el;
    for (std::size_t i = 0; i < cands.size(); ++i) {
      if (cfg_.gcn_scope == GcnScope::CurrentTau && cands[i].tau != tau) continue;
      const std::size_t d = lay.row.at(cands[i].dst);
      if (!seen[d]) {
        seen[d] = 1;
        el.add(ego_row, d);
      }
    }
    return el;
  };

  // Recurrent variants keep one hidden state per (dst, relation) slot.
  const bool recurrent =
      cfg_.variant == TripletEncoder::GruGcn || cfg_.variant == TripletEncoder::Gru;
  std::vector<std::size_t> slot(cands.size());
  std::size_t n_slots = 0;
  if (recurrent) {
    std::map<std::pair<int, Relation>, std::size_t> ids;
    for (std::size_t i = 0; i < cands.size(); ++i) {
      auto [it, fresh] = ids.try_emplace({cands[i].dst, cands[i].relation}, ids.size());
      slot[i] = it->second;
    }
    n_slots = ids.size();
  }
  Var hidden = tape.constant(Tensor(n_slots, cfg_.gru_hidden, 0.0));
  const bool with_gcn = cfg_.variant != TripletEncoder::Gru;

  std::vector<Var> parts;
  std::vector<std::size_t> order;
  for (int tau = 0; tau < kFramesPerScenario; ++tau) {
    const auto& idx = by_tau[static_cast<std::size_t>(tau)];
    if (!idx.empty()) {
      Var x = triplets(z, idx);
      Var score;
      switch (cfg_.variant) {
        case TripletEncoder::MlpGcn:
          score = nn::mlp_forward(tape, params_, "mlp_tr", x, cfg_.mlp_tr);
          break;
        case TripletEncoder::Gat:
          score = nn::matmul(nn::leaky_relu(nn::matmul(x, tape.param(params_, "att_tr.W")),
                                            cfg_.gat.negative_slope),
                             tape.param(params_, "att_tr.a"));
          break;
        default: {
          std::vector<std::size_t> sl;
          for (std::size_t i : idx) sl.push_back(slot[i]);
          Var h_prev = nn::gather_rows(hidden, sl);
          Var h_new = nn::gru_cell(tape, params_, "gru_tr", x, h_prev);
          hidden = nn::add(hidden, nn::scatter_add_rows(nn::sub(h_new, h_prev), sl, n_slots));
          const std::size_t out_dims[] = {cfg_.gru_hidden, 1};
          score = nn::mlp_forward(tape, params_, "gru_out", h_new, out_dims);
          break;
        }
      }
      parts.push_back(score);
      order.insert(order.end(), idx.begin(), idx.end());
    }
    if (with_gcn && tau + 1 < kFramesPerScenario) {
      z = nn::gcn_forward(tape, params_, "gcn", z, gcn_edges(tau));
    }
  }
  Var stacked = nn::concat_rows(parts);
  std::vector<std::size_t> position(cands.size());
  for (std::size_t k = 0; k < order.size(); ++k) position[order[k]] = k;
  return nn::gather_rows(stacked, position);
}

std::vector<double> Model::predict_proba(const Sample& s) {
  Tape tape;
  Var p = forward(tape, s);
  return p.value().values();
}

double loss(std::span<const double> probabilities, std::span<const double> labels) {
  return nn::mean_bce(labels, probabilities);
}

// ----------------------------------------------------------------- training

MetricBundle evaluate_classification(Model& model, const std::vector<Sample>& set) {
  std::uint64_t tp = 0, fp = 0, tn = 0, fn = 0;
  for (const auto& s : set) {
    const auto p = model.predict_proba(s);
    const auto y = sample_labels(s);
    for (std::size_t i = 0; i < p.size(); ++i) {
      const bool pred = p[i] >= model.config().threshold;
      const bool gold = y[i] != 0.0;
      if (pred && gold) ++tp;
      else if (pred) ++fp;
      else if (gold) ++fn;
      else ++tn;
    }
  }
  return metrics_from_counts(tp, fp, tn, fn);
}

TrainResult train(Model& model, const std::vector<Sample>& train_set,
                  const std::vector<Sample>& val, std::ostream* log) {
  if (train_set.empty()) throw std::invalid_argument("train: empty training set");
  const ModelConfig& cfg = model.config();
  std::vector<std::vector<double>> labels;
  for (const auto& s : train_set) labels.push_back(sample_labels(s));

  nn::ParamStore& store = model.params();
  store.zero_grad();
  nn::Adam adam(cfg.adam);
  Rng rng(cfg.rng_seed ^ 0x9e3779b97f4a7c15ULL);

  TrainResult result;
  std::vector<Tensor> best;
  for (const auto& e : store.entries()) best.push_back(e.value);
  double best_f1 = -1.0;

  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    rng.shuffle(std::span<std::size_t>(order));
    double total = 0.0;
    std::size_t counted = 0;
    for (std::size_t i : order) {
      if (train_set[i].candidates.empty()) continue;
      Tape tape;
      Var p = model.forward(tape, train_set[i]);
      Var l = nn::mean_bce(p, labels[i]);
      const double lv = l.value()[0];
      if (!std::isfinite(lv)) {
        throw nn::NonFiniteError("non-finite loss at epoch " + std::to_string(epoch) +
                                 " on training graph " + std::to_string(i));
      }
      tape.backward(l);
      nn::clip_gradients(store, cfg.clip);
      adam.step(store);
      total += lv;
      ++counted;
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = counted ? total / static_cast<double>(counted) : 0.0;
    rec.val_f1 = val.empty() ? 0.0 : evaluate_classification(model, val).f1;
    result.history.push_back(rec);
    if (log) {
      char buf[96];
      std::snprintf(buf, sizeof buf, "epoch %4d  loss %.6f  val_f1 %.4f\n", epoch, rec.train_loss,
                    rec.val_f1);
      *log << buf << std::flush;
    }
    if (val.empty() || rec.val_f1 > best_f1) {
      best_f1 = rec.val_f1;
      result.best_epoch = epoch;
      for (std::size_t k = 0; k < store.size(); ++k) best[k] = store.at(k).value;
    }
  }
  for (std::size_t k = 0; k < store.size(); ++k) store.at(k).value = best[k];
  result.adam = adam.state();
  return result;
}

void write_history_csv(std::ostream& out, const std::vector<EpochRecord>& history) {
  out << "epoch,train_loss,val_f1\n";
  char buf[96];
  for (const auto& r : history) {
    std::snprintf(buf, sizeof buf, "%d,%.9g,%.9g\n", r.epoch, r.train_loss, r.val_f1);
    out << buf;
  }
}

// --------------------------------------------------------------- prediction

std::vector<std::size_t> select_candidates(const std::vector<TripletCandidate>& scored,
                                           const TemporalGraph& g, const Ontology& ont,
                                           double threshold) {
  // key: (dst or -1 for the per-tau location choice, tau, group id)
  std::map<std::tuple<int, int, long>, std::size_t> best;
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < scored.size(); ++i) {
    const auto& c = scored[i];
    if (!c.probability) throw std::invalid_argument("select_candidates: unscored candidate");
    std::tuple<int, int, long> key;
    if (const auto grp = ont.exclusion_group_of(c.relation)) {
      key = {c.dst, c.tau, static_cast<long>(*grp)};
    } else if (c.relation == Relation::IsIn && is_location(g.node(c.dst).cls)) {
      key = {-1, c.tau, -1};
    } else {
      if (*c.probability >= threshold) keep.push_back(i);
      continue;
    }
    auto [it, fresh] = best.try_emplace(key, i);
    if (!fresh && *c.probability > *scored[it->second].probability) it->second = i;
  }
  for (const auto& [key, i] : best) {
    if (*scored[i].probability >= threshold) keep.push_back(i);
  }
  std::sort(keep.begin(), keep.end());
  return keep;
}

Prediction predict(Model& model, const TemporalGraph& seed, const Ontology& ont) {
  validate(seed, ont);
  Sample s = augment(seed, ont);
  const auto p = model.predict_proba(s);
  for (std::size_t i = 0; i < p.size(); ++i) s.candidates[i].probability = p[i];

  Prediction out;
  out.graph = seed;
  out.graph.flavor = Flavor::Scenario;
  for (std::size_t i : select_candidates(s.candidates, s.graph, ont, model.config().threshold)) {
    out.graph.edges.push_back(candidate_edge(s.candidates[i], s.graph, ont));
  }
  validate(out.graph, ont);
  out.candidates = std::move(s.candidates);
  return out;
}

// --------------------------------------------------------------- checkpoint

void save_checkpoint(const std::string& path, const Model& model, const nn::AdamState* adam) {
  nlohmann::json j;
  j["format"] = "critscene-checkpoint";
  j["version"] = 1;
  j["config"] = config_to_json(model.config());
  j["params"] = nn::params_to_json(model.params());
  if (adam) {
    nn::Adam a(model.config().adam);
    a.state() = *adam;
    j["adam"] = nn::adam_to_json(a, model.params());
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path);
  out << j.dump() << '\n';
}

Model load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read checkpoint " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("malformed checkpoint " + path + ": " + e.what());
  }
  if (j.value("format", "") != "critscene-checkpoint" || j.value("version", 0) != 1) {
    throw std::runtime_error(path + " is not a version 1 checkpoint");
  }
  Model m(config_from_json(j.at("config")));
  nn::params_from_json(j.at("params"), m.params());
  return m;
}

}  // namespace critscene
