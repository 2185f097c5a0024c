#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "critscene/evaluation.hpp"
#include "critscene/nn/autodiff.hpp"
#include "critscene/nn/layers.hpp"
#include "critscene/nn/optim.hpp"
#include "critscene/scene_graph.hpp"

namespace critscene {

enum class TripletEncoder { MlpGcn, GruGcn, Gru, Gat, NonTemporalMlp };

std::string_view to_string(TripletEncoder v);
/// Accepts "mlp-gcn", "gru-gcn", "gru", "gat", "mlp".
std::optional<TripletEncoder> triplet_encoder_from_string(std::string_view s);

/// Which candidate edges the interleaved GCN aggregates over at step tau.
enum class GcnScope { CurrentTau, AllCandidates };

struct ModelConfig {
  std::vector<std::size_t> mlp_n = {22, 8, 1};
  std::vector<std::size_t> mlp_e = {27, 8, 1};
  std::vector<std::size_t> mlp_tr = {3, 16, 1};
  std::vector<std::size_t> mlp_gat = {64, 128, 256};
  std::size_t gat1_in = 1, gat1_out = 64;
  std::size_t gat2_in = 256, gat2_out = 1;
  std::size_t gcn_width = 1;
  std::size_t gru_hidden = 16;
  std::size_t pe_length = 2;

  int epochs = 100;
  std::uint64_t rng_seed = 1;
  double threshold = 0.5;
  TripletEncoder variant = TripletEncoder::MlpGcn;
  bool positional_encoding = true;

  /// GAT reads seed edges in both directions (plus the implicit self-edge).
  bool gat_bidirectional = true;
  GcnScope gcn_scope = GcnScope::CurrentTau;
  nn::GatOptions gat;
  nn::AdamConfig adam;
  double clip = 1.0;

  /// Throws std::invalid_argument when stage widths do not chain.
  void validate() const;
};

nlohmann::json config_to_json(const ModelConfig& c);
ModelConfig config_from_json(const nlohmann::json& j);

/// A labelled (or unlabelled) augmented graph ready for the model.
using Sample = AugmentedGraph;

/// Scenario graph -> seed with conditioning -> augmented candidates with labels.
Sample make_sample(const TemporalGraph& scenario, const Ontology& ont);
std::vector<double> sample_labels(const Sample& s);

class Model {
 public:
  explicit Model(ModelConfig cfg);

  const ModelConfig& config() const { return cfg_; }
  nn::ParamStore& params() { return params_; }
  const nn::ParamStore& params() const { return params_; }

  /// Per-candidate probabilities [C, 1], recorded on `tape`.
  nn::Var forward(nn::Tape& tape, const Sample& s);
  std::vector<double> predict_proba(const Sample& s);

 private:
  nn::Var triplet_scores(nn::Tape& tape, const Sample& s, nn::Var z, nn::Var z_e,
                         std::size_t ego_row);

  ModelConfig cfg_;
  nn::ParamStore params_;
};

/// Mean binary cross-entropy, delegating to nn::mean_bce.
double loss(std::span<const double> probabilities, std::span<const double> labels);

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double val_f1 = 0.0;
};

struct TrainResult {
  std::vector<EpochRecord> history;
  int best_epoch = 0;  // 0 means the initial parameters
  nn::AdamState adam;
};

/// Seeded shuffle, per-graph forward/backward, clip, Adam step. On return the
/// model holds the parameters of the best validation-F1 epoch (the final epoch
/// when `val` is empty). A non-finite loss throws nn::NonFiniteError.
TrainResult train(Model& model, const std::vector<Sample>& train_set,
                  const std::vector<Sample>& val, std::ostream* log = nullptr);

void write_history_csv(std::ostream& out, const std::vector<EpochRecord>& history);

/// Thresholded candidate predictions (before exclusion filtering) against labels.
MetricBundle evaluate_classification(Model& model, const std::vector<Sample>& set);

struct Prediction {
  TemporalGraph graph;                     // Scenario flavor
  std::vector<TripletCandidate> candidates;  // with probabilities
};

/// Augment, score, then keep per (dst, tau) the most probable relation of each
/// exclusion group and per tau the most probable EGO location, each only when
/// it reaches the threshold. Seed and conditioning edges are carried through.
Prediction predict(Model& model, const TemporalGraph& seed, const Ontology& ont);

/// Selection rule of `predict` applied to already scored candidates.
std::vector<std::size_t> select_candidates(const std::vector<TripletCandidate>& scored,
                                           const TemporalGraph& g, const Ontology& ont,
                                           double threshold);

// Checkpoint: {"format": "critscene-checkpoint", "version": 1, "config": ...,
// "params": ..., "adam": ...}.
void save_checkpoint(const std::string& path, const Model& model,
                     const nn::AdamState* adam = nullptr);
Model load_checkpoint(const std::string& path);

}  // namespace critscene
