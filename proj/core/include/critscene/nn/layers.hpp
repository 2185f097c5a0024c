#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "critscene/nn/autodiff.hpp"
#include "critscene/random.hpp"

namespace critscene::nn {

/// Uniform in ±sqrt(6 / (fan_in + fan_out)), shape [fan_in, fan_out].
Tensor xavier_init(Rng& rng, std::size_t fan_in, std::size_t fan_out);
Tensor xavier_init(std::uint64_t seed, std::size_t fan_in, std::size_t fan_out);

/// Directed edge list over node indices.
struct EdgeList {
  std::vector<std::size_t> src;
  std::vector<std::size_t> dst;

  std::size_t size() const { return src.size(); }
  void add(std::size_t s, std::size_t d) {
    src.push_back(s);
    dst.push_back(d);
  }
};

// Dense stack: affine layers dims[i] -> dims[i+1], ReLU between, none after
// the last. Parameters `<name>.W<i>` ([in,out]) and `<name>.b<i>` ([1,out]).
void init_mlp(ParamStore& store, const std::string& name, std::span<const std::size_t> dims,
              Rng& rng);
Var mlp_forward(Tape& tape, ParamStore& store, const std::string& name, Var x,
                std::span<const std::size_t> dims);

struct GatOptions {
  bool edge_in_message = true;
  bool edge_in_logit = true;
  double negative_slope = 0.2;
};

// Single-head graph attention with scalar edge features. For edge i->j:
//   m_ij = W h_i + U e_ij
//   l_ij = LeakyReLU(a_src . W h_i + a_dst . W h_j + a_edge . U e_ij)
//   h'_j = sum_i softmax_j(l_ij) m_ij
// Every node receives an implicit self-edge with e = 0.
void init_gat(ParamStore& store, const std::string& name, std::size_t d_in, std::size_t d_out,
              Rng& rng);
Var gat_forward(Tape& tape, ParamStore& store, const std::string& name, Var node_feats,
                Var edge_feats, const EdgeList& edges, std::size_t d_in, std::size_t d_out,
                const GatOptions& opts = {}, std::vector<double>* attention = nullptr);

// Symmetric-normalised graph convolution with self-loops over an undirected
// reading of `edges` (each listed edge counts once for both endpoints):
//   h'_i = sum_{j in N(i) + {i}} h_j W / sqrt((deg_i + 1)(deg_j + 1))
void init_gcn(ParamStore& store, const std::string& name, std::size_t width, Rng& rng);
Var gcn_forward(Tape& tape, ParamStore& store, const std::string& name, Var node_feats,
                const EdgeList& edges);

// Gated recurrent unit cell, used by the recurrent triplet-encoder variants.
void init_gru(ParamStore& store, const std::string& name, std::size_t d_in, std::size_t d_hidden,
              Rng& rng);
Var gru_cell(Tape& tape, ParamStore& store, const std::string& name, Var x, Var h);

}  // namespace critscene::nn
