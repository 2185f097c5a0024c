#include "critscene/nn/layers.hpp"

#include <cmath>

namespace critscene::nn {

Tensor xavier_init(Rng& rng, std::size_t fan_in, std::size_t fan_out) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Tensor t(fan_in, fan_out);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-bound, bound);
  return t;
}

Tensor xavier_init(std::uint64_t seed, std::size_t fan_in, std::size_t fan_out) {
  Rng rng(seed);
  return xavier_init(rng, fan_in, fan_out);
}

// ----------------------------------------------------------------------- MLP

void init_mlp(ParamStore& store, const std::string& name, std::span<const std::size_t> dims,
              Rng& rng) {
  if (dims.size() < 2) throw ShapeError("init_mlp: need at least two dims");
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    store.add(name + ".W" + std::to_string(i), xavier_init(rng, dims[i], dims[i + 1]));
    store.add(name + ".b" + std::to_string(i), Tensor(1, dims[i + 1], 0.0));
  }
}

Var mlp_forward(Tape& tape, ParamStore& store, const std::string& name, Var x,
                std::span<const std::size_t> dims) {
  if (dims.size() < 2) throw ShapeError("mlp_forward: need at least two dims");
  if (x.cols() != dims[0]) {
    throw ShapeError("mlp_forward(" + name + "): input width " + std::to_string(x.cols()) +
                     " != " + std::to_string(dims[0]));
  }
  Var h = x;
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    Var W = tape.param(store, name + ".W" + std::to_string(i));
    Var b = tape.param(store, name + ".b" + std::to_string(i));
    if (W.rows() != dims[i] || W.cols() != dims[i + 1]) {
      throw ShapeError("mlp_forward(" + name + "): weight " + std::to_string(i) + " has shape " +
                       W.value().shape_string());
    }
    h = add_bias(matmul(h, W), b);
    if (i + 2 < dims.size()) h = relu(h);
  }
  return h;
}

// ----------------------------------------------------------------------- GAT

void init_gat(ParamStore& store, const std::string& name, std::size_t d_in, std::size_t d_out,
              Rng& rng) {
  store.add(name + ".W", xavier_init(rng, d_in, d_out));
  store.add(name + ".U", xavier_init(rng, 1, d_out));
  store.add(name + ".a_src", xavier_init(rng, d_out, 1));
  store.add(name + ".a_dst", xavier_init(rng, d_out, 1));
  store.add(name + ".a_edge", xavier_init(rng, d_out, 1));
}

Var gat_forward(Tape& tape, ParamStore& store, const std::string& name, Var node_feats,
                Var edge_feats, const EdgeList& edges, std::size_t d_in, std::size_t d_out,
                const GatOptions& opts, std::vector<double>* attention) {
  const std::size_t n = node_feats.rows();
  if (node_feats.cols() != d_in) {
    throw ShapeError("gat_forward(" + name + "): node width " +
                     std::to_string(node_feats.cols()) + " != " + std::to_string(d_in));
  }
  if (edge_feats.rows() != edges.size() || (edges.size() > 0 && edge_feats.cols() != 1)) {
    throw ShapeError("gat_forward(" + name + "): expects one scalar feature per edge");
  }
  std::vector<std::size_t> src = edges.src, dst = edges.dst;
  for (std::size_t e = 0; e < edges.size(); ++e) {
    if (src[e] >= n || dst[e] >= n) {
      throw std::out_of_range("gat_forward(" + name + "): dangling edge endpoint");
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    src.push_back(i);
    dst.push_back(i);
  }

  Var W = tape.param(store, name + ".W");
  Var U = tape.param(store, name + ".U");
  Var a_src = tape.param(store, name + ".a_src");
  Var a_dst = tape.param(store, name + ".a_dst");
  if (W.rows() != d_in || W.cols() != d_out) {
    throw ShapeError("gat_forward(" + name + "): W has shape " + W.value().shape_string());
  }

  Var wh = matmul(node_feats, W);
  const Var e_parts[] = {edge_feats, tape.constant(Tensor(n, 1, 0.0))};
  Var e_all = edges.size() > 0 ? concat_rows(e_parts) : e_parts[1];
  Var ue = matmul(e_all, U);

  Var logit = add(gather_rows(matmul(wh, a_src), src), gather_rows(matmul(wh, a_dst), dst));
  if (opts.edge_in_logit) {
    Var a_edge = tape.param(store, name + ".a_edge");
    logit = add(logit, matmul(ue, a_edge));
  }
  Var alpha = segment_softmax(leaky_relu(logit, opts.negative_slope), dst, n);
  if (attention != nullptr) attention->assign(alpha.value().data().begin(), alpha.value().data().end());

  Var msg = gather_rows(wh, src);
  if (opts.edge_in_message) msg = add(msg, ue);
  return scatter_add_rows(mul_rows(msg, alpha), dst, n);
}

// ----------------------------------------------------------------------- GCN

void init_gcn(ParamStore& store, const std::string& name, std::size_t width, Rng& rng) {
  store.add(name + ".W", xavier_init(rng, width, width));
}

Var gcn_forward(Tape& tape, ParamStore& store, const std::string& name, Var node_feats,
                const EdgeList& edges) {
  const std::size_t n = node_feats.rows();
  std::vector<double> deg(n, 0.0);
  for (std::size_t e = 0; e < edges.size(); ++e) {
    if (edges.src[e] >= n || edges.dst[e] >= n) {
      throw std::out_of_range("gcn_forward(" + name + "): dangling edge endpoint");
    }
    deg[edges.src[e]] += 1.0;
    deg[edges.dst[e]] += 1.0;
  }
  std::vector<std::size_t> from, to;
  std::vector<double> weight;
  for (std::size_t i = 0; i < n; ++i) {
    from.push_back(i);
    to.push_back(i);
    weight.push_back(1.0 / (deg[i] + 1.0));
  }
  for (std::size_t e = 0; e < edges.size(); ++e) {
    const std::size_t s = edges.src[e], d = edges.dst[e];
    const double w = 1.0 / std::sqrt((deg[s] + 1.0) * (deg[d] + 1.0));
    from.push_back(s);
    to.push_back(d);
    weight.push_back(w);
    from.push_back(d);
    to.push_back(s);
    weight.push_back(w);
  }
  Var W = tape.param(store, name + ".W");
  if (W.rows() != node_feats.cols()) {
    throw ShapeError("gcn_forward(" + name + "): W has shape " + W.value().shape_string());
  }
  Var hw = matmul(node_feats, W);
  return scatter_add_rows(scale_rows(gather_rows(hw, from), weight), to, n);
}

// ----------------------------------------------------------------------- GRU

void init_gru(ParamStore& store, const std::string& name, std::size_t d_in, std::size_t d_hidden,
              Rng& rng) {
  for (const char* gate : {"z", "r", "n"}) {
    store.add(name + ".W" + gate, xavier_init(rng, d_in, d_hidden));
    store.add(name + ".U" + gate, xavier_init(rng, d_hidden, d_hidden));
    store.add(name + ".b" + gate, Tensor(1, d_hidden, 0.0));
  }
}

Var gru_cell(Tape& tape, ParamStore& store, const std::string& name, Var x, Var h) {
  auto p = [&](const std::string& s) { return tape.param(store, name + "." + s); };
  Var z = sigmoid(add_bias(add(matmul(x, p("Wz")), matmul(h, p("Uz"))), p("bz")));
  Var r = sigmoid(add_bias(add(matmul(x, p("Wr")), matmul(h, p("Ur"))), p("br")));
  Var cand = tanh(add_bias(add(matmul(x, p("Wn")), matmul(mul(r, h), p("Un"))), p("bn")));
  return add(mul(one_minus(z), cand), mul(z, h));
}

}  // namespace critscene::nn
