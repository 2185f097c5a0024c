#include "critscene/nn/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace critscene::nn {

// ---------------------------------------------------------------- ParamStore

Tensor& ParamStore::add(const std::string& name, Tensor value) {
  if (contains(name)) throw std::invalid_argument("duplicate parameter '" + name + "'");
  index_[name] = entries_.size();
  Tensor grad(value.shape(), 0.0);
  entries_.push_back({name, std::move(value), std::move(grad)});
  return entries_.back().value;
}

std::size_t ParamStore::index(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("no parameter named '" + name + "'");
  return it->second;
}

std::size_t ParamStore::parameter_count() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.value.size();
  return n;
}

void ParamStore::zero_grad() {
  for (auto& e : entries_) e.grad.fill(0.0);
}

// ---------------------------------------------------------------------- Tape

const Tensor& Var::value() const { return tape->value(id); }

Var Tape::constant(Tensor value) {
  nodes_.push_back({std::move(value), {}, nullptr, nullptr, 0});
  return {this, nodes_.size() - 1};
}

Var Tape::param(ParamStore& store, const std::string& name) {
  const std::size_t idx = store.index(name);
  nodes_.push_back({store.at(idx).value, {}, nullptr, &store, idx});
  return {this, nodes_.size() - 1};
}

Var Tape::push(Tensor value, Backward backward) {
  nodes_.push_back({std::move(value), {}, std::move(backward), nullptr, 0});
  return {this, nodes_.size() - 1};
}

Tensor& Tape::grad(std::size_t id) {
  auto& n = nodes_[id];
  if (n.grad.size() != n.value.size() || n.grad.shape() != n.value.shape()) {
    n.grad = Tensor(n.value.shape(), 0.0);
  }
  return n.grad;
}

void Tape::backward(Var out) {
  if (out.tape != this) throw std::invalid_argument("backward: variable from another tape");
  if (value(out.id).size() != 1) throw ShapeError("backward: output must be a scalar");
  grad(out.id)[0] = 1.0;
  for (std::size_t i = out.id + 1; i-- > 0;) {
    auto& n = nodes_[i];
    if (n.grad.size() == 0) continue;
    if (n.backward) n.backward(*this, i);
  }
  for (auto& n : nodes_) {
    if (n.store == nullptr || n.grad.size() == 0) continue;
    auto& g = n.store->at(n.param_index).grad;
    for (std::size_t k = 0; k < g.size(); ++k) g[k] += n.grad[k];
  }
}

// ----------------------------------------------------------------------- ops

namespace {

void require(bool cond, const std::string& msg) {
  if (!cond) throw ShapeError(msg);
}

std::string shapes(const Tensor& a, const Tensor& b) {
  return a.shape_string() + " vs " + b.shape_string();
}

}  // namespace

Var matmul(Var a, Var b) {
  Tape& t = *a.tape;
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  require(A.cols() == B.rows(), "matmul: " + shapes(A, B));
  const std::size_t n = A.rows(), k = A.cols(), m = B.cols();
  Tensor C(n, m);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double av = A(i, p);
      if (av == 0.0) continue;
      const double* brow = &B.data()[p * m];
      double* crow = &C.data()[i * m];
      for (std::size_t j = 0; j < m; ++j) crow[j] += av * brow[j];
    }
  }
  const std::size_t ia = a.id, ib = b.id;
  return t.push(std::move(C), [ia, ib, n, k, m](Tape& tp, std::size_t self) {
    const Tensor& G = tp.grad(self);
    const Tensor& A = tp.value(ia);
    const Tensor& B = tp.value(ib);
    Tensor& GA = tp.grad(ia);
    for (std::size_t i = 0; i < n; ++i) {
      const double* grow = &G.data()[i * m];
      for (std::size_t p = 0; p < k; ++p) {
        const double* brow = &B.data()[p * m];
        double s = 0.0;
        for (std::size_t j = 0; j < m; ++j) s += grow[j] * brow[j];
        GA(i, p) += s;
      }
    }
    Tensor& GB = tp.grad(ib);
    for (std::size_t i = 0; i < n; ++i) {
      const double* grow = &G.data()[i * m];
      for (std::size_t p = 0; p < k; ++p) {
        const double av = A(i, p);
        if (av == 0.0) continue;
        double* gbrow = &GB.data()[p * m];
        for (std::size_t j = 0; j < m; ++j) gbrow[j] += av * grow[j];
      }
    }
  });
}

Var add(Var a, Var b) {
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  require(A.same_shape(B), "add: " + shapes(A, B));
  Tensor C = A;
  for (std::size_t i = 0; i < C.size(); ++i) C[i] += B[i];
  const std::size_t ia = a.id, ib = b.id;
  return a.tape->push(std::move(C), [ia, ib](Tape& tp, std::size_t self) {
    const Tensor& G = tp.grad(self);
    Tensor& GA = tp.grad(ia);
    for (std::size_t i = 0; i < G.size(); ++i) GA[i] += G[i];
    Tensor& GB = tp.grad(ib);
    for (std::size_t i = 0; i < G.size(); ++i) GB[i] += G[i];
  });
}

Var sub(Var a, Var b) {
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  require(A.same_shape(B), "sub: " + shapes(A, B));
  Tensor C = A;
  for (std::size_t i = 0; i < C.size(); ++i) C[i] -= B[i];
  const std::size_t ia = a.id, ib = b.id;
  return a.tape->push(std::move(C), [ia, ib](Tape& tp, std::size_t self) {
    const Tensor& G = tp.grad(self);
    Tensor& GA = tp.grad(ia);
    for (std::size_t i = 0; i < G.size(); ++i) GA[i] += G[i];
    Tensor& GB = tp.grad(ib);
    for (std::size_t i = 0; i < G.size(); ++i) GB[i] -= G[i];
  });
}

Var mul(Var a, Var b) {
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  require(A.same_shape(B), "mul: " + shapes(A, B));
  Tensor C = A;
  for (std::size_t i = 0; i < C.size(); ++i) C[i] *= B[i];
  const std::size_t ia = a.id, ib = b.id;
  return a.tape->push(std::move(C), [ia, ib](Tape& tp, std::size_t self) {
    const Tensor& G = tp.grad(self);
    const Tensor& A = tp.value(ia);
    const Tensor& B = tp.value(ib);
    Tensor& GA = tp.grad(ia);
    for (std::size_t i = 0; i < G.size(); ++i) GA[i] += G[i] * B[i];
    Tensor& GB = tp.grad(ib);
    for (std::size_t i = 0; i < G.size(); ++i) GB[i] += G[i] * A[i];
  });
}

Var add_bias(Var a, Var bias) {
  const Tensor& A = a.value();
  const Tensor& b = bias.value();
  require(b.rows() == 1 && b.cols() == A.cols(), "add_bias: " + shapes(A, b));
  Tensor C = A;
  const std::size_t n = A.rows(), m = A.cols();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) C(i, j) += b[j];
  const std::size_t ia = a.id, ib = bias.id;
  return a.tape->push(std::move(C), [ia, ib, n, m](Tape& tp, std::size_t self) {
    const Tensor& G = tp.grad(self);
    Tensor& GA = tp.grad(ia);
    for (std::size_t i = 0; i < G.size(); ++i) GA[i] += G[i];
    Tensor& GB = tp.grad(ib);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < m; ++j) GB[j] += G(i, j);
  });
}

Var scale(Var a, double factor) {
  Tensor C = a.value();
  for (std::size_t i = 0; i < C.size(); ++i) C[i] *= factor;
  const std::size_t ia = a.id;
  return a.tape->push(std::move(C), [ia, factor](Tape& tp, std::size_t self) {
    const Tensor& G = tp.grad(self);
    Tensor& GA = tp.grad(ia);
    for (std::size_t i = 0; i < G.size(); ++i) GA[i] += factor * G[i];
  });
}

Var one_minus(Var a) {
  Tensor C = a.value();
  for (std::size_t i = 0; i < C.size(); ++i) C[i] = 1.0 - C[i];
  const std::size_t ia = a.id;
  return a.tape->push(std::move(C), [ia](Tape& tp, std::size_t self) {
    const Tensor& G = tp.grad(self);
    Tensor& GA = tp.grad(ia);
    for (std::size_t i = 0; i < G.size(); ++i) GA[i] -= G[i];
  });
}

Var relu(Var a) { return leaky_relu(a, 0.0); }

Var leaky_relu(Var a, double slope) {
  Tensor C = a.value();
  for (std::size_t i = 0; i < C.size(); ++i)
    if (C[i] < 0.0) C[i] *= slope;
  const std::size_t ia = a.id;
  return a.tape->push(std::move(C), [ia, slope](Tape& tp, std::size_t self) {
    const Tensor& G = tp.grad(self);
    const Tensor& A = tp.value(ia);
    Tensor& GA = tp.grad(ia);
    for (std::size_t i = 0; i < G.size(); ++i) GA[i] += A[i] > 0.0 ? G[i] : slope * G[i];
  });
}

Var sigmoid(Var a) {
  Tensor C = a.value();
  for (std::size_t i = 0; i < C.size(); ++i) {
    const double x = C[i];
    if (x >= 0.0) {
      C[i] = 1.0 / (1.0 + std::exp(-x));
    } else {
      const double e = std::exp(x);
      C[i] = e / (1.0 + e);
    }
  }
  const std::size_t ia = a.id;
  return a.tape->push(std::move(C), [ia](Tape& tp, std::size_t self) {
    const Tensor& G = tp.grad(self);
    const Tensor& Y = tp.value(self);
    Tensor& GA = tp.grad(ia);
    for (std::size_t i = 0; i < G.size(); ++i) GA[i] += G[i] * Y[i] * (1.0 - Y[i]);
  });
}

Var tanh(Var a) {
  Tensor C = a.value();
  for (std::size_t i = 0; i < C.size(); ++i) C[i] = std::tanh(C[i]);
  const std::size_t ia = a.id;
  return a.tape->push(std::move(C), [ia](Tape& tp, std::size_t self) {
    const Tensor& G = tp.grad(self);
    const Tensor& Y = tp.value(self);
    Tensor& GA = tp.grad(ia);
    for (std::size_t i = 0; i < G.size(); ++i) GA[i] += G[i] * (1.0 - Y[i] * Y[i]);
  });
}

Var gather_rows(Var a, std::span<const std::size_t> rows) {
  const Tensor& A = a.value();
  const std::size_t m = A.cols();
  Tensor C(rows.size(), m);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    require(rows[r] < A.rows(), "gather_rows: index out of range");
    std::copy_n(&A.data()[rows[r] * m], m, &C.data()[r * m]);
  }
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  const std::size_t ia = a.id;
  return a.tape->push(std::move(C), [ia, idx = std::move(idx), m](Tape& tp, std::size_t self) {
    const Tensor& G = tp.grad(self);
    Tensor& GA = tp.grad(ia);
    for (std::size_t r = 0; r < idx.size(); ++r)
      for (std::size_t j = 0; j < m; ++j) GA(idx[r], j) += G(r, j);
  });
}

Var scatter_add_rows(Var a, std::span<const std::size_t> rows, std::size_t n_out) {
  const Tensor& A = a.value();
  require(rows.size() == A.rows(), "scatter_add_rows: index count mismatch");
  const std::size_t m = A.cols();
  Tensor C(n_out, m);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    require(rows[r] < n_out, "scatter_add_rows: index out of range");
    for (std::size_t j = 0; j < m; ++j) C(rows[r], j) += A(r, j);
  }
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  const std::size_t ia = a.id;
  return a.tape->push(std::move(C), [ia, idx = std::move(idx), m](Tape& tp, std::size_t self) {
    const Tensor& G = tp.grad(self);
    Tensor& GA = tp.grad(ia);
    for (std::size_t r = 0; r < idx.size(); ++r)
      for (std::size_t j = 0; j < m; ++j) GA(r, j) += G(idx[r], j);
  });
}

Var scale_rows(Var a, std::span<const double> weights) {
  const Tensor& A = a.value();
  require(weights.size() == A.rows(), "scale_rows: weight count mismatch");
  const std::size_t m = A.cols();
  Tensor C = A;
  for (std::size_t r = 0; r < A.rows(); ++r)
    for (std::size_t j = 0; j < m; ++j) C(r, j) *= weights[r];
  std::vector<double> w(weights.begin(), weights.end());
  const std::size_t ia = a.id;
  return a.tape->push(std::move(C), [ia, w = std::move(w), m](Tape& tp, std::size_t self) {
    const Tensor& G = tp.grad(self);
    Tensor& GA = tp.grad(ia);
    for (std::size_t r = 0; r < w.size(); ++r)
      for (std::size_t j = 0; j < m; ++j) GA(r, j) += w[r] * G(r, j);
  });
}

Var mul_rows(Var a, Var weights) {
  const Tensor& A = a.value();
  const Tensor& W = weights.value();
  require(W.rows() == A.rows() && W.cols() == 1, "mul_rows: " + shapes(A, W));
  const std::size_t m = A.cols();
  Tensor C = A;
  for (std::size_t r = 0; r < A.rows(); ++r)
    for (std::size_t j = 0; j < m; ++j) C(r, j) *= W[r];
  const std::size_t ia = a.id, iw = weights.id;
  return a.tape->push(std::move(C), [ia, iw, m](Tape& tp, std::size_t self) {
    const Tensor& G = tp.grad(self);
    const Tensor& A = tp.value(ia);
    const Tensor& W = tp.value(iw);
    Tensor& GA = tp.grad(ia);
    Tensor& GW = tp.grad(iw);
    for (std::size_t r = 0; r < A.rows(); ++r) {
      double s = 0.0;
      for (std::size_t j = 0; j < m; ++j) {
        GA(r, j) += W[r] * G(r, j);
        s += A(r, j) * G(r, j);
      }
      GW[r] += s;
    }
  });
}

Var concat_cols(std::span<const Var> parts) {
  require(!parts.empty(), "concat_cols: no inputs");
  Tape& t = *parts[0].tape;
  const std::size_t n = parts[0].rows();
  std::vector<std::size_t> ids, widths;
  std::size_t total = 0;
  for (const Var& p : parts) {
    require(p.rows() == n, "concat_cols: row mismatch");
    ids.push_back(p.id);
    widths.push_back(p.cols());
    total += p.cols();
  }
  Tensor C(n, total);
  std::size_t off = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const Tensor& P = parts[k].value();
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < widths[k]; ++j) C(i, off + j) = P(i, j);
    off += widths[k];
  }
  return t.push(std::move(C), [ids, widths, n](Tape& tp, std::size_t self) {
    const Tensor& G = tp.grad(self);
    std::size_t off = 0;
    for (std::size_t k = 0; k < ids.size(); ++k) {
      Tensor& GP = tp.grad(ids[k]);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < widths[k]; ++j) GP(i, j) += G(i, off + j);
      off += widths[k];
    }
  });
}

Var concat_rows(std::span<const Var> parts) {
  require(!parts.empty(), "concat_rows: no inputs");
  Tape& t = *parts[0].tape;
  std::size_t m = 0;
  for (const Var& p : parts) {
    if (p.rows() > 0) {
      m = p.cols();
      break;
    }
  }
  std::vector<std::size_t> ids, counts;
  std::size_t total = 0;
  for (const Var& p : parts) {
    require(p.cols() == m || p.rows() == 0, "concat_rows: column mismatch");
    ids.push_back(p.id);
    counts.push_back(p.rows());
    total += p.rows();
  }
  Tensor C(total, m);
  std::size_t off = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const Tensor& P = parts[k].value();
    std::copy_n(P.data().data(), counts[k] * m, &C.data()[off * m]);
    off += counts[k];
  }
  return t.push(std::move(C), [ids, counts, m](Tape& tp, std::size_t self) {
    const Tensor& G = tp.grad(self);
    std::size_t off = 0;
    for (std::size_t k = 0; k < ids.size(); ++k) {
      if (counts[k] == 0) continue;
      Tensor& GP = tp.grad(ids[k]);
      for (std::size_t i = 0; i < counts[k] * m; ++i) GP[i] += G[off * m + i];
      off += counts[k];
    }
  });
}

Var segment_softmax(Var logits, std::span<const std::size_t> segment, std::size_t n) {
  const Tensor& L = logits.value();
  require(L.cols() == 1 && L.rows() == segment.size(), "segment_softmax: expects [E,1] logits");
  std::vector<double> mx(n, -std::numeric_limits<double>::infinity());
  for (std::size_t e = 0; e < segment.size(); ++e) {
    require(segment[e] < n, "segment_softmax: segment out of range");
    mx[segment[e]] = std::max(mx[segment[e]], L[e]);
  }
  Tensor C(L.rows(), 1);
  std::vector<double> denom(n, 0.0);
  for (std::size_t e = 0; e < segment.size(); ++e) {
    C[e] = std::exp(L[e] - mx[segment[e]]);
    denom[segment[e]] += C[e];
  }
  for (std::size_t e = 0; e < segment.size(); ++e) C[e] /= denom[segment[e]];
  std::vector<std::size_t> seg(segment.begin(), segment.end());
  const std::size_t il = logits.id;
  return logits.tape->push(std::move(C), [il, seg = std::move(seg), n](Tape& tp, std::size_t self) {
    const Tensor& G = tp.grad(self);
    const Tensor& Y = tp.value(self);
    std::vector<double> dot(n, 0.0);
    for (std::size_t e = 0; e < seg.size(); ++e) dot[seg[e]] += G[e] * Y[e];
    Tensor& GL = tp.grad(il);
    for (std::size_t e = 0; e < seg.size(); ++e) GL[e] += Y[e] * (G[e] - dot[seg[e]]);
  });
}

Var sum(Var a) {
  double s = 0.0;
  for (double v : a.value().data()) s += v;
  const std::size_t ia = a.id;
  return a.tape->push(Tensor::scalar(s), [ia](Tape& tp, std::size_t self) {
    const double g = tp.grad(self)[0];
    Tensor& GA = tp.grad(ia);
    for (std::size_t i = 0; i < GA.size(); ++i) GA[i] += g;
  });
}

Var mean_bce(Var probabilities, std::span<const double> labels, double eps) {
  const Tensor& P = probabilities.value();
  require(P.size() == labels.size(), "mean_bce: " + std::to_string(P.size()) +
                                         " predictions vs " + std::to_string(labels.size()) +
                                         " labels");
  require(!labels.empty(), "mean_bce: empty batch");
  const double n = static_cast<double>(labels.size());
  double total = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double p = std::clamp(P[i], eps, 1.0 - eps);
    total -= labels[i] * std::log(p) + (1.0 - labels[i]) * std::log(1.0 - p);
  }
  std::vector<double> y(labels.begin(), labels.end());
  const std::size_t ip = probabilities.id;
  return probabilities.tape->push(
      Tensor::scalar(total / n), [ip, y = std::move(y), n, eps](Tape& tp, std::size_t self) {
        const double g = tp.grad(self)[0];
        const Tensor& P = tp.value(ip);
        Tensor& GP = tp.grad(ip);
        for (std::size_t i = 0; i < y.size(); ++i) {
          if (P[i] < eps || P[i] > 1.0 - eps) continue;  // clamped: flat
          GP[i] += g * (-(y[i] / P[i]) + (1.0 - y[i]) / (1.0 - P[i])) / n;
        }
      });
}

}  // namespace critscene::nn
