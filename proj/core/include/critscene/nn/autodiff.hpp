#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "critscene/nn/tensor.hpp"

namespace critscene::nn {

/// Named trainable tensors with matching gradient accumulators. Iteration
/// order is insertion order.
class ParamStore {
 public:
  struct Entry {
    std::string name;
    Tensor value;
    Tensor grad;
  };

  Tensor& add(const std::string& name, Tensor value);
  bool contains(const std::string& name) const { return index_.count(name) != 0; }
  std::size_t index(const std::string& name) const;
  Entry& at(const std::string& name) { return entries_[index(name)]; }
  const Entry& at(const std::string& name) const { return entries_[index(name)]; }
  Entry& at(std::size_t i) { return entries_[i]; }
  const Entry& at(std::size_t i) const { return entries_[i]; }

  std::vector<Entry>& entries() { return entries_; }
  const std::vector<Entry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  std::size_t parameter_count() const;

  void zero_grad();

 private:
  std::vector<Entry> entries_;
  std::map<std::string, std::size_t> index_;
};

class Tape;

/// Handle to a value recorded on a tape.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  const Tensor& value() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
};

/// Records a forward computation so gradients can be propagated in reverse.
/// One tape per forward pass; parameter gradients accumulate into the
/// ParamStore entries the tape was built against.
class Tape {
 public:
  using Backward = std::function<void(Tape&, std::size_t self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  Var param(ParamStore& store, const std::string& name);
  Var push(Tensor value, Backward backward);

  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  Tensor& grad(std::size_t id);

  /// Seeds d(out)/d(out) = 1 for a [1,1] output and runs the reverse sweep.
  void backward(Var out);
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    Backward backward;
    ParamStore* store = nullptr;
    std::size_t param_index = 0;
  };
  std::vector<Node> nodes_;
};

// Primitive operations. Shapes are 2-D [rows, cols].
Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);                 // elementwise
Var add_bias(Var a, Var bias);         // bias is [1, cols], broadcast over rows
Var scale(Var a, double factor);
Var one_minus(Var a);
Var relu(Var a);
Var leaky_relu(Var a, double slope);
Var sigmoid(Var a);
Var tanh(Var a);
Var gather_rows(Var a, std::span<const std::size_t> rows);
Var scatter_add_rows(Var a, std::span<const std::size_t> rows, std::size_t n_out);
Var scale_rows(Var a, std::span<const double> weights);  // constant per-row weights
Var mul_rows(Var a, Var weights);                       // weights is [rows, 1]
Var concat_cols(std::span<const Var> parts);
Var concat_rows(std::span<const Var> parts);
/// Softmax of a [E,1] column within segments given by `segment` ids in [0,n).
Var segment_softmax(Var logits, std::span<const std::size_t> segment, std::size_t n);
Var sum(Var a);
/// Mean binary cross-entropy of probabilities [E,1] against {0,1} labels,
/// with predictions clamped to [eps, 1-eps].
Var mean_bce(Var probabilities, std::span<const double> labels, double eps = 1e-12);

}  // namespace critscene::nn
