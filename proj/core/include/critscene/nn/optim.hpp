#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "critscene/nn/autodiff.hpp"

namespace critscene::nn {

class NonFiniteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Binary cross-entropy of one prediction; `p` is clamped to [eps, 1-eps].
double bce(double label, double p, double eps = 1e-12);
/// Arithmetic mean of bce over a batch.
double mean_bce(std::span<const double> labels, std::span<const double> probabilities,
                double eps = 1e-12);

struct AdamConfig {
  double lr = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-5;
};

struct AdamState {
  std::vector<Tensor> m;
  std::vector<Tensor> v;
  std::uint64_t step = 0;
};

/// Adam with decoupled weight decay: theta <- theta - lr*lambda*theta, then the
/// bias-corrected moment update. Gradients are zeroed after every step.
class Adam {
 public:
  explicit Adam(AdamConfig config = {}) : config_(config) {}

  void step(ParamStore& store);

  const AdamConfig& config() const { return config_; }
  AdamState& state() { return state_; }
  const AdamState& state() const { return state_; }

 private:
  void ensure_shapes(const ParamStore& store);

  AdamConfig config_;
  AdamState state_;
};

/// Clamps every gradient component to [-bound, bound]. A non-finite gradient
/// raises NonFiniteError.
void clip_gradients(ParamStore& store, double bound = 1.0);

/// Central differences (L(theta+h) - L(theta-h)) / 2h for every component of
/// every parameter. `loss` must be deterministic and read the store.
std::vector<Tensor> finite_difference_gradient(const std::function<double()>& loss,
                                               ParamStore& store, double h = 1e-5);

/// Largest |a - n| / max(|a|, |n|, floor) over all components.
double max_relative_error(const std::vector<Tensor>& analytic, const std::vector<Tensor>& numeric,
                          double floor = 1e-8);

// Checkpoint document: {"format": ..., "version": 1, "params": {name: {shape, data}},
// "adam": {...}, "meta": ...}. Loading into a store whose shapes differ is an error.
nlohmann::json params_to_json(const ParamStore& store);
void params_from_json(const nlohmann::json& doc, ParamStore& store);
nlohmann::json adam_to_json(const Adam& adam, const ParamStore& store);
void adam_from_json(const nlohmann::json& doc, Adam& adam, const ParamStore& store);

}  // namespace critscene::nn
