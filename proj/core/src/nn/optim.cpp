#include "critscene/nn/optim.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

namespace critscene::nn {

double bce(double label, double p, double eps) {
  const double q = std::clamp(p, eps, 1.0 - eps);
  return -(label * std::log(q) + (1.0 - label) * std::log(1.0 - q));
}

double mean_bce(std::span<const double> labels, std::span<const double> probabilities,
                double eps) {
  if (labels.size() != probabilities.size()) {
    throw ShapeError("mean_bce: length mismatch");
  }
  if (labels.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) total += bce(labels[i], probabilities[i], eps);
  return total / static_cast<double>(labels.size());
}

// ---------------------------------------------------------------------- Adam

void Adam::ensure_shapes(const ParamStore& store) {
  if (state_.m.size() == store.size()) return;
  state_.m.clear();
  state_.v.clear();
  for (const auto& e : store.entries()) {
    state_.m.emplace_back(e.value.shape(), 0.0);
    state_.v.emplace_back(e.value.shape(), 0.0);
  }
}

void Adam::step(ParamStore& store) {
  ensure_shapes(store);
  ++state_.step;
  const double t = static_cast<double>(state_.step);
  const double c1 = 1.0 - std::pow(config_.beta1, t);
  const double c2 = 1.0 - std::pow(config_.beta2, t);
  for (std::size_t p = 0; p < store.size(); ++p) {
    auto& e = store.at(p);
    Tensor& m = state_.m[p];
    Tensor& v = state_.v[p];
    for (std::size_t i = 0; i < e.value.size(); ++i) {
      const double g = e.grad[i];
      e.value[i] -= config_.lr * config_.weight_decay * e.value[i];
      m[i] = config_.beta1 * m[i] + (1.0 - config_.beta1) * g;
      v[i] = config_.beta2 * v[i] + (1.0 - config_.beta2) * g * g;
      const double m_hat = m[i] / c1;
      const double v_hat = v[i] / c2;
      e.value[i] -= config_.lr * m_hat / (std::sqrt(v_hat) + config_.eps);
    }
    e.grad.fill(0.0);
  }
}

void clip_gradients(ParamStore& store, double bound) {
  for (auto& e : store.entries()) {
    for (std::size_t i = 0; i < e.grad.size(); ++i) {
      const double g = e.grad[i];
      if (!std::isfinite(g)) {
        throw NonFiniteError("non-finite gradient in parameter '" + e.name + "'");
      }
      e.grad[i] = std::clamp(g, -bound, bound);
    }
  }
}

// ------------------------------------------------------- finite differences

std::vector<Tensor> finite_difference_gradient(const std::function<double()>& loss,
                                               ParamStore& store, double h) {
  std::vector<Tensor> out;
  out.reserve(store.size());
  for (auto& e : store.entries()) {
    Tensor g(e.value.shape(), 0.0);
    for (std::size_t i = 0; i < e.value.size(); ++i) {
      const double orig = e.value[i];
      e.value[i] = orig + h;
      const double up = loss();
      e.value[i] = orig - h;
      const double down = loss();
      e.value[i] = orig;
      g[i] = (up - down) / (2.0 * h);
    }
    out.push_back(std::move(g));
  }
  return out;
}

double max_relative_error(const std::vector<Tensor>& analytic, const std::vector<Tensor>& numeric,
                          double floor) {
  if (analytic.size() != numeric.size()) throw ShapeError("max_relative_error: count mismatch");
  double worst = 0.0;
  for (std::size_t p = 0; p < analytic.size(); ++p) {
    if (!analytic[p].same_shape(numeric[p])) throw ShapeError("max_relative_error: shape mismatch");
    for (std::size_t i = 0; i < analytic[p].size(); ++i) {
      const double a = analytic[p][i], n = numeric[p][i];
      const double denom = std::max({std::abs(a), std::abs(n), floor});
      worst = std::max(worst, std::abs(a - n) / denom);
    }
  }
  return worst;
}

// --------------------------------------------------------------- checkpoint

namespace {

nlohmann::json tensor_to_json(const Tensor& t) {
  return {{"shape", t.shape()}, {"data", t.values()}};
}

Tensor tensor_from_json(const nlohmann::json& j) {
  Tensor t(j.at("shape").get<std::vector<std::size_t>>());
  const auto data = j.at("data").get<std::vector<double>>();
  if (data.size() != t.size()) throw ShapeError("checkpoint tensor: data/shape mismatch");
  std::copy(data.begin(), data.end(), t.data().begin());
  return t;
}

}  // namespace

nlohmann::json params_to_json(const ParamStore& store) {
  nlohmann::json params = nlohmann::json::object();
  for (const auto& e : store.entries()) params[e.name] = tensor_to_json(e.value);
  return params;
}

void params_from_json(const nlohmann::json& doc, ParamStore& store) {
  if (doc.size() != store.size()) {
    throw ShapeError("checkpoint holds " + std::to_string(doc.size()) + " parameters, model has " +
                     std::to_string(store.size()));
  }
  for (auto& e : store.entries()) {
    if (!doc.contains(e.name)) throw ShapeError("checkpoint is missing parameter '" + e.name + "'");
    Tensor t = tensor_from_json(doc.at(e.name));
    if (!t.same_shape(e.value)) {
      throw ShapeError("checkpoint parameter '" + e.name + "' has shape " + t.shape_string() +
                       ", model expects " + e.value.shape_string());
    }
    e.value = std::move(t);
    e.grad.fill(0.0);
  }
}

nlohmann::json adam_to_json(const Adam& adam, const ParamStore& store) {
  nlohmann::json j;
  j["step"] = adam.state().step;
  j["lr"] = adam.config().lr;
  j["beta1"] = adam.config().beta1;
  j["beta2"] = adam.config().beta2;
  j["eps"] = adam.config().eps;
  j["weight_decay"] = adam.config().weight_decay;
  nlohmann::json m = nlohmann::json::object(), v = nlohmann::json::object();
  if (adam.state().m.size() == store.size()) {
    for (std::size_t p = 0; p < store.size(); ++p) {
      m[store.at(p).name] = tensor_to_json(adam.state().m[p]);
      v[store.at(p).name] = tensor_to_json(adam.state().v[p]);
    }
  }
  j["m"] = m;
  j["v"] = v;
  return j;
}

void adam_from_json(const nlohmann::json& doc, Adam& adam, const ParamStore& store) {
  AdamState st;
  st.step = doc.at("step").get<std::uint64_t>();
  const auto& m = doc.at("m");
  const auto& v = doc.at("v");
  if (!m.empty()) {
    for (const auto& e : store.entries()) {
      Tensor tm = tensor_from_json(m.at(e.name));
      Tensor tv = tensor_from_json(v.at(e.name));
      if (!tm.same_shape(e.value) || !tv.same_shape(e.value)) {
        throw ShapeError("checkpoint optimizer state for '" + e.name + "' has the wrong shape");
      }
      st.m.push_back(std::move(tm));
      st.v.push_back(std::move(tv));
    }
  }
  adam.state() = std::move(st);
}

}  // namespace critscene::nn
