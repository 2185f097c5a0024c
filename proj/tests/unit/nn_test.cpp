#include <gtest/gtest.h>

#include <cmath>
#include <functional>

#include <nlohmann/json.hpp>

#include "critscene/nn/layers.hpp"
#include "critscene/nn/optim.hpp"

namespace critscene::nn {
namespace {

Tensor random_tensor(Rng& rng, std::size_t r, std::size_t c, double scale = 1.0) {
  Tensor t(r, c);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-scale, scale);
  return t;
}

std::vector<Tensor> analytic_gradient(ParamStore& store, const std::function<Var(Tape&)>& build) {
  store.zero_grad();
  Tape tape;
  tape.backward(build(tape));
  std::vector<Tensor> out;
  for (const auto& e : store.entries()) out.push_back(e.grad);
  return out;
}

double gradient_error(ParamStore& store, const std::function<Var(Tape&)>& build) {
  const auto analytic = analytic_gradient(store, build);
  const auto numeric = finite_difference_gradient(
      [&] {
        Tape tape;
        return build(tape).value()[0];
      },
      store, 1e-5);
  return max_relative_error(analytic, numeric);
}

TEST(Tensor, ShapesAndAccess) {
  Tensor t(2, 3, 1.5);
  EXPECT_EQ(t.rows(), 2u);
  EXPECT_EQ(t.cols(), 3u);
  EXPECT_EQ(t.shape_string(), "[2,3]");
  t(1, 2) = 4.0;
  EXPECT_EQ(t[5], 4.0);
  EXPECT_TRUE(t.all_finite());
  t[0] = std::nan("");
  EXPECT_FALSE(t.all_finite());
  EXPECT_EQ(Tensor(std::vector<std::size_t>{2, 3, 4}).cols(), 12u);
  EXPECT_EQ(Tensor(0, 5).cols(), 5u);
  EXPECT_THROW(Tensor::from_rows(2, 2, {1, 2, 3}), ShapeError);
}

TEST(Autodiff, ForwardValues) {
  Tape tape;
  Var a = tape.constant(Tensor::from_rows(2, 2, {1, 2, 3, 4}));
  Var b = tape.constant(Tensor::from_rows(2, 1, {1, -1}));
  EXPECT_EQ(matmul(a, b).value().values(), (std::vector<double>{-1, -1}));
  EXPECT_EQ(relu(scale(a, -1.0)).value().values(), (std::vector<double>{0, 0, 0, 0}));
  EXPECT_EQ(leaky_relu(b, 0.5).value().values(), (std::vector<double>{1, -0.5}));
  EXPECT_DOUBLE_EQ(sigmoid(tape.constant(Tensor::scalar(0.0))).value()[0], 0.5);
  EXPECT_DOUBLE_EQ(sum(a).value()[0], 10.0);

  const std::size_t rows[] = {1, 1, 0};
  EXPECT_EQ(gather_rows(a, rows).value().values(), (std::vector<double>{3, 4, 3, 4, 1, 2}));
  const std::size_t to[] = {2, 0};
  EXPECT_EQ(scatter_add_rows(a, to, 3).value().values(), (std::vector<double>{3, 4, 0, 0, 1, 2}));
  const Var parts[] = {a, b};
  EXPECT_EQ(concat_cols(parts).value().values(), (std::vector<double>{1, 2, 1, 3, 4, -1}));
  EXPECT_THROW(matmul(b, b), ShapeError);
  EXPECT_THROW(add(a, b), ShapeError);
}

TEST(Autodiff, SegmentSoftmaxNormalisesPerSegment) {
  Tape tape;
  Var logits = tape.constant(Tensor::from_rows(5, 1, {0.3, -1.0, 2.0, 0.0, 5.0}));
  const std::size_t seg[] = {0, 1, 0, 1, 2};
  const Tensor p = segment_softmax(logits, seg, 3).value();
  EXPECT_NEAR(p[0] + p[2], 1.0, 1e-15);
  EXPECT_NEAR(p[1] + p[3], 1.0, 1e-15);
  EXPECT_DOUBLE_EQ(p[4], 1.0);
  EXPECT_NEAR(p[2] / p[0], std::exp(1.7), 1e-12);
}

TEST(Autodiff, GradientAccumulatesAcrossUses) {
  ParamStore store;
  store.add("w", Tensor::scalar(3.0));
  Tape tape;
  Var w = tape.param(store, "w");
  tape.backward(mul(w, w));  // d(w^2)/dw = 6
  EXPECT_DOUBLE_EQ(store.at("w").grad[0], 6.0);
}

TEST(Loss, MeanBceHandValues) {
  const double half[] = {0.5, 0.5};
  const double y10[] = {1.0, 0.0};
  EXPECT_NEAR(mean_bce(y10, half), std::log(2.0), 1e-12);
  const double p[] = {0.9, 0.2};
  EXPECT_NEAR(mean_bce(y10, p), -(std::log(0.9) + std::log(0.8)) / 2.0, 1e-12);
  EXPECT_NEAR(bce(1.0, 0.25), std::log(4.0), 1e-12);
  // Clamping keeps saturated predictions finite.
  EXPECT_TRUE(std::isfinite(bce(1.0, 0.0)));
  EXPECT_NEAR(bce(1.0, 0.0), -std::log(1e-12), 1e-9);

  Tape tape;
  Var probs = tape.constant(Tensor::from_rows(2, 1, {0.5, 0.5}));
  EXPECT_NEAR(mean_bce(probs, y10).value()[0], std::log(2.0), 1e-12);
}

TEST(Layers, XavierBounds) {
  Rng rng(1);
  const Tensor w = xavier_init(rng, 10, 30);
  const double bound = std::sqrt(6.0 / 40.0);
  for (double v : w.values()) {
    EXPECT_LE(std::abs(v), bound);
  }
  EXPECT_EQ(xavier_init(7, 3, 4).values(), xavier_init(7, 3, 4).values());
}

TEST(GradientCheck, Mlp) {
  Rng rng(3);
  ParamStore store;
  const std::size_t dims[] = {5, 7, 3};
  init_mlp(store, "mlp", dims, rng);
  const Tensor x = random_tensor(rng, 4, 5);
  const double err = gradient_error(store, [&](Tape& t) {
    return sum(sigmoid(mlp_forward(t, store, "mlp", t.constant(x), dims)));
  });
  EXPECT_LT(err, 1e-6);
}

TEST(GradientCheck, Gat) {
  Rng rng(5);
  for (const GatOptions opts : {GatOptions{}, GatOptions{false, true, 0.2}, GatOptions{true, false, 0.1}}) {
    ParamStore store;
    init_gat(store, "gat", 3, 4, rng);
    const Tensor h = random_tensor(rng, 5, 3);
    const Tensor e = random_tensor(rng, 6, 1);
    EdgeList edges;
    for (auto [s, d] : {std::pair{0, 1}, {1, 0}, {2, 1}, {3, 4}, {4, 2}, {1, 3}}) edges.add(s, d);
    const double err = gradient_error(store, [&](Tape& t) {
      return sum(tanh(gat_forward(t, store, "gat", t.constant(h), t.constant(e), edges, 3, 4, opts)));
    });
    EXPECT_LT(err, 1e-6);
  }
}

TEST(GradientCheck, Gcn) {
  Rng rng(7);
  ParamStore store;
  init_gcn(store, "gcn", 2, rng);
  const Tensor h = random_tensor(rng, 4, 2);
  EdgeList edges;
  edges.add(0, 1);
  edges.add(0, 2);
  edges.add(2, 3);
  const double err = gradient_error(store, [&](Tape& t) {
    return sum(sigmoid(gcn_forward(t, store, "gcn", t.constant(h), edges)));
  });
  EXPECT_LT(err, 1e-6);
}

TEST(GradientCheck, Gru) {
  Rng rng(9);
  ParamStore store;
  init_gru(store, "gru", 3, 4, rng);
  const Tensor x = random_tensor(rng, 2, 3);
  const Tensor h = random_tensor(rng, 2, 4, 0.5);
  const double err = gradient_error(store, [&](Tape& t) {
    Var h1 = gru_cell(t, store, "gru", t.constant(x), t.constant(h));
    return sum(gru_cell(t, store, "gru", t.constant(x), h1));
  });
  EXPECT_LT(err, 1e-6);
}

TEST(GradientCheck, BceThroughSigmoid) {
  Rng rng(11);
  ParamStore store;
  store.add("w", random_tensor(rng, 3, 1));
  const Tensor x = random_tensor(rng, 6, 3);
  const double labels[] = {1, 0, 0, 1, 1, 0};
  const double err = gradient_error(store, [&](Tape& t) {
    return mean_bce(sigmoid(matmul(t.constant(x), t.param(store, "w"))), labels);
  });
  EXPECT_LT(err, 1e-6);
}

TEST(Adam, SingleStepMatchesFormula) {
  ParamStore store;
  store.add("w", Tensor::from_rows(1, 2, {1.0, -2.0}));
  store.at("w").grad = Tensor::from_rows(1, 2, {0.5, -0.1});
  AdamConfig cfg;
  Adam adam(cfg);
  adam.step(store);
  for (int i = 0; i < 2; ++i) {
    const double theta = i == 0 ? 1.0 : -2.0;
    const double g = i == 0 ? 0.5 : -0.1;
    const double m_hat = (1 - cfg.beta1) * g / (1 - cfg.beta1);
    const double v_hat = (1 - cfg.beta2) * g * g / (1 - cfg.beta2);
    const double expected =
        theta - cfg.lr * cfg.weight_decay * theta - cfg.lr * m_hat / (std::sqrt(v_hat) + cfg.eps);
    EXPECT_NEAR(store.at("w").value[i], expected, 1e-15);
  }
  EXPECT_EQ(store.at("w").grad[0], 0.0);
  EXPECT_EQ(adam.state().step, 1u);
}

TEST(Adam, MinimisesQuadratic) {
  ParamStore store;
  store.add("w", Tensor::scalar(5.0));
  Adam adam(AdamConfig{0.1, 0.9, 0.999, 1e-8, 0.0});
  for (int i = 0; i < 500; ++i) {
    Tape t;
    Var w = t.param(store, "w");
    t.backward(mul(w, w));
    adam.step(store);
  }
  EXPECT_NEAR(store.at("w").value[0], 0.0, 1e-2);
}

TEST(Clip, ClampsAndRejectsNonFinite) {
  ParamStore store;
  store.add("w", Tensor(1, 3));
  store.at("w").grad = Tensor::from_rows(1, 3, {2.5, -0.3, -7.0});
  clip_gradients(store, 1.0);
  EXPECT_EQ(store.at("w").grad.values(), (std::vector<double>{1.0, -0.3, -1.0}));
  store.at("w").grad[1] = std::numeric_limits<double>::infinity();
  EXPECT_THROW(clip_gradients(store, 1.0), NonFiniteError);
}

TEST(Serialization, ParamsAndAdamRoundTrip) {
  Rng rng(2);
  ParamStore store;
  const std::size_t dims[] = {3, 2};
  init_mlp(store, "m", dims, rng);
  Adam adam;
  for (auto& e : store.entries()) e.grad.fill(0.1);
  adam.step(store);

  ParamStore other;
  Rng rng2(99);
  init_mlp(other, "m", dims, rng2);
  params_from_json(params_to_json(store), other);
  for (std::size_t i = 0; i < store.size(); ++i) {
    EXPECT_EQ(other.at(i).value.values(), store.at(i).value.values());
  }
  Adam adam2;
  adam_from_json(adam_to_json(adam, store), adam2, other);
  EXPECT_EQ(adam2.state().step, 1u);
  EXPECT_EQ(adam2.state().m[0].values(), adam.state().m[0].values());

  ParamStore wrong;
  const std::size_t dims2[] = {4, 2};
  init_mlp(wrong, "m", dims2, rng);
  EXPECT_THROW(params_from_json(params_to_json(store), wrong), std::exception);
}

}  // namespace
}  // namespace critscene::nn
