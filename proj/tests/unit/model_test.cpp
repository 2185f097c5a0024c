#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "critscene/model.hpp"
#include "fixtures.hpp"

namespace critscene {
namespace {

const Ontology& ont() { return Ontology::builtin(); }

TEST(ModelConfig, DefaultsFollowPublishedDimensions) {
  const ModelConfig c;
  EXPECT_EQ(c.mlp_n, (std::vector<std::size_t>{22, 8, 1}));
  EXPECT_EQ(c.mlp_e, (std::vector<std::size_t>{27, 8, 1}));
  EXPECT_EQ(c.mlp_tr, (std::vector<std::size_t>{3, 16, 1}));
  EXPECT_EQ(c.mlp_gat, (std::vector<std::size_t>{64, 128, 256}));
  EXPECT_EQ(c.gat1_in, 1u);
  EXPECT_EQ(c.gat1_out, 64u);
  EXPECT_EQ(c.gat2_in, 256u);
  EXPECT_EQ(c.gat2_out, 1u);
  EXPECT_EQ(c.gcn_width, 1u);
  EXPECT_EQ(c.pe_length, 2u);
  EXPECT_DOUBLE_EQ(c.adam.lr, 0.01);
  EXPECT_DOUBLE_EQ(c.adam.weight_decay, 1e-5);
  EXPECT_DOUBLE_EQ(c.clip, 1.0);
  EXPECT_NO_THROW(c.validate());
}

TEST(ModelConfig, ValidateRejectsBrokenChains) {
  ModelConfig c;
  c.mlp_gat = {32, 128, 256};  // must start at gat1_out
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = ModelConfig{};
  c.mlp_n = {21, 8, 1};
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = ModelConfig{};
  c.threshold = 1.5;
  EXPECT_THROW(c.validate(), std::invalid_argument);
}

TEST(ModelConfig, JsonRoundTrip) {
  ModelConfig c;
  c.variant = TripletEncoder::GruGcn;
  c.gcn_scope = GcnScope::AllCandidates;
  c.epochs = 7;
  c.adam.lr = 0.003;
  const auto j = config_to_json(c);
  EXPECT_EQ(config_to_json(config_from_json(j)), j);
}

TEST(ModelConfig, VariantNames) {
  for (auto v : {TripletEncoder::MlpGcn, TripletEncoder::GruGcn, TripletEncoder::Gat,
                 TripletEncoder::Gru, TripletEncoder::NonTemporalMlp}) {
    EXPECT_EQ(triplet_encoder_from_string(to_string(v)), v);
  }
  EXPECT_EQ(triplet_encoder_from_string("gru-gcn"), TripletEncoder::GruGcn);
  EXPECT_FALSE(triplet_encoder_from_string("transformer"));
}

TEST(Model, ForwardGivesOneProbabilityPerCandidate) {
  const Sample s = make_sample(testing::tiny_scenario(), ont());
  for (auto v : {TripletEncoder::MlpGcn, TripletEncoder::GruGcn, TripletEncoder::Gat,
                 TripletEncoder::Gru, TripletEncoder::NonTemporalMlp}) {
    ModelConfig c;
    c.variant = v;
    Model m(c);
    const auto p = m.predict_proba(s);
    ASSERT_EQ(p.size(), s.candidates.size()) << to_string(v);
    for (double x : p) {
      EXPECT_GT(x, 0.0);
      EXPECT_LT(x, 1.0);
    }
    EXPECT_EQ(m.predict_proba(s), p);
  }
}

TEST(Model, InitialisationIsSeeded) {
  ModelConfig c;
  Model a(c), b(c);
  c.rng_seed = 2;
  Model other(c);
  EXPECT_EQ(a.params().at(0).value.values(), b.params().at(0).value.values());
  EXPECT_NE(a.params().at(0).value.values(), other.params().at(0).value.values());
}

TEST(Model, FullPipelineGradientCheck) {
  const Sample s = make_sample(testing::tiny_scenario(), ont());
  const auto labels = sample_labels(s);
  ModelConfig c;
  c.mlp_gat = {64, 8, 16};  // narrow stack keeps the finite-difference sweep short
  c.gat2_in = 16;
  Model m(c);
  auto& store = m.params();
  // Zero-initialised biases put ReLUs exactly on their kink, where central
  // differences average the two one-sided slopes.
  Rng rng(99);
  for (auto& e : store.entries()) {
    for (std::size_t i = 0; i < e.value.size(); ++i) e.value[i] += rng.uniform(-0.1, 0.1);
  }
  store.zero_grad();
  {
    nn::Tape tape;
    tape.backward(nn::mean_bce(m.forward(tape, s), labels));
  }
  std::vector<nn::Tensor> analytic;
  for (const auto& e : store.entries()) analytic.push_back(e.grad);
  const auto numeric = nn::finite_difference_gradient(
      [&] {
        nn::Tape tape;
        return nn::mean_bce(m.forward(tape, s), labels).value()[0];
      },
      store, 1e-5);
  EXPECT_LT(nn::max_relative_error(analytic, numeric, 1e-6), 1e-4);
}

TEST(Model, LossDelegatesToBce) {
  const double p[] = {0.5, 0.25};
  const double y[] = {1.0, 0.0};
  EXPECT_NEAR(loss(p, y), (std::log(2.0) - std::log(0.75)) / 2.0, 1e-12);
}

TEST(Model, SelectCandidatesEnforcesExclusion) {
  const auto g = prune_to_seed(testing::tiny_scenario(), true);
  auto aug = augment(g, ont());
  // Pedestrian (uid 1) proximity at tau 0: Near 0.7, Visible 0.9, NC 0.6.
  for (auto& c : aug.candidates) {
    c.probability = 0.1;
    if (c.dst == 1 && c.tau == 0) {
      if (c.relation == Relation::Near) c.probability = 0.7;
      if (c.relation == Relation::Visible) c.probability = 0.9;
      if (c.relation == Relation::NearCollision) c.probability = 0.6;
      if (c.relation == Relation::MovingTowards) c.probability = 0.4;
    }
    if (c.relation == Relation::IsIn && c.tau == 0) c.probability = c.dst == 3 ? 0.8 : 0.95;
  }
  const auto keep = select_candidates(aug.candidates, aug.graph, ont(), 0.5);
  std::multiset<std::pair<int, Relation>> chosen;
  for (std::size_t i : keep) chosen.insert({aug.candidates[i].dst, aug.candidates[i].relation});
  EXPECT_EQ(chosen, (std::multiset<std::pair<int, Relation>>{{1, Relation::Visible}, {4, Relation::IsIn}}));
  EXPECT_TRUE(select_candidates(aug.candidates, aug.graph, ont(), 0.99).empty());
}

TEST(Model, SelectCandidatesBreaksTiesTowardFirst) {
  const auto g = prune_to_seed(testing::tiny_scenario(), true);
  auto aug = augment(g, ont());
  for (auto& c : aug.candidates) c.probability = 0.8;
  const auto keep = select_candidates(aug.candidates, aug.graph, ont(), 0.5);
  std::map<std::tuple<int, int, std::size_t>, Relation> first;
  for (const auto& c : aug.candidates) {
    const auto grp = ont().exclusion_group_of(c.relation);
    if (grp) first.try_emplace({c.dst, c.tau, *grp}, c.relation);
  }
  for (std::size_t i : keep) {
    const auto& c = aug.candidates[i];
    if (const auto grp = ont().exclusion_group_of(c.relation)) {
      EXPECT_EQ(first.at({c.dst, c.tau, *grp}), c.relation);
    }
  }
}

TEST(Model, PredictOutputIsValidAndKeepsSeed) {
  const auto seed = prune_to_seed(testing::tiny_scenario(), true);
  Model m{ModelConfig{}};
  const Prediction p = predict(m, seed, ont());
  EXPECT_NO_THROW(validate(p.graph, ont()));
  for (const auto& e : seed.edges) {
    EXPECT_NE(std::find(p.graph.edges.begin(), p.graph.edges.end(), e), p.graph.edges.end());
  }
  EXPECT_EQ(p.candidates.size(), augment(seed, ont()).candidates.size());
}

TEST(Model, TrainingReducesLossAndIsDeterministic) {
  std::vector<Sample> set;
  for (const auto& g : testing::synthetic_graphs(12, 5)) set.push_back(make_sample(g, ont()));
  ModelConfig c;
  c.epochs = 6;
  Model a(c), b(c);
  std::ostringstream log;
  const TrainResult ra = train(a, set, {}, &log);
  const TrainResult rb = train(b, set, {}, nullptr);
  ASSERT_EQ(ra.history.size(), 6u);
  EXPECT_LT(ra.history.back().train_loss, ra.history.front().train_loss);
  EXPECT_EQ(ra.history.back().train_loss, rb.history.back().train_loss);
  EXPECT_EQ(a.params().at(0).value.values(), b.params().at(0).value.values());
  EXPECT_NE(log.str().find("epoch    1  loss "), std::string::npos);

  std::ostringstream csv;
  write_history_csv(csv, ra.history);
  EXPECT_EQ(csv.str().rfind("epoch,train_loss,val_f1\n", 0), 0u);
}

TEST(Model, ZeroEpochsKeepsInitialWeights) {
  std::vector<Sample> set = {make_sample(testing::tiny_scenario(), ont())};
  ModelConfig c;
  c.epochs = 0;
  Model m(c), fresh(c);
  const TrainResult r = train(m, set, set, nullptr);
  EXPECT_TRUE(r.history.empty());
  EXPECT_EQ(m.params().at(2).value.values(), fresh.params().at(2).value.values());
}

TEST(Model, BestValidationEpochIsRestored) {
  std::vector<Sample> set;
  for (const auto& g : testing::synthetic_graphs(8, 9)) set.push_back(make_sample(g, ont()));
  ModelConfig c;
  c.epochs = 5;
  Model m(c);
  const TrainResult r = train(m, set, set, nullptr);
  double best = -1.0;
  int best_epoch = 0;
  for (const auto& h : r.history) {
    if (h.val_f1 > best) {
      best = h.val_f1;
      best_epoch = h.epoch;
    }
  }
  EXPECT_EQ(r.best_epoch, best_epoch);
  EXPECT_NEAR(evaluate_classification(m, set).f1, best, 1e-12);
}

TEST(Model, CheckpointRoundTrip) {
  const auto path = std::filesystem::temp_directory_path() / "critscene_ckpt_test.json";
  ModelConfig c;
  c.variant = TripletEncoder::Gat;
  c.rng_seed = 4;
  Model m(c);
  save_checkpoint(path.string(), m);
  Model back = load_checkpoint(path.string());
  EXPECT_EQ(config_to_json(back.config()), config_to_json(m.config()));
  const Sample s = make_sample(testing::tiny_scenario(), ont());
  EXPECT_EQ(back.predict_proba(s), m.predict_proba(s));

  std::ofstream(path) << "{\"format\": \"something-else\"}";
  EXPECT_THROW(load_checkpoint(path.string()), std::runtime_error);
  std::filesystem::remove(path);
}

}  // namespace
}  // namespace critscene
