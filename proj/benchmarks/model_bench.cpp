#include <benchmark/benchmark.h>

#include "critscene/ingestion.hpp"
#include "critscene/model.hpp"

namespace {

using namespace critscene;

const std::vector<TemporalGraph>& graphs() {
  static const std::vector<TemporalGraph> g = [] {
    SynthConfig cfg;
    cfg.n_scenarios = 16;
    cfg.rng_seed = 11;
    std::vector<TemporalGraph> out;
    for (const auto& v : generate_synthetic(cfg)) {
      std::vector<FrameGraph> frames;
      for (const auto& f : v.frames) frames.push_back(build_frame_graph(f, Ontology::builtin()));
      out.push_back(build_temporal_graph(frames, Ontology::builtin()));
    }
    return out;
  }();
  return g;
}

void BM_Augment(benchmark::State& state) {
  const auto seed = prune_to_seed(graphs()[0], true);
  for (auto _ : state) benchmark::DoNotOptimize(augment(seed, Ontology::builtin()));
}
BENCHMARK(BM_Augment);

void BM_Forward(benchmark::State& state) {
  const Sample s = make_sample(graphs()[static_cast<std::size_t>(state.range(0))], Ontology::builtin());
  Model m{ModelConfig{}};
  for (auto _ : state) benchmark::DoNotOptimize(m.predict_proba(s));
  state.counters["candidates"] = static_cast<double>(s.candidates.size());
}
BENCHMARK(BM_Forward)->Arg(0)->Arg(5);

void BM_ForwardBackward(benchmark::State& state) {
  const Sample s = make_sample(graphs()[0], Ontology::builtin());
  const auto labels = sample_labels(s);
  Model m{ModelConfig{}};
  for (auto _ : state) {
    m.params().zero_grad();
    nn::Tape tape;
    tape.backward(nn::mean_bce(m.forward(tape, s), labels));
  }
}
BENCHMARK(BM_ForwardBackward);

void BM_Predict(benchmark::State& state) {
  const auto seed = prune_to_seed(graphs()[3], true);
  Model m{ModelConfig{}};
  for (auto _ : state) benchmark::DoNotOptimize(predict(m, seed, Ontology::builtin()));
}
BENCHMARK(BM_Predict);

}  // namespace
