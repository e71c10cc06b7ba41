#include <benchmark/benchmark.h>

#include "segbias/learner.hpp"
#include "segbias/synth_corpus.hpp"

using namespace segbias;

namespace {

struct Fixture {
  Corpus corpus;
  LearnerModel model;

  explicit Fixture(int hidden) {
    GenConfig g;
    g.n_samples = 8;
    corpus = generate(g);
    Rng rng = make_stream(1, "bench/model");
    model = LearnerModel::initialize(hidden, 2, {0, 1}, rng);
  }
};

void BM_Forward(benchmark::State& state) {
  const Fixture f(static_cast<int>(state.range(0)));
  const Sample& s = f.corpus.samples[0];
  for (auto _ : state) benchmark::DoNotOptimize(forward(f.model, s.image, s.group));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(s.image.size()));
}
BENCHMARK(BM_Forward)->Arg(16)->Arg(32);

void BM_LossAndGrad(benchmark::State& state) {
  const Fixture f(16);
  const auto kind = static_cast<PenaltyKind>(state.range(0));
  std::vector<BatchItem> batch;
  for (const Sample& s : f.corpus.samples) batch.push_back({&s.image, &s.mask_obs, s.group, {}});
  LossSettings settings;
  settings.penalty = kind;
  settings.penalty_weight = kind == PenaltyKind::None ? 0.0 : 1.0;
  settings.conditioned = true;
  for (auto _ : state) benchmark::DoNotOptimize(loss_and_grad(f.model, batch, settings));
  state.SetLabel(to_string(kind));
}
BENCHMARK(BM_LossAndGrad)
    ->Arg(static_cast<int>(PenaltyKind::None))
    ->Arg(static_cast<int>(PenaltyKind::DP))
    ->Arg(static_cast<int>(PenaltyKind::Coral))
    ->Arg(static_cast<int>(PenaltyKind::MmdLogit))
    ->Arg(static_cast<int>(PenaltyKind::MmdFeature))
    ->Unit(benchmark::kMillisecond);

void BM_Featurize(benchmark::State& state) {
  const Fixture f(16);
  for (auto _ : state) benchmark::DoNotOptimize(featurize(f.corpus.samples[0].image, 2));
}
BENCHMARK(BM_Featurize);

}  // namespace

BENCHMARK_MAIN();
