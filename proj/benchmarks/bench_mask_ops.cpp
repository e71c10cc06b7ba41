#include <benchmark/benchmark.h>

#include "segbias/mask_ops.hpp"

using namespace segbias;

namespace {

BinaryMask disk(int side) {
  BinaryMask m(side, side);
  const double c = (side - 1) / 2.0;
  const double r = side / 3.0;
  for (int y = 0; y < side; ++y)
    for (int x = 0; x < side; ++x) m(x, y) = (x - c) * (x - c) + (y - c) * (y - c) <= r * r;
  return m;
}

void BM_Erode(benchmark::State& state) {
  const BinaryMask m = disk(static_cast<int>(state.range(0)));
  const int r = static_cast<int>(state.range(1));
  for (auto _ : state) benchmark::DoNotOptimize(erode(m, r));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(m.size()));
}
BENCHMARK(BM_Erode)->Args({64, 1})->Args({64, 3})->Args({256, 3})->Args({256, 8});

void BM_Dilate(benchmark::State& state) {
  const BinaryMask m = disk(static_cast<int>(state.range(0)));
  const int r = static_cast<int>(state.range(1));
  for (auto _ : state) benchmark::DoNotOptimize(dilate(m, r));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(m.size()));
}
BENCHMARK(BM_Dilate)->Args({64, 3})->Args({256, 8});

void BM_BoundaryBand(benchmark::State& state) {
  const BinaryMask m = disk(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(boundary_band(m, 2));
}
BENCHMARK(BM_BoundaryBand)->Arg(64)->Arg(256);

void BM_SignedDistance(benchmark::State& state) {
  const BinaryMask m = disk(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(signed_distance(m));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(m.size()));
}
BENCHMARK(BM_SignedDistance)->Arg(64)->Arg(256);

void BM_HarmonicDeform(benchmark::State& state) {
  const BinaryMask m = disk(64);
  Rng rng = make_stream(1, "bench/hbd");
  const auto h = draw_harmonics(3, rng);
  for (auto _ : state) benchmark::DoNotOptimize(harmonic_deform(m, 3.0, h));
}
BENCHMARK(BM_HarmonicDeform);

}  // namespace

BENCHMARK_MAIN();
