#include <cmath>

#include "doctest.h"
#include "oracles.hpp"
#include "segbias/bias_injection.hpp"
#include "segbias/error.hpp"
#include "segbias/evaluation.hpp"

using namespace segbias;

namespace {

Corpus corpus(double beta) {
  GenConfig g;
  g.n_samples = 12;
  g.width = 24;
  g.height = 24;
  BiasSpec b;
  b.beta = beta;
  return inject(generate(g), b).corpus;
}

}  // namespace

TEST_SUITE("evaluation") {
  TEST_CASE("dice and iou by hand") {
    const BinaryMask a = BinaryMask::from_values(3, 1, {1, 1, 0});
    const BinaryMask b = BinaryMask::from_values(3, 1, {1, 0, 0});
    CHECK(dice(a, b) == doctest::Approx(2.0 / 3.0));
    CHECK(iou(a, b) == doctest::Approx(0.5));
    CHECK(dice(a, a) == 1.0);
    CHECK(iou(a, a) == 1.0);
    const BinaryMask c = BinaryMask::from_values(3, 1, {0, 0, 1});
    CHECK(dice(a, c) == 0.0);
    CHECK(iou(a, c) == 0.0);
    CHECK(dice(BinaryMask(3, 1), BinaryMask(3, 1)) == 1.0);
    CHECK(iou(BinaryMask(3, 1), BinaryMask(3, 1)) == 1.0);
    CHECK_THROWS_AS(dice(a, BinaryMask(2, 2)), Error);
  }

  TEST_CASE("dice dominates iou") {
    Rng rng = make_stream(1, "test/dice_iou");
    for (int t = 0; t < 100; ++t) {
      BinaryMask a(8, 8), b(8, 8);
      for (auto& v : a.data) v = uniform01(rng) < 0.5;
      for (auto& v : b.data) v = uniform01(rng) < 0.5;
      const double d = dice(a, b);
      const double j = iou(a, b);
      CHECK(d >= j);
      CHECK(d == doctest::Approx(2.0 * j / (1.0 + j)).epsilon(1e-12));
    }
  }

  TEST_CASE("equal-count erosion hurts more than dilation") {
    Rng rng = make_stream(12, "test/asym");
    for (int t = 0; t < 100; ++t) {
      const oracle::CorruptionPair p = oracle::equal_count_corruption(rng);
      REQUIRE(p.clean.count() - p.eroded.count() == p.dilated.count() - p.clean.count());
      CHECK(dice(p.clean, p.eroded) < dice(p.clean, p.dilated));
    }
  }

  TEST_CASE("observed masks as predictions score perfectly") {
    const Corpus c = corpus(1.0);
    std::vector<BinaryMask> pred;
    for (const Sample& s : c.samples) pred.push_back(s.mask_obs);
    const EvalReport r = evaluate_masks(c, pred, Reference::Observed);
    CHECK(r.dice[0].mean == 100.0);
    CHECK(r.dice[1].mean == 100.0);
    CHECK(r.delta_dice() == 0.0);
    CHECK(r.delta_iou() == 0.0);

    const EvalReport clean = evaluate_masks(c, pred, Reference::Clean);
    CHECK(clean.dice[0].mean == 100.0);
    CHECK(clean.dice[1].mean < 100.0);
    CHECK(clean.delta_dice() > 0.0);
  }

  TEST_CASE("clean reference needs the clean masks") {
    Corpus c = corpus(1.0);
    for (Sample& s : c.samples)
      if (s.corrupted) s.set_clean(std::nullopt);
    std::vector<BinaryMask> pred;
    for (const Sample& s : c.samples) pred.push_back(s.mask_obs);
    try {
      evaluate_masks(c, pred, Reference::Clean);
      FAIL("expected MissingCleanMask");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::MissingCleanMask);
    }
  }

  TEST_CASE("mean and spread") {
    const std::vector<double> v = {1.0, 2.0, 3.0, 4.0};
    const MeanStd m = mean_std(v);
    CHECK(m.mean == 2.5);
    CHECK(m.std == doctest::Approx(std::sqrt(5.0 / 3.0)));
    CHECK(m.n == 4);
    const std::vector<double> one = {7.0};
    CHECK(mean_std(one).std == 0.0);
  }

  TEST_CASE("aggregation across seeds") {
    EvalReport a, b;
    a.dice = {MeanStd{90.0, 1.0, 10}, MeanStd{80.0, 1.0, 10}};
    b.dice = {MeanStd{94.0, 1.0, 10}, MeanStd{70.0, 1.0, 10}};
    a.iou = b.iou = {MeanStd{50.0, 0.0, 10}, MeanStd{50.0, 0.0, 10}};
    const std::vector<EvalReport> runs = {a, b};
    const EvalReport agg = aggregate(runs);
    CHECK(agg.n_seeds == 2);
    CHECK(agg.dice[0].mean == 92.0);
    CHECK(agg.dice[1].mean == 75.0);
    CHECK(agg.dice[0].std == doctest::Approx(std::sqrt(8.0)));
    CHECK(agg.delta_dice() == 17.0);
  }

  TEST_CASE("reference names") {
    CHECK(parse_reference("clean") == Reference::Clean);
    CHECK(parse_reference(to_string(Reference::Observed)) == Reference::Observed);
    CHECK_THROWS_AS(parse_reference("truth"), Error);
  }
}
