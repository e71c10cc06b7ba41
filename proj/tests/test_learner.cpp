#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "oracles.hpp"
#include "segbias/error.hpp"
#include "segbias/learner.hpp"
#include "segbias/train.hpp"

using namespace segbias;

namespace {

GrayImage random_image(Rng& rng, int w, int h) {
  GrayImage img(w, h);
  for (double& v : img.values) v = uniform01(rng);
  return img;
}

LearnerModel random_model(std::uint64_t seed, int hidden = 5, int radius = 2) {
  Rng rng = make_stream(seed, "test/model");
  LearnerModel m = LearnerModel::initialize(hidden, radius, {0, 1}, rng);
  std::vector<double> theta = m.flatten();
  for (double& v : theta) v = 0.5 * standard_normal(rng);
  m.assign(theta);
  m.level_center = 0.1;
  return m;
}

BinaryMask block_3x3_in_5x5() {
  BinaryMask m(5, 5);
  for (int y = 1; y <= 3; ++y)
    for (int x = 1; x <= 3; ++x) m(x, y) = 1;
  return m;
}

}  // namespace

TEST_SUITE("learner") {
  TEST_CASE("initialization") {
    Rng rng = make_stream(1, "test/init");
    const LearnerModel m = LearnerModel::initialize(16, 2, {0, 1}, rng);
    CHECK(m.feat_dim() == 28);
    CHECK(m.W1.rows() == 16);
    CHECK(m.W1.cols() == 28);
    CHECK(m.W1.col(27).isZero());
    for (const auto& [g, f] : m.film) {
      CHECK(f.gamma.isOnes());
      CHECK(f.beta.isZero());
    }
    CHECK(m.parameter_count() == m.flatten().size());
    CHECK(m.all_finite());
  }

  TEST_CASE("flatten and assign are inverse") {
    const LearnerModel m = random_model(3);
    LearnerModel z = m.zeros_like();
    z.assign(m.flatten());
    CHECK(z.flatten() == m.flatten());
  }

  TEST_CASE("background level is the tenth percentile") {
    GrayImage img(10, 1);
    for (int i = 0; i < 10; ++i) img.values[i] = 0.1 * (9 - i);
    CHECK(background_level(img) == doctest::Approx(0.1));
    CHECK_THROWS_AS(background_level(GrayImage()), Error);
  }

  TEST_CASE("features layout") {
    GrayImage img(4, 3, 0.25);
    img(1, 1) = 0.75;
    const Eigen::MatrixXd f = featurize(img, 1, 0.05);
    REQUIRE(f.rows() == 12);
    REQUIRE(f.cols() == 12);
    const Eigen::Index centre = 1 * 4 + 1;
    CHECK(f(4, centre) == doctest::Approx(0.5));
    CHECK(f(9, centre) == doctest::Approx(1.0 / 3.0));
    CHECK(f(10, centre) == doctest::Approx(0.5));
    CHECK(f(11, centre) == doctest::Approx(0.2));
    CHECK(f(0, 0) == doctest::Approx(0.0));
  }

  TEST_CASE("forward matches the scalar oracle") {
    Rng rng = make_stream(5, "test/fwd");
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      const LearnerModel m = random_model(seed);
      const GrayImage img = random_image(rng, 8, 8);
      for (int g = 0; g <= 1; ++g) {
        const ForwardResult r = forward(m, img, g);
        const std::vector<double> ref = oracle::forward(m, img, g);
        for (std::size_t i = 0; i < ref.size(); ++i) CHECK(std::abs(r.prob.p_fg[i] - ref[i]) < 1e-12);
      }
    }
  }

  TEST_CASE("identity modulation and group override") {
    Rng rng = make_stream(6, "test/film");
    const GrayImage img = random_image(rng, 8, 8);
    Rng init = make_stream(2, "test/film_init");
    const LearnerModel identity = LearnerModel::initialize(6, 2, {0, 1}, init);
    CHECK(forward(identity, img, 0).prob == forward(identity, img, 1).prob);

    const LearnerModel m = random_model(8);
    CHECK(forward(m, img, 1, 0).prob == forward(m, img, 0).prob);
    CHECK(predict(m, img, 0) == forward(m, img, 1, 0).prob);
    CHECK_FALSE(forward(m, img, 1).prob == forward(m, img, 0).prob);
    CHECK_THROWS_AS(forward(m, img, 5), Error);
  }

  TEST_CASE("pooled features") {
    Rng rng = make_stream(7, "test/gap");
    const LearnerModel m = random_model(9);
    const GrayImage img = random_image(rng, 6, 5);
    const ForwardResult r = forward(m, img, 0);
    const Eigen::VectorXd gap = gap_features(m, img, 0);
    for (Eigen::Index j = 0; j < gap.size(); ++j) {
      double sum = 0.0;
      for (Eigen::Index p = 0; p < r.hidden.cols(); ++p) sum += r.hidden(j, p);
      CHECK(std::abs(gap[j] - sum / static_cast<double>(r.hidden.cols())) < 1e-12);
    }
    CHECK(gap_features(m, img, 1) == gap);

    LearnerModel zero = m.zeros_like();
    zero.b1 << 0.3, -0.2, 0.0, 1.5, -4.0;
    const Eigen::VectorXd z = gap_features(zero, img, 0);
    CHECK(z == zero.b1.cwiseMax(0.0));

    const GrayImage flat(6, 5, 0.4);
    const ForwardResult rf = forward(m, flat, 0);
    const Eigen::VectorXd gf = gap_features(m, flat, 0);
    CHECK((gf - rf.hidden.rowwise().mean()).cwiseAbs().maxCoeff() < 1e-12);
  }

  TEST_CASE("segmentation loss values") {
    BinaryMask t = block_3x3_in_5x5();
    ProbMap exact{5, 5, {}};
    for (auto v : t.data) exact.p_fg.push_back(v);
    const SegLossParts perfect = seg_loss_parts(exact, t, {}, 1.0);
    CHECK(perfect.ce == doctest::Approx(0.0));
    CHECK(perfect.dice == doctest::Approx(0.0));

    ProbMap half{5, 5, std::vector<double>(25, 0.5)};
    CHECK(seg_loss_parts(half, t, {}, 1.0).ce == doctest::Approx(std::log(2.0)).epsilon(1e-12));

    Rng rng = make_stream(12, "test/loss");
    for (int trial = 0; trial < 10; ++trial) {
      ProbMap p{4, 4, {}};
      std::vector<std::uint8_t> target;
      std::vector<double> w;
      BinaryMask m(4, 4);
      for (int i = 0; i < 16; ++i) {
        p.p_fg.push_back(uniform(rng, 0.01, 0.99));
        m.data[i] = uniform01(rng) < 0.5 ? 1 : 0;
        target.push_back(m.data[i]);
        w.push_back(uniform(rng, 0.0, 2.0));
      }
      const double dw = uniform(rng, 0.0, 2.0);
      CHECK(std::abs(seg_loss(p, m, w, dw) - oracle::seg_loss(p.p_fg, target, w, dw)) < 1e-12);
    }

    std::vector<double> zeros(25, 0.0);
    try {
      seg_loss(half, t, zeros);
      FAIL("expected AllMaskedOut");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::AllMaskedOut);
    }
    CHECK_THROWS_AS(seg_loss(ProbMap{4, 4, std::vector<double>(16, 0.5)}, t, {}), Error);
  }

  TEST_CASE("asymmetric weights") {
    const BinaryMask m = block_3x3_in_5x5();
    const std::vector<double> clean = asym_weights(m, 0, 1, 1);
    CHECK(std::count(clean.begin(), clean.end(), 1.0) == 25);
    const std::vector<double> biased = asym_weights(m, 1, 1, 1);
    const BinaryMask b = boundary_band(m, 1);
    CHECK(std::count(biased.begin(), biased.end(), 0.0) == 20);
    for (std::size_t i = 0; i < b.size(); ++i) CHECK(biased[i] == (b.data[i] ? 0.0 : 1.0));
    const std::vector<double> empty = asym_weights(BinaryMask(5, 5), 1, 1, 1);
    CHECK(std::count(empty.begin(), empty.end(), 1.0) == 25);
    CHECK_THROWS_AS(asym_weights(m, 1, 1, 0), Error);
  }

  TEST_CASE("penalties vanish when the groups agree") {
    Eigen::VectorXd logits(4);
    logits << 0.3, -1.0, 2.0, 0.1;
    const Eigen::VectorXd probs = logits.unaryExpr([](double z) { return 1.0 / (1.0 + std::exp(-z)); });
    Eigen::MatrixXd hidden(3, 4);
    hidden << 0.1, 0.5, 0.0, 2.0, 1.0, 0.0, 0.3, 0.2, 0.7, 0.7, 0.1, 0.0;
    const BinaryMask labels = BinaryMask::from_values(2, 2, {1, 0, 1, 0});
    const PenaltyView views[] = {{&logits, &probs, &hidden, &labels, 0}, {&logits, &probs, &hidden, &labels, 1},
                                 {&logits, &probs, &hidden, &labels, 0}, {&logits, &probs, &hidden, &labels, 1}};
    for (PenaltyKind k : {PenaltyKind::DP, PenaltyKind::EO, PenaltyKind::DPEO, PenaltyKind::Coral,
                          PenaltyKind::MmdLogit, PenaltyKind::MmdFeature}) {
      CAPTURE(to_string(k));
      const PenaltyResult r = penalty(k, views, 1, false);
      CHECK(std::abs(r.value) < 1e-12);
      CHECK_FALSE(r.single_group);
    }
    const PenaltyView one[] = {{&logits, &probs, &hidden, &labels, 0}, {&logits, &probs, &hidden, &labels, 0}};
    const PenaltyResult r = penalty(PenaltyKind::DP, one, 1, false);
    CHECK(r.single_group);
    CHECK(r.value == 0.0);
  }

  TEST_CASE("penalties detect group differences") {
    Eigen::VectorXd l0(4), l1(4);
    l0 << 0.3, -1.0, 2.0, 0.1;
    l1 << 1.3, 0.5, 2.5, 1.1;
    auto sig = [](const Eigen::VectorXd& l) { return Eigen::VectorXd(l.unaryExpr([](double z) { return 1.0 / (1.0 + std::exp(-z)); })); };
    const Eigen::VectorXd p0 = sig(l0), p1 = sig(l1);
    Eigen::MatrixXd h0 = Eigen::MatrixXd::Ones(3, 4), h1(3, 4);
    h1 << 0.1, 2.5, 0.0, 2.0, 1.0, 0.0, 3.3, 0.2, 0.7, 1.7, 0.1, 0.0;
    const BinaryMask labels = BinaryMask::from_values(2, 2, {1, 0, 1, 0});
    const Eigen::MatrixXd h2 = 0.5 * h0, h3 = 2.0 * h1;
    const PenaltyView views[] = {{&l0, &p0, &h0, &labels, 0}, {&l1, &p1, &h1, &labels, 1},
                                 {&l0, &p0, &h2, &labels, 0}, {&l1, &p1, &h3, &labels, 1}};
    for (PenaltyKind k : {PenaltyKind::DP, PenaltyKind::EO, PenaltyKind::Coral, PenaltyKind::MmdLogit,
                          PenaltyKind::MmdFeature}) {
      CAPTURE(to_string(k));
      CHECK(penalty(k, views, 1, false).value > 1e-6);
    }
    CHECK(penalty(PenaltyKind::None, views, 1, false).value == 0.0);
  }

  TEST_CASE("analytic gradients match finite differences") {
    const auto cases = oracle::gradient_cases();
    CHECK(cases.size() >= 20);
    std::size_t coords = 0, kinks = 0;
    for (const auto& c : cases) {
      CAPTURE(c.name);
      const oracle::GradCheck g = oracle::gradient_check(c.model, c.batch(), c.settings);
      CAPTURE(g.worst_index);
      CHECK(g.max_rel_err < 1e-4);
      coords += g.n_params;
      kinks += g.kinks;
      if (g.kinks > 0) {
        const oracle::GradCheck fine = oracle::gradient_check(c.model, c.batch(), c.settings, 1e-6);
        CHECK(fine.kinks == 0);
        CHECK(fine.max_rel_err < 1e-4);
      }
    }
    CHECK(kinks * 100 <= coords);
  }

  TEST_CASE("zero penalty weight leaves the segmentation gradient") {
    const auto cases = oracle::gradient_cases();
    const oracle::GradCase& c = cases[4];
    LossSettings with = c.settings;
    with.penalty_weight = 0.0;
    LossSettings without = with;
    without.penalty = PenaltyKind::None;
    const LossAndGrad a = loss_and_grad(c.model, c.batch(), with);
    const LossAndGrad b = loss_and_grad(c.model, c.batch(), without);
    CHECK(a.loss == doctest::Approx(b.loss).epsilon(1e-14));
    const auto ga = a.grad.flatten();
    const auto gb = b.grad.flatten();
    for (std::size_t i = 0; i < ga.size(); ++i) CHECK(ga[i] == doctest::Approx(gb[i]).epsilon(1e-12));
  }

  TEST_CASE("doubling every weight changes nothing") {
    const auto cases = oracle::gradient_cases();
    oracle::GradCase c = cases[0];
    const LossAndGrad a = loss_and_grad(c.model, c.batch(), c.settings);
    for (auto& w : c.weights)
      for (double& v : w) v *= 2.0;
    const LossAndGrad b = loss_and_grad(c.model, c.batch(), c.settings);
    CHECK(a.loss == doctest::Approx(b.loss).epsilon(1e-13));
    const auto ga = a.grad.flatten();
    const auto gb = b.grad.flatten();
    for (std::size_t i = 0; i < ga.size(); ++i) CHECK(std::abs(ga[i] - gb[i]) < 1e-12);
  }

  TEST_CASE("unconditioned loss ignores FiLM") {
    const auto cases = oracle::gradient_cases();
    const oracle::GradCase& c = cases[0];
    REQUIRE_FALSE(c.settings.conditioned);
    const LossAndGrad r = loss_and_grad(c.model, c.batch(), c.settings);
    for (const auto& [g, f] : r.grad.film) {
      CHECK(f.gamma.isZero());
      CHECK(f.beta.isZero());
    }
  }

  TEST_CASE("checkpoint round trip") {
    const LearnerModel m = random_model(21);
    const auto path = std::filesystem::temp_directory_path() / "segbias_ckpt_rt.json";
    save_checkpoint(m, path);
    const LearnerModel back = load_checkpoint(path);
    CHECK(back.flatten() == m.flatten());
    CHECK(back.level_center == m.level_center);
    CHECK(back.patch_radius == m.patch_radius);

    TrainResult r;
    r.model = m;
    r.conditioned = true;
    r.inference_group = 0;
    r.discovered_clean_group = 0;
    r.low_confidence = true;
    save_train_result(r, path);
    const TrainResult rb = load_train_result(path);
    CHECK(rb.model.flatten() == m.flatten());
    CHECK(rb.conditioned);
    CHECK(rb.inference_group == std::optional<int>(0));
    CHECK(rb.discovered_clean_group == std::optional<int>(0));
    CHECK(rb.low_confidence);
    std::filesystem::remove(path);
    std::filesystem::remove(std::filesystem::path(path).replace_extension(".bin"));
  }

  TEST_CASE("penalty names") {
    for (PenaltyKind k : {PenaltyKind::None, PenaltyKind::DP, PenaltyKind::EO, PenaltyKind::DPEO, PenaltyKind::MmdLogit,
                          PenaltyKind::Coral, PenaltyKind::MmdFeature}) {
      CHECK(parse_penalty(to_string(k)) == k);
    }
    CHECK_THROWS_AS(parse_penalty("adversarial"), Error);
  }
}
