#include <cmath>

#include "doctest.h"
#include "segbias/error.hpp"
#include "segbias/tone_grouping.hpp"

using namespace segbias;

TEST_SUITE("tone_grouping") {
  TEST_CASE("reference colours") {
    const LabColor white = rgb_to_lab(255, 255, 255);
    CHECK(std::abs(white.L - 100.0) < 1e-9);
    CHECK(std::abs(white.a) < 0.01);
    CHECK(std::abs(white.b) < 0.01);
    CHECK(rgb_to_lab(0, 0, 0).L == doctest::Approx(0.0));
    // sRGB 128 gray is L* 53.585 in standard colour calculators
    CHECK(std::abs(rgb_to_lab(128, 128, 128).L - 53.585) < 0.1);
    const LabColor red = rgb_to_lab(255, 0, 0);
    CHECK(red.L == doctest::Approx(53.24).epsilon(1e-3));
    CHECK(red.a == doctest::Approx(80.09).epsilon(1e-3));
    CHECK(red.b == doctest::Approx(67.20).epsilon(1e-3));
  }

  TEST_CASE("typology angle") {
    CHECK(ita({70.0, 0.0, 10.0}) == doctest::Approx(63.4349).epsilon(1e-5));
    CHECK(classify(ita({70.0, 0.0, 10.0})) == ToneGroup::ST1_VeryLight);
    CHECK(ita({60.0, 0.0, 20.0}) == doctest::Approx(26.5651).epsilon(1e-5));
    CHECK(classify(ita({60.0, 0.0, 20.0})) == ToneGroup::ST4_Tan);
    CHECK(ita({50.0, 0.0, 15.0}) == 0.0);
    CHECK(classify(ita({50.0, 0.0, 15.0})) == ToneGroup::OutOfRange);
    try {
      ita({50.0, 3.0, 0.0});
      FAIL("expected UndefinedITA");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::UndefinedITA);
    }
  }

  TEST_CASE("breakpoints") {
    CHECK(classify(55.0) == ToneGroup::ST2_Light);
    CHECK(classify(std::nextafter(55.0, 100.0)) == ToneGroup::ST1_VeryLight);
    CHECK(classify(41.0) == ToneGroup::ST3_Intermediate);
    CHECK(classify(std::nextafter(41.0, 100.0)) == ToneGroup::ST2_Light);
    CHECK(classify(28.0) == ToneGroup::ST4_Tan);
    CHECK(classify(std::nextafter(28.0, 100.0)) == ToneGroup::ST3_Intermediate);
    CHECK(classify(10.0) == ToneGroup::OutOfRange);
    CHECK(classify(std::nextafter(10.0, 100.0)) == ToneGroup::ST4_Tan);
    CHECK(classify(90.0) == ToneGroup::ST1_VeryLight);
    CHECK(classify(90.5) == ToneGroup::OutOfRange);
    CHECK(classify(-30.0) == ToneGroup::OutOfRange);

    ToneGroup prev = ToneGroup::OutOfRange;
    int changes = 0;
    for (double v = 0.0; v <= 90.0; v += 0.25) {
      const ToneGroup g = classify(v);
      if (g != prev) ++changes;
      prev = g;
    }
    CHECK(changes == 4);
  }

  TEST_CASE("dominant colour") {
    const std::vector<LabColor> flat(50, LabColor{60.0, 10.0, 20.0});
    const DominantColor d = dominant_color(flat, 2, 4, 1);
    CHECK(d.color.L == doctest::Approx(60.0));
    CHECK(d.color.b == doctest::Approx(20.0));

    std::vector<LabColor> mix;
    for (int i = 0; i < 90; ++i) mix.push_back({70.0 + 0.01 * (i % 5), 5.0, 15.0});
    for (int i = 0; i < 10; ++i) mix.push_back({20.0, 40.0, -30.0});
    const DominantColor m = dominant_color(mix, 2, 2, 1);
    CHECK(m.k == 2);
    CHECK(m.color.L == doctest::Approx(70.02).epsilon(1e-3));
    CHECK(m.color.a == doctest::Approx(5.0));

    const DominantColor again = dominant_color(mix, 2, 6, 3);
    CHECK(again.color == dominant_color(mix, 2, 6, 3).color);

    std::vector<LabColor> reversed(mix.rbegin(), mix.rend());
    CHECK(kmeans_lab(reversed, 3, 1).centroids == kmeans_lab(mix, 3, 1).centroids);

    try {
      dominant_color(std::vector<LabColor>(3, LabColor{}), 2, 6, 1);
      FAIL("expected TooFewPixels");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::TooFewPixels);
    }
  }

  TEST_CASE("tone of an image") {
    RgbImage img;
    img.width = 10;
    img.height = 10;
    for (int i = 0; i < 100; ++i) {
      const bool lesion = i % 10 < 3 && i / 10 < 3;
      img.rgb.push_back(lesion ? 90 : 225);
      img.rgb.push_back(lesion ? 40 : 190);
      img.rgb.push_back(lesion ? 30 : 165);
    }
    BinaryMask lesion(10, 10);
    for (int y = 0; y < 3; ++y)
      for (int x = 0; x < 3; ++x) lesion(x, y) = 1;
    const ToneResult t = tone_of(img, lesion, 1);
    const LabColor skin = rgb_to_lab(225, 190, 165);
    CHECK(t.dominant.L == doctest::Approx(skin.L));
    CHECK(t.ita == doctest::Approx(ita(skin)));
    CHECK(t.group == classify(ita(skin)));
    CHECK_THROWS_AS(tone_of(img, BinaryMask(5, 5), 1), Error);
  }
}
