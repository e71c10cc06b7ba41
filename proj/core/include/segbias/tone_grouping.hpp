#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "segbias/image.hpp"
#include "segbias/mask_ops.hpp"

namespace segbias {

struct LabColor {
  double L = 0.0;
  double a = 0.0;
  double b = 0.0;

  bool operator==(const LabColor&) const = default;
};

enum class ToneGroup { ST1_VeryLight, ST2_Light, ST3_Intermediate, ST4_Tan, OutOfRange };

std::string to_string(ToneGroup g);

/// sRGB (8-bit, D65) to CIE L*a*b*.
LabColor rgb_to_lab(std::uint8_t r, std::uint8_t g, std::uint8_t b);

struct KMeansResult {
  std::vector<LabColor> centroids;
  std::vector<std::size_t> sizes;
  double inertia = 0.0;
};

/// Lloyd iterations from farthest-point seeding over the lexicographically
/// sorted input, so the result does not depend on input order.
KMeansResult kmeans_lab(std::span<const LabColor> pixels, int k, std::uint64_t seed = 1);

struct DominantColor {
  LabColor color;
  int k = 0;
};

/// Runs k-means for every k in [k_min, k_max], picks the elbow (largest second
/// difference of inertia; k_min when fewer than three candidates) and returns
/// the centroid of the largest cluster. Throws TooFewPixels below k_max pixels.
DominantColor dominant_color(std::span<const LabColor> pixels, int k_min = 2, int k_max = 6,
                             std::uint64_t seed = 1);

/// Individual typology angle in degrees, atan2(L - 50, b).
double ita(const LabColor& c);
ToneGroup classify(double ita_degrees);

struct ToneResult {
  LabColor dominant;
  double ita = 0.0;
  ToneGroup group = ToneGroup::OutOfRange;
  int k = 0;
};

/// Dominant skin color over the pixels outside the lesion mask.
ToneResult tone_of(const RgbImage& image, const BinaryMask& lesion, std::uint64_t seed = 1);

}  // namespace segbias
