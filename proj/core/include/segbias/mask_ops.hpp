#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "segbias/rng.hpp"

namespace segbias {

/// 2-D binary label field, row-major, 0 = background, 1 = foreground.
struct BinaryMask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;

  BinaryMask() = default;
  BinaryMask(int w, int h, std::uint8_t fill = 0);

  /// Validating constructor: size must be w*h and every value in {0, 1}.
  static BinaryMask from_values(int w, int h, std::vector<std::uint8_t> values);

  std::uint8_t operator()(int x, int y) const { return data[index(x, y)]; }
  std::uint8_t& operator()(int x, int y) { return data[index(x, y)]; }
  std::size_t index(int x, int y) const { return static_cast<std::size_t>(y) * width + x; }
  bool inside(int x, int y) const { return x >= 0 && y >= 0 && x < width && y < height; }
  std::size_t size() const { return data.size(); }
  std::size_t count() const;
  bool same_shape(const BinaryMask& other) const {
    return width == other.width && height == other.height;
  }

  bool operator==(const BinaryMask&) const = default;
};

struct Offset {
  int dx = 0;
  int dy = 0;
  bool operator==(const Offset&) const = default;
};

/// Discrete Euclidean disk {(dx, dy) : dx^2 + dy^2 <= r^2}.
struct StructuringElement {
  int radius = 0;
  std::vector<Offset> offsets;

  static StructuringElement disk(int radius);
  /// Horizontal half-extent of the disk on row dy.
  static int half_width(int radius, int dy);
};

/// Value assumed for pixels outside the frame. Background is the library
/// convention; Foreground exists so the dual of an operation on the
/// complemented (infinite-plane) mask can be expressed.
enum class Outside { Background, Foreground };

BinaryMask erode(const BinaryMask& mask, int radius, Outside outside = Outside::Background);
BinaryMask dilate(const BinaryMask& mask, int radius, Outside outside = Outside::Background);
BinaryMask complement(const BinaryMask& mask);
/// a \ b
BinaryMask set_difference(const BinaryMask& a, const BinaryMask& b);
/// dilate(mask, w) \ erode(mask, w); requires w >= 1.
BinaryMask boundary_band(const BinaryMask& mask, int width);

/// Pixel-center Euclidean distance to the nearest opposite-class pixel,
/// positive on foreground and negative on background.
struct DistanceField {
  int width = 0;
  int height = 0;
  std::vector<double> values;

  double operator()(int x, int y) const { return values[static_cast<std::size_t>(y) * width + x]; }
};

/// Throws DegenerateMask if the mask is all-foreground or all-background.
DistanceField signed_distance(const BinaryMask& mask);

struct Harmonic {
  double omega = 0.0;  // rad / pixel
  double alpha = 0.0;  // orientation
  double psi = 0.0;    // phase
};

/// Draws the harmonics in the order omega, alpha, psi per harmonic.
std::vector<Harmonic> draw_harmonics(int count, Rng& rng);

/// Thresholds the signed distance field against a sinusoidal displacement of
/// amplitude rho: out(p) = [phi(p) > d(p)].
BinaryMask harmonic_deform(const BinaryMask& mask, double rho, int harmonics, Rng& rng);
BinaryMask harmonic_deform(const BinaryMask& mask, double rho, const std::vector<Harmonic>& harmonics);

/// Masks are stored as P5 PGM with values {0, 255}.
void write_mask_pgm(const std::filesystem::path& path, const BinaryMask& mask);
BinaryMask read_mask_pgm(const std::filesystem::path& path);

}  // namespace segbias
