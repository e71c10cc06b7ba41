#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace segbias {

/// Single-channel intensity field, values in [0, 1], row-major.
struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<double> values;

  GrayImage() = default;
  GrayImage(int w, int h, double fill = 0.0)
      : width(w), height(h), values(static_cast<std::size_t>(w) * h, fill) {}

  double operator()(int x, int y) const { return values[static_cast<std::size_t>(y) * width + x]; }
  double& operator()(int x, int y) { return values[static_cast<std::size_t>(y) * width + x]; }
  std::size_t size() const { return values.size(); }

  bool operator==(const GrayImage&) const = default;
};

/// Interleaved 8-bit RGB, row-major.
struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgb;

  std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }
};

/// Raw netpbm payload: P5 (1 channel) or P6 (3 channels), maxval 255.
struct Pnm {
  int width = 0;
  int height = 0;
  int channels = 1;
  std::vector<std::uint8_t> bytes;
};

Pnm read_pnm(const std::filesystem::path& path);
void write_pnm(const std::filesystem::path& path, const Pnm& pnm);

/// Intensity image as P5 with value round(255 * v).
void write_image_pgm(const std::filesystem::path& path, const GrayImage& image);
GrayImage read_image_pgm(const std::filesystem::path& path);

RgbImage read_rgb_ppm(const std::filesystem::path& path);
void write_rgb_ppm(const std::filesystem::path& path, const RgbImage& image);

/// Snap every value to the nearest k/255 so images survive a PGM round trip.
void quantize_to_8bit(GrayImage& image);

}  // namespace segbias
