#include "segbias/mask_ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "segbias/error.hpp"
#include "segbias/image.hpp"

namespace segbias {

namespace {

constexpr const char* kModule = "mask_ops";

void require_radius(int radius) {
  if (radius < 0) throw Error(ErrorCode::InvalidArgument, kModule, "radius must be >= 0");
}

// Per-row prefix counts of foreground pixels; prefix[y*(W+1) + x] = ones in [0, x).
std::vector<int> row_prefix(const BinaryMask& mask) {
  const int w = mask.width;
  std::vector<int> prefix(static_cast<std::size_t>(w + 1) * mask.height, 0);
  for (int y = 0; y < mask.height; ++y) {
    int* row = prefix.data() + static_cast<std::size_t>(y) * (w + 1);
    for (int x = 0; x < w; ++x) row[x + 1] = row[x] + mask(x, y);
  }
  return prefix;
}

enum class Morph { Erode, Dilate };

BinaryMask morph(const BinaryMask& mask, int radius, Outside outside, Morph op) {
  require_radius(radius);
  if (radius == 0) return mask;
  const int w = mask.width;
  const int h = mask.height;
  const std::vector<int> prefix = row_prefix(mask);
  std::vector<int> half(static_cast<std::size_t>(2 * radius + 1));
  for (int dy = -radius; dy <= radius; ++dy) half[dy + radius] = StructuringElement::half_width(radius, dy);

  BinaryMask out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      bool result = (op == Morph::Erode);
      for (int dy = -radius; dy <= radius && result == (op == Morph::Erode); ++dy) {
        const int hx = half[dy + radius];
        const int span = 2 * hx + 1;
        const int yy = y + dy;
        int ones = 0;
        int in_frame = 0;
        if (yy >= 0 && yy < h) {
          const int lo = std::max(0, x - hx);
          const int hi = std::min(w - 1, x + hx);
          if (lo <= hi) {
            const int* row = prefix.data() + static_cast<std::size_t>(yy) * (w + 1);
            ones = row[hi + 1] - row[lo];
            in_frame = hi - lo + 1;
          }
        }
        const bool has_outside = in_frame < span;
        if (op == Morph::Dilate) {
          if (ones > 0 || (has_outside && outside == Outside::Foreground)) result = true;
        } else {
          if (ones < in_frame || (has_outside && outside == Outside::Background)) result = false;
        }
      }
      out(x, y) = result ? 1 : 0;
    }
  }
  return out;
}

// Exact 1-D squared distance transform (lower envelope of parabolas) over
// the finite sites only; cells with no site anywhere stay at +inf.
void edt_1d(const double* f, double* d, int n, int stride, std::vector<int>& v, std::vector<double>& z) {
  constexpr double kInf = std::numeric_limits<double>::infinity();
  v.assign(static_cast<std::size_t>(n), 0);
  z.assign(static_cast<std::size_t>(n) + 1, 0.0);
  int k = -1;
  for (int q = 0; q < n; ++q) {
    const double fq = f[static_cast<std::ptrdiff_t>(q) * stride];
    if (fq == kInf) continue;
    if (k < 0) {
      k = 0;
      v[0] = q;
      z[0] = -kInf;
      z[1] = kInf;
      continue;
    }
    // z[0] is -inf, so the envelope never empties.
    double s = 0.0;
    while (true) {
      const int p = v[k];
      const double fp = f[static_cast<std::ptrdiff_t>(p) * stride];
      s = ((fq + static_cast<double>(q) * q) - (fp + static_cast<double>(p) * p)) / (2.0 * (q - p));
      if (s > z[k]) break;
      --k;
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = kInf;
  }
  std::vector<double> out(static_cast<std::size_t>(n), kInf);
  if (k >= 0) {
    int j = 0;
    for (int q = 0; q < n; ++q) {
      while (z[j + 1] < q) ++j;
      const double dq = q - v[j];
      out[q] = dq * dq + f[static_cast<std::ptrdiff_t>(v[j]) * stride];
    }
  }
  for (int q = 0; q < n; ++q) d[static_cast<std::ptrdiff_t>(q) * stride] = out[q];
}

// Squared Euclidean distance from every pixel to the nearest pixel whose
// value equals `site`.
std::vector<double> squared_distance_to(const BinaryMask& mask, std::uint8_t site) {
  constexpr double kInf = std::numeric_limits<double>::infinity();
  const int w = mask.width;
  const int h = mask.height;
  std::vector<double> f(mask.size());
  for (std::size_t i = 0; i < mask.size(); ++i) f[i] = mask.data[i] == site ? 0.0 : kInf;
  std::vector<double> tmp(mask.size());
  std::vector<int> v;
  std::vector<double> z;
  for (int x = 0; x < w; ++x) edt_1d(f.data() + x, tmp.data() + x, h, w, v, z);
  for (int y = 0; y < h; ++y) {
    edt_1d(tmp.data() + static_cast<std::size_t>(y) * w, f.data() + static_cast<std::size_t>(y) * w, w, 1, v, z);
  }
  return f;
}

}  // namespace

BinaryMask::BinaryMask(int w, int h, std::uint8_t fill)
    : width(w), height(h), data(static_cast<std::size_t>(w) * h, fill) {
  if (w < 0 || h < 0) throw Error(ErrorCode::InvalidArgument, kModule, "negative mask dimensions");
  if (fill > 1) throw Error(ErrorCode::InvalidArgument, kModule, "mask values must be 0 or 1");
}

BinaryMask BinaryMask::from_values(int w, int h, std::vector<std::uint8_t> values) {
  if (w < 0 || h < 0 || values.size() != static_cast<std::size_t>(w) * h) {
    throw Error(ErrorCode::DimensionMismatch, kModule, "mask data length must equal width*height");
  }
  if (std::any_of(values.begin(), values.end(), [](std::uint8_t v) { return v > 1; })) {
    throw Error(ErrorCode::InvalidArgument, kModule, "mask values must be 0 or 1");
  }
  BinaryMask m;
  m.width = w;
  m.height = h;
  m.data = std::move(values);
  return m;
}

std::size_t BinaryMask::count() const {
  return static_cast<std::size_t>(std::count(data.begin(), data.end(), std::uint8_t{1}));
}

int StructuringElement::half_width(int radius, int dy) {
  const int rem = radius * radius - dy * dy;
  if (rem < 0) return -1;
  int hx = static_cast<int>(std::sqrt(static_cast<double>(rem)));
  while (hx * hx > rem) --hx;
  while ((hx + 1) * (hx + 1) <= rem) ++hx;
  return hx;
}

StructuringElement StructuringElement::disk(int radius) {
  require_radius(radius);
  StructuringElement se;
  se.radius = radius;
  for (int dy = -radius; dy <= radius; ++dy) {
    for (int dx = -radius; dx <= radius; ++dx) {
      if (dx * dx + dy * dy <= radius * radius) se.offsets.push_back({dx, dy});
    }
  }
  return se;
}

BinaryMask erode(const BinaryMask& mask, int radius, Outside outside) {
  return morph(mask, radius, outside, Morph::Erode);
}

BinaryMask dilate(const BinaryMask& mask, int radius, Outside outside) {
  return morph(mask, radius, outside, Morph::Dilate);
}

BinaryMask complement(const BinaryMask& mask) {
  BinaryMask out = mask;
  for (auto& v : out.data) v = static_cast<std::uint8_t>(1 - v);
  return out;
}

BinaryMask set_difference(const BinaryMask& a, const BinaryMask& b) {
  if (!a.same_shape(b)) throw Error(ErrorCode::ShapeMismatch, kModule, "set_difference of differently sized masks");
  BinaryMask out(a.width, a.height);
  for (std::size_t i = 0; i < a.size(); ++i) out.data[i] = (a.data[i] && !b.data[i]) ? 1 : 0;
  return out;
}

BinaryMask boundary_band(const BinaryMask& mask, int width) {
  if (width < 1) throw Error(ErrorCode::InvalidArgument, kModule, "boundary width must be >= 1");
  return set_difference(dilate(mask, width), erode(mask, width));
}

DistanceField signed_distance(const BinaryMask& mask) {
  const std::size_t fg = mask.count();
  if (fg == 0 || fg == mask.size()) {
    throw Error(ErrorCode::DegenerateMask, kModule, "signed distance needs both foreground and background");
  }
  const std::vector<double> to_bg = squared_distance_to(mask, 0);
  const std::vector<double> to_fg = squared_distance_to(mask, 1);
  DistanceField field{mask.width, mask.height, std::vector<double>(mask.size())};
  for (std::size_t i = 0; i < mask.size(); ++i) {
    field.values[i] = mask.data[i] ? std::sqrt(to_bg[i]) : -std::sqrt(to_fg[i]);
  }
  return field;
}

std::vector<Harmonic> draw_harmonics(int count, Rng& rng) {
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  std::vector<Harmonic> out(static_cast<std::size_t>(std::max(count, 0)));
  for (auto& hm : out) {
    // Wavelengths between 16 and 64 px.
    hm.omega = uniform(rng, kTwoPi / 64.0, kTwoPi / 16.0);
    hm.alpha = uniform(rng, 0.0, std::numbers::pi);
    hm.psi = uniform(rng, 0.0, kTwoPi);
  }
  return out;
}

BinaryMask harmonic_deform(const BinaryMask& mask, double rho, int harmonics, Rng& rng) {
  if (harmonics < 1) throw Error(ErrorCode::InvalidArgument, kModule, "harmonic count must be >= 1");
  return harmonic_deform(mask, rho, draw_harmonics(harmonics, rng));
}

BinaryMask harmonic_deform(const BinaryMask& mask, double rho, const std::vector<Harmonic>& harmonics) {
  if (rho < 0.0) throw Error(ErrorCode::InvalidArgument, kModule, "rho must be >= 0");
  if (harmonics.empty()) throw Error(ErrorCode::InvalidArgument, kModule, "harmonic count must be >= 1");
  const DistanceField phi = signed_distance(mask);
  const double scale = rho / static_cast<double>(harmonics.size());
  BinaryMask out(mask.width, mask.height);
  for (int y = 0; y < mask.height; ++y) {
    for (int x = 0; x < mask.width; ++x) {
      double d = 0.0;
      for (const auto& hm : harmonics) {
        d += std::sin(hm.omega * (x * std::cos(hm.alpha) + y * std::sin(hm.alpha)) + hm.psi);
      }
      out(x, y) = phi(x, y) > scale * d ? 1 : 0;
    }
  }
  return out;
}

void write_mask_pgm(const std::filesystem::path& path, const BinaryMask& mask) {
  Pnm pnm{mask.width, mask.height, 1, std::vector<std::uint8_t>(mask.size())};
  for (std::size_t i = 0; i < mask.size(); ++i) pnm.bytes[i] = mask.data[i] ? 255 : 0;
  write_pnm(path, pnm);
}

BinaryMask read_mask_pgm(const std::filesystem::path& path) {
  const Pnm pnm = read_pnm(path);
  if (pnm.channels != 1) throw Error(ErrorCode::ParseError, kModule, path.string() + ": mask must be P5");
  std::vector<std::uint8_t> values(pnm.bytes.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const std::uint8_t b = pnm.bytes[i];
    if (b != 0 && b != 255) {
      throw Error(ErrorCode::ParseError, kModule, path.string() + ": mask values must be 0 or 255");
    }
    values[i] = b ? 1 : 0;
  }
  return BinaryMask::from_values(pnm.width, pnm.height, std::move(values));
}

}  // namespace segbias
