#include "segbias/tone_grouping.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "segbias/error.hpp"
#include "segbias/rng.hpp"

namespace segbias {

namespace {

constexpr const char* kModule = "tone_grouping";
constexpr int kMaxLloydIterations = 100;

// D65 reference white.
// Reference white is the image of linear (1, 1, 1) under the matrix below.
constexpr double kXn = 0.4124564 + 0.3575761 + 0.1804375;
constexpr double kYn = 0.2126729 + 0.7151522 + 0.0721750;
constexpr double kZn = 0.0193339 + 0.1191920 + 0.9503041;

double srgb_to_linear(std::uint8_t v) {
  const double c = v / 255.0;
  return c <= 0.04045 ? c / 12.92 : std::pow((c + 0.055) / 1.055, 2.4);
}

double lab_f(double t) {
  constexpr double delta = 6.0 / 29.0;
  if (t > delta * delta * delta) return std::cbrt(t);
  return t / (3.0 * delta * delta) + 4.0 / 29.0;
}

double dist2(const LabColor& p, const LabColor& q) {
  const double dl = p.L - q.L;
  const double da = p.a - q.a;
  const double db = p.b - q.b;
  return dl * dl + da * da + db * db;
}

bool lex_less(const LabColor& p, const LabColor& q) {
  if (p.L != q.L) return p.L < q.L;
  if (p.a != q.a) return p.a < q.a;
  return p.b < q.b;
}

std::size_t nearest(const LabColor& p, const std::vector<LabColor>& centroids) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < centroids.size(); ++c) {
    const double d = dist2(p, centroids[c]);
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  return best;
}

}  // namespace

std::string to_string(ToneGroup g) {
  switch (g) {
    case ToneGroup::ST1_VeryLight: return "ST1_VeryLight";
    case ToneGroup::ST2_Light: return "ST2_Light";
    case ToneGroup::ST3_Intermediate: return "ST3_Intermediate";
    case ToneGroup::ST4_Tan: return "ST4_Tan";
    case ToneGroup::OutOfRange: return "OutOfRange";
  }
  return "OutOfRange";
}

LabColor rgb_to_lab(std::uint8_t r8, std::uint8_t g8, std::uint8_t b8) {
  const double r = srgb_to_linear(r8);
  const double g = srgb_to_linear(g8);
  const double b = srgb_to_linear(b8);
  const double x = 0.4124564 * r + 0.3575761 * g + 0.1804375 * b;
  const double y = 0.2126729 * r + 0.7151522 * g + 0.0721750 * b;
  const double z = 0.0193339 * r + 0.1191920 * g + 0.9503041 * b;
  const double fx = lab_f(x / kXn);
  const double fy = lab_f(y / kYn);
  const double fz = lab_f(z / kZn);
  return LabColor{116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)};
}

KMeansResult kmeans_lab(std::span<const LabColor> input, int k, std::uint64_t seed) {
  if (k < 1) throw Error(ErrorCode::InvalidArgument, kModule, "k must be >= 1");
  if (input.size() < static_cast<std::size_t>(k)) throw Error(ErrorCode::TooFewPixels, kModule, "fewer pixels than clusters");
  std::vector<LabColor> pts(input.begin(), input.end());
  std::sort(pts.begin(), pts.end(), lex_less);

  Rng rng = make_stream(seed, "tone/kmeans");
  std::vector<LabColor> centroids{pts[uniform_index(rng, pts.size())]};
  std::vector<double> min_d(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) min_d[i] = dist2(pts[i], centroids[0]);
  while (centroids.size() < static_cast<std::size_t>(k)) {
    const std::size_t far = static_cast<std::size_t>(std::max_element(min_d.begin(), min_d.end()) - min_d.begin());
    centroids.push_back(pts[far]);
    for (std::size_t i = 0; i < pts.size(); ++i) min_d[i] = std::min(min_d[i], dist2(pts[i], centroids.back()));
  }

  std::vector<std::size_t> label(pts.size(), 0);
  for (int it = 0; it < kMaxLloydIterations; ++it) {
    bool changed = it == 0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      const std::size_t c = nearest(pts[i], centroids);
      if (c != label[i]) {
        label[i] = c;
        changed = true;
      }
    }
    if (!changed) break;
    std::vector<LabColor> sum(centroids.size());
    std::vector<std::size_t> count(centroids.size(), 0);
    for (std::size_t i = 0; i < pts.size(); ++i) {
      sum[label[i]].L += pts[i].L;
      sum[label[i]].a += pts[i].a;
      sum[label[i]].b += pts[i].b;
      ++count[label[i]];
    }
    for (std::size_t c = 0; c < centroids.size(); ++c) {
      if (count[c] == 0) continue;  // an empty cluster keeps its centroid
      const double n = static_cast<double>(count[c]);
      centroids[c] = LabColor{sum[c].L / n, sum[c].a / n, sum[c].b / n};
    }
  }

  KMeansResult out;
  out.centroids = centroids;
  out.sizes.assign(centroids.size(), 0);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const std::size_t c = nearest(pts[i], centroids);
    ++out.sizes[c];
    out.inertia += dist2(pts[i], centroids[c]);
  }
  return out;
}

DominantColor dominant_color(std::span<const LabColor> pixels, int k_min, int k_max, std::uint64_t seed) {
  if (k_min < 1 || k_max < k_min) throw Error(ErrorCode::InvalidArgument, kModule, "invalid k range");
  if (pixels.size() < static_cast<std::size_t>(k_max)) {
    throw Error(ErrorCode::TooFewPixels, kModule, "need at least k_max pixels");
  }
  std::vector<KMeansResult> runs;
  for (int k = k_min; k <= k_max; ++k) runs.push_back(kmeans_lab(pixels, k, seed));

  std::size_t pick = 0;
  if (runs.size() >= 3) {
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 1; i + 1 < runs.size(); ++i) {
      const double second = runs[i - 1].inertia - 2.0 * runs[i].inertia + runs[i + 1].inertia;
      if (second > best) {
        best = second;
        pick = i;
      }
    }
  }
  const KMeansResult& chosen = runs[pick];
  const std::size_t largest =
      static_cast<std::size_t>(std::max_element(chosen.sizes.begin(), chosen.sizes.end()) - chosen.sizes.begin());
  return DominantColor{chosen.centroids[largest], k_min + static_cast<int>(pick)};
}

double ita(const LabColor& c) {
  if (c.b == 0.0 && c.L == 50.0) throw Error(ErrorCode::UndefinedITA, kModule, "ITA undefined at L*=50, b*=0");
  return std::atan2(c.L - 50.0, c.b) * 180.0 / std::numbers::pi;
}

ToneGroup classify(double v) {
  if (!std::isfinite(v) || v > 90.0 || v <= 10.0) return ToneGroup::OutOfRange;
  if (v > 55.0) return ToneGroup::ST1_VeryLight;
  if (v > 41.0) return ToneGroup::ST2_Light;
  if (v > 28.0) return ToneGroup::ST3_Intermediate;
  return ToneGroup::ST4_Tan;
}

ToneResult tone_of(const RgbImage& image, const BinaryMask& lesion, std::uint64_t seed) {
  if (lesion.width != image.width || lesion.height != image.height) {
    throw Error(ErrorCode::DimensionMismatch, kModule, "lesion mask and image differ in size");
  }
  std::vector<LabColor> skin;
  for (std::size_t i = 0; i < image.pixel_count(); ++i) {
    if (lesion.data[i]) continue;
    skin.push_back(rgb_to_lab(image.rgb[3 * i], image.rgb[3 * i + 1], image.rgb[3 * i + 2]));
  }
  const DominantColor d = dominant_color(skin, 2, 6, seed);
  ToneResult r;
  r.dominant = d.color;
  r.k = d.k;
  r.ita = ita(d.color);
  r.group = classify(r.ita);
  return r;
}

}  // namespace segbias
