#include "segbias/synth_corpus.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <set>

#include "segbias/error.hpp"
#include "segbias/rng.hpp"

namespace segbias {

namespace {

constexpr const char* kModule = "synth_corpus";
constexpr int kSuper = 4;  // supersampling factor per axis for coverage
constexpr int kMaxShapeAttempts = 1000;

std::atomic<std::uint64_t> g_clean_reads{0};

struct ShapeParams {
  double cx, cy, a, b, theta;
  // Low-frequency radial perturbation for blobs: r *= 1 + sum amp_k sin(k t + phase_k).
  std::vector<double> amp, phase;
};

ShapeParams draw_shape(const GenConfig& cfg, Rng& rng) {
  const double w = cfg.width;
  const double h = cfg.height;
  const double s = std::min(w, h);
  ShapeParams p;
  p.cx = uniform(rng, 0.3 * w, 0.7 * w);
  p.cy = uniform(rng, 0.3 * h, 0.7 * h);
  p.a = uniform(rng, 0.12 * s, 0.35 * s);
  p.b = uniform(rng, 0.12 * s, 0.35 * s);
  p.theta = uniform(rng, 0.0, std::numbers::pi);
  if (cfg.shape == ShapeFamily::PolygonBlob) {
    for (int k = 2; k <= 4; ++k) {
      p.amp.push_back(uniform(rng, 0.0, 0.12));
      p.phase.push_back(uniform(rng, 0.0, 2.0 * std::numbers::pi));
    }
  }
  return p;
}

bool inside_shape(const ShapeParams& p, double x, double y) {
  const double dx = x - p.cx;
  const double dy = y - p.cy;
  const double c = std::cos(p.theta);
  const double s = std::sin(p.theta);
  const double u = (c * dx + s * dy) / p.a;
  const double v = (-s * dx + c * dy) / p.b;
  double scale = 1.0;
  if (!p.amp.empty()) {
    const double t = std::atan2(v, u);
    for (std::size_t k = 0; k < p.amp.size(); ++k) {
      scale += p.amp[k] * std::sin(static_cast<double>(k + 2) * t + p.phase[k]);
    }
  }
  return u * u + v * v <= scale * scale;
}

GrayImage render_coverage(const ShapeParams& p, int w, int h) {
  GrayImage cov(w, h);
  const double step = 1.0 / kSuper;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      int hits = 0;
      for (int sy = 0; sy < kSuper; ++sy) {
        for (int sx = 0; sx < kSuper; ++sx) {
          const double px = x - 0.5 + (sx + 0.5) * step;
          const double py = y - 0.5 + (sy + 0.5) * step;
          hits += inside_shape(p, px, py) ? 1 : 0;
        }
      }
      cov(x, y) = static_cast<double>(hits) / (kSuper * kSuper);
    }
  }
  return cov;
}

bool four_connected(const BinaryMask& m) {
  const std::size_t total = m.count();
  if (total == 0) return false;
  std::size_t start = 0;
  while (!m.data[start]) ++start;
  std::vector<std::uint8_t> seen(m.size(), 0);
  std::vector<std::size_t> stack{start};
  seen[start] = 1;
  std::size_t reached = 0;
  while (!stack.empty()) {
    const std::size_t i = stack.back();
    stack.pop_back();
    ++reached;
    const int x = static_cast<int>(i % m.width);
    const int y = static_cast<int>(i / m.width);
    const int nx[4] = {x - 1, x + 1, x, x};
    const int ny[4] = {y, y, y - 1, y + 1};
    for (int k = 0; k < 4; ++k) {
      if (!m.inside(nx[k], ny[k])) continue;
      const std::size_t j = m.index(nx[k], ny[k]);
      if (m.data[j] && !seen[j]) {
        seen[j] = 1;
        stack.push_back(j);
      }
    }
  }
  return reached == total;
}

GrayImage gaussian_blur(const GrayImage& in, double sigma) {
  if (sigma <= 0.0) return in;
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    kernel[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
    sum += kernel[i + radius];
  }
  for (double& k : kernel) k /= sum;
  const int w = in.width;
  const int h = in.height;
  GrayImage tmp(w, h);
  GrayImage out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i) acc += kernel[i + radius] * in(std::clamp(x + i, 0, w - 1), y);
      tmp(x, y) = acc;
    }
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i) acc += kernel[i + radius] * tmp(x, std::clamp(y + i, 0, h - 1));
      out(x, y) = acc;
    }
  }
  return out;
}

std::string sample_id(const std::string& prefix, std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04zu", i);
  return prefix + buf;
}

}  // namespace

std::string to_string(ShapeFamily shape) {
  return shape == ShapeFamily::Ellipse ? "ellipse" : "polygon_blob";
}

ShapeFamily parse_shape_family(const std::string& name) {
  if (name == "ellipse") return ShapeFamily::Ellipse;
  if (name == "polygon_blob" || name == "polygon-blob") return ShapeFamily::PolygonBlob;
  throw Error(ErrorCode::ConfigError, kModule, "unknown shape family '" + name + "'");
}

std::uint64_t clean_mask_reads() noexcept { return g_clean_reads.load(); }

const BinaryMask& Sample::clean() const {
  if (!mask_clean_) throw Error(ErrorCode::MissingCleanMask, kModule, "sample has no clean mask", id);
  g_clean_reads.fetch_add(1, std::memory_order_relaxed);
  return *mask_clean_;
}

std::size_t Corpus::group_size(int group) const {
  return static_cast<std::size_t>(std::count_if(samples.begin(), samples.end(),
                                                [group](const Sample& s) { return s.group == group; }));
}

void Corpus::check_invariants() const {
  if (clean_group != 0 && clean_group != 1) {
    throw Error(ErrorCode::InvalidArgument, kModule, "clean_group must be 0 or 1");
  }
  std::set<std::string> ids;
  for (const Sample& s : samples) {
    if (!ids.insert(s.id).second) throw Error(ErrorCode::InvalidArgument, kModule, "duplicate sample id", s.id);
    if (s.group != 0 && s.group != 1) throw Error(ErrorCode::UnknownGroup, kModule, "group must be 0 or 1", s.id);
    if (s.image.width != width || s.image.height != height || s.mask_obs.width != width ||
        s.mask_obs.height != height) {
      throw Error(ErrorCode::DimensionMismatch, kModule, "sample size differs from corpus size", s.id);
    }
    if (s.corrupted && !s.has_clean()) {
      throw Error(ErrorCode::MissingCleanMask, kModule, "corrupted sample without clean mask", s.id);
    }
    if (s.has_clean() && !s.clean_has_shape(width, height)) {
      throw Error(ErrorCode::DimensionMismatch, kModule, "clean mask size differs from corpus size", s.id);
    }
  }
  if (group_size(0) == 0 || group_size(1) == 0) {
    throw Error(ErrorCode::InvalidArgument, kModule, "both groups must be non-empty");
  }
}

void validate(const GenConfig& c) {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::ConfigError, kModule, what); };
  if (c.n_samples < 2) fail("n_samples must be >= 2");
  if (c.width < 8 || c.height < 8) fail("width and height must be >= 8");
  if (!(c.group_balance > 0.0 && c.group_balance < 1.0)) fail("group_balance must be in (0, 1)");
  if (!(c.noise_sigma >= 0.0)) fail("noise_sigma must be >= 0");
  if (!(c.contrast >= 0.0 && c.contrast <= 1.0)) fail("contrast must be in [0, 1]");
  if (!(c.group_cue_shift >= 0.0 && c.group_cue_shift <= 1.0)) fail("group_cue_shift must be in [0, 1]");
  if (c.contrast + c.group_cue_shift > 1.0) fail("contrast + group_cue_shift must be <= 1");
  if (!(c.edge_blur >= 0.0)) fail("edge_blur must be >= 0");
  if (c.clean_group != 0 && c.clean_group != 1) fail("clean_group must be 0 or 1");
  if (c.id_prefix.empty()) fail("id_prefix must be non-empty");
  const long n_biased = std::lround(c.group_balance * c.n_samples);
  if (n_biased <= 0 || n_biased >= c.n_samples) fail("group_balance leaves one group empty");
}

Corpus generate(const GenConfig& cfg) {
  validate(cfg);
  Rng rng(cfg.seed);

  const std::size_t n = static_cast<std::size_t>(cfg.n_samples);
  const std::size_t n_biased = static_cast<std::size_t>(std::lround(cfg.group_balance * cfg.n_samples));
  const int biased = 1 - cfg.clean_group;
  std::vector<int> groups(n, cfg.clean_group);
  std::fill(groups.begin(), groups.begin() + static_cast<std::ptrdiff_t>(n_biased), biased);
  shuffle(rng, groups);

  const double bg = 0.5 - cfg.contrast / 2.0 - cfg.group_cue_shift / 2.0;
  const std::size_t pixels = static_cast<std::size_t>(cfg.width) * cfg.height;

  Corpus corpus;
  corpus.width = cfg.width;
  corpus.height = cfg.height;
  corpus.clean_group = cfg.clean_group;
  corpus.samples.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    GrayImage coverage;
    BinaryMask mask;
    int attempt = 0;
    for (;; ++attempt) {
      if (attempt == kMaxShapeAttempts) {
        throw Error(ErrorCode::ConfigError, kModule, "could not place a valid object", sample_id(cfg.id_prefix, i));
      }
      const ShapeParams shape = draw_shape(cfg, rng);
      coverage = render_coverage(shape, cfg.width, cfg.height);
      mask = BinaryMask(cfg.width, cfg.height);
      for (std::size_t p = 0; p < pixels; ++p) mask.data[p] = coverage.values[p] >= 0.5 ? 1 : 0;
      const double frac = static_cast<double>(mask.count()) / static_cast<double>(pixels);
      if (frac >= 0.05 && frac <= 0.60 && four_connected(mask)) break;
    }

    const GrayImage soft = gaussian_blur(coverage, cfg.edge_blur);
    const double cue = groups[i] == biased ? cfg.group_cue_shift : 0.0;
    GrayImage image(cfg.width, cfg.height);
    for (std::size_t p = 0; p < pixels; ++p) {
      image.values[p] = bg + cfg.contrast * soft.values[p] + cue + cfg.noise_sigma * standard_normal(rng);
    }
    quantize_to_8bit(image);

    Sample s;
    s.id = sample_id(cfg.id_prefix, i);
    s.group = groups[i];
    s.image = std::move(image);
    s.set_clean(mask);
    s.mask_obs = std::move(mask);
    corpus.samples.push_back(std::move(s));
  }
  return corpus;
}

}  // namespace segbias
