#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace oracle {

using namespace segbias;

BinaryMask random_mask(Rng& rng, int max_side, double density) {
  const int w = 1 + static_cast<int>(uniform_index(rng, static_cast<std::size_t>(max_side)));
  const int h = 1 + static_cast<int>(uniform_index(rng, static_cast<std::size_t>(max_side)));
  BinaryMask m(w, h);
  for (auto& v : m.data) v = uniform01(rng) < density ? 1 : 0;
  return m;
}

BinaryMask disk_mask(int w, int h, double cx, double cy, double r) {
  BinaryMask m(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if ((x - cx) * (x - cx) + (y - cy) * (y - cy) <= r * r) m(x, y) = 1;
    }
  }
  return m;
}

BinaryMask erode(const BinaryMask& m, int r) {
  BinaryMask out(m.width, m.height);
  for (int y = 0; y < m.height; ++y) {
    for (int x = 0; x < m.width; ++x) {
      bool all = true;
      for (int dy = -r; dy <= r && all; ++dy) {
        for (int dx = -r; dx <= r && all; ++dx) {
          if (dx * dx + dy * dy > r * r) continue;
          const int xx = x + dx;
          const int yy = y + dy;
          if (xx < 0 || yy < 0 || xx >= m.width || yy >= m.height || m(xx, yy) == 0) all = false;
        }
      }
      out(x, y) = all ? 1 : 0;
    }
  }
  return out;
}

BinaryMask dilate(const BinaryMask& m, int r) {
  BinaryMask out(m.width, m.height);
  for (int y = 0; y < m.height; ++y) {
    for (int x = 0; x < m.width; ++x) {
      bool any = false;
      for (int dy = -r; dy <= r && !any; ++dy) {
        for (int dx = -r; dx <= r && !any; ++dx) {
          if (dx * dx + dy * dy > r * r) continue;
          const int xx = x + dx;
          const int yy = y + dy;
          if (xx >= 0 && yy >= 0 && xx < m.width && yy < m.height && m(xx, yy) == 1) any = true;
        }
      }
      out(x, y) = any ? 1 : 0;
    }
  }
  return out;
}

BinaryMask band(const BinaryMask& m, int w) {
  const BinaryMask d = oracle::dilate(m, w);
  const BinaryMask e = oracle::erode(m, w);
  BinaryMask out(m.width, m.height);
  for (std::size_t i = 0; i < m.size(); ++i) out.data[i] = (d.data[i] == 1 && e.data[i] == 0) ? 1 : 0;
  return out;
}

std::vector<double> signed_distance(const BinaryMask& m) {
  std::vector<double> out(m.size());
  for (int y = 0; y < m.height; ++y) {
    for (int x = 0; x < m.width; ++x) {
      double best = std::numeric_limits<double>::infinity();
      for (int yy = 0; yy < m.height; ++yy) {
        for (int xx = 0; xx < m.width; ++xx) {
          if (m(xx, yy) == m(x, y)) continue;
          const double d = std::sqrt(static_cast<double>((xx - x) * (xx - x) + (yy - y) * (yy - y)));
          best = std::min(best, d);
        }
      }
      out[m.index(x, y)] = m(x, y) ? best : -best;
    }
  }
  return out;
}

std::vector<std::pair<int, int>> boundary_pixels(const BinaryMask& m) {
  std::vector<std::pair<int, int>> out;
  const int nx[4] = {1, -1, 0, 0};
  const int ny[4] = {0, 0, 1, -1};
  for (int y = 0; y < m.height; ++y) {
    for (int x = 0; x < m.width; ++x) {
      if (!m(x, y)) continue;
      for (int k = 0; k < 4; ++k) {
        const int xx = x + nx[k];
        const int yy = y + ny[k];
        if (m.inside(xx, yy) && !m(xx, yy)) {
          out.emplace_back(x, y);
          break;
        }
      }
    }
  }
  return out;
}

double chi_square(const std::vector<std::vector<double>>& table) {
  const std::size_t rows = table.size();
  const std::size_t cols = table[0].size();
  std::vector<double> row_sum(rows, 0.0);
  std::vector<double> col_sum(cols, 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) {
      row_sum[i] += table[i][j];
      col_sum[j] += table[i][j];
      total += table[i][j];
    }
  }
  double chi2 = 0.0;
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) {
      const double e = row_sum[i] * col_sum[j] / total;
      chi2 += (table[i][j] - e) * (table[i][j] - e) / e;
    }
  }
  return chi2;
}

std::vector<double> forward(const LearnerModel& model, const GrayImage& image, int film_group) {
  std::vector<double> sorted = image.values;
  std::sort(sorted.begin(), sorted.end());
  const double level = sorted[sorted.size() / 10];
  const FilmParams& film = model.film.at(film_group);
  const int r = model.patch_radius;
  std::vector<double> out;
  for (int y = 0; y < image.height; ++y) {
    for (int x = 0; x < image.width; ++x) {
      std::vector<double> f;
      for (int dy = -r; dy <= r; ++dy) {
        for (int dx = -r; dx <= r; ++dx) {
          const int xx = std::min(std::max(x + dx, 0), image.width - 1);
          const int yy = std::min(std::max(y + dy, 0), image.height - 1);
          f.push_back(image(xx, yy) - level);
        }
      }
      f.push_back(image.width > 1 ? static_cast<double>(x) / (image.width - 1) : 0.0);
      f.push_back(image.height > 1 ? static_cast<double>(y) / (image.height - 1) : 0.0);
      f.push_back(level - model.level_center);
      double z = model.b2;
      for (int j = 0; j < model.hidden_dim; ++j) {
        double a = model.b1[j];
        for (std::size_t i = 0; i < f.size(); ++i) a += model.W1(j, static_cast<Eigen::Index>(i)) * f[i];
        const double hj = a > 0.0 ? a : 0.0;
        z += model.w2[j] * (film.gamma[j] * hj + film.beta[j]);
      }
      out.push_back(1.0 / (1.0 + std::exp(-z)));
    }
  }
  return out;
}

double seg_loss(const std::vector<double>& p, const std::vector<std::uint8_t>& t, const std::vector<double>& w,
                double dice_weight) {
  double w_sum = 0.0;
  for (double v : w) w_sum += v;
  double ce = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    ce += w[i] * (t[i] ? -std::log(p[i]) : -std::log(1.0 - p[i]));
  }
  ce /= w_sum;
  double inter = 0.0;
  double denom = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double wn = w[i] * static_cast<double>(p.size()) / w_sum;
    inter += wn * p[i] * t[i];
    denom += wn * (p[i] + t[i]);
  }
  const double dice = 1.0 - (2.0 * inter + 1.0) / (denom + 1.0);
  return ce + dice_weight * dice;
}

GradCheck gradient_check(const LearnerModel& model, const std::vector<BatchItem>& batch,
                         const LossSettings& settings, double step) {
  const LossAndGrad base = loss_and_grad(model, batch, settings);
  const std::vector<double> analytic = base.grad.flatten();
  std::vector<double> theta = model.flatten();
  LearnerModel probe = model;
  GradCheck out;
  out.n_params = theta.size();
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double saved = theta[i];
    theta[i] = saved + step;
    probe.assign(theta);
    const double up = loss_and_grad(probe, batch, settings).loss;
    theta[i] = saved - step;
    probe.assign(theta);
    const double down = loss_and_grad(probe, batch, settings).loss;
    theta[i] = saved;
    const double fd = (up - down) / (2.0 * step);
    const double forward_slope = (up - base.loss) / step;
    const double backward_slope = (base.loss - down) / step;
    const double scale = std::max({std::abs(forward_slope), std::abs(backward_slope), 1e-6});
    if (std::abs(forward_slope - backward_slope) / scale > kKinkTolerance) {
      ++out.kinks;
      continue;
    }
    const double a = analytic[i];
    const double err = std::abs(a - fd) / std::max({std::abs(a), std::abs(fd), 1e-6});
    if (err > out.max_rel_err) {
      out.max_rel_err = err;
      out.worst_index = i;
    }
  }
  return out;
}

std::vector<BatchItem> GradCase::batch() const {
  std::vector<BatchItem> items;
  for (std::size_t i = 0; i < images.size(); ++i) {
    items.push_back(BatchItem{&images[i], &masks[i], groups[i], weights[i]});
  }
  return items;
}

namespace {

GradCase make_case(std::uint64_t seed, PenaltyKind kind, bool conditioned, bool asym) {
  Rng rng = make_stream(seed, "oracle/grad_case");
  GradCase c;
  c.name = to_string(kind) + (conditioned ? "+film" : "") + (asym ? "+asym" : "") + " #" + std::to_string(seed);
  const int hidden = 3 + static_cast<int>(uniform_index(rng, 3));
  const int radius = 1;
  c.model = LearnerModel::initialize(hidden, radius, {0, 1}, rng);
  c.model.level_center = uniform(rng, -0.2, 0.2);
  std::vector<double> theta = c.model.flatten();
  for (double& v : theta) v = 0.6 * standard_normal(rng);
  c.model.assign(theta);
  for (auto& [g, film] : c.model.film) {
    for (Eigen::Index j = 0; j < film.gamma.size(); ++j) film.gamma[j] = 1.0 + 0.4 * standard_normal(rng);
  }

  const int side = 6;
  const int n = 4;
  for (int i = 0; i < n; ++i) {
    GrayImage img(side, side);
    for (double& v : img.values) v = uniform01(rng);
    BinaryMask m = disk_mask(side, side, uniform(rng, 2.0, 3.5), uniform(rng, 2.0, 3.5), uniform(rng, 1.2, 2.2));
    const int group = i % 2;
    std::vector<double> w;
    if (asym) {
      w = asym_weights(m, group, 1, 1);
    } else {
      w.assign(m.size(), 1.0);
      for (double& v : w) v = uniform(rng, 0.2, 1.5);
    }
    c.images.push_back(std::move(img));
    c.masks.push_back(std::move(m));
    c.groups.push_back(group);
    c.weights.push_back(std::move(w));
  }
  c.settings.dice_weight = uniform(rng, 0.5, 1.5);
  c.settings.penalty = kind;
  c.settings.penalty_weight = kind == PenaltyKind::None ? 0.0 : uniform(rng, 0.3, 2.0);
  c.settings.conditioned = conditioned;
  c.settings.subsample_seed = seed;
  return c;
}

}  // namespace

std::vector<GradCase> gradient_cases() {
  const PenaltyKind kinds[] = {PenaltyKind::None,     PenaltyKind::DP,    PenaltyKind::EO,        PenaltyKind::DPEO,
                               PenaltyKind::MmdLogit, PenaltyKind::Coral, PenaltyKind::MmdFeature};
  std::vector<GradCase> cases;
  std::uint64_t seed = 1;
  for (PenaltyKind k : kinds) {
    cases.push_back(make_case(seed++, k, false, false));
    cases.push_back(make_case(seed++, k, true, false));
    cases.push_back(make_case(seed++, k, true, true));
  }
  return cases;
}

CorruptionPair equal_count_corruption(Rng& rng) {
  const int side = 32;
  CorruptionPair p;
  p.clean = disk_mask(side, side, uniform(rng, 12.0, 20.0), uniform(rng, 12.0, 20.0), uniform(rng, 3.0, 8.0));
  const int r = 1 + static_cast<int>(uniform_index(rng, 2));
  p.eroded = oracle::erode(p.clean, r);
  const std::size_t removed = p.clean.count() - p.eroded.count();

  p.dilated = p.clean;
  std::size_t added = 0;
  BinaryMask prev = p.clean;
  for (int ring = 1; added < removed; ++ring) {
    const BinaryMask grown = oracle::dilate(p.clean, ring);
    for (std::size_t i = 0; i < grown.size() && added < removed; ++i) {
      if (grown.data[i] && !prev.data[i]) {
        p.dilated.data[i] = 1;
        ++added;
      }
    }
    prev = grown;
  }
  return p;
}

}  // namespace oracle
