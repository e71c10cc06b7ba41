#include <array>
#include <cmath>

#include "segbias/error.hpp"
#include "segbias/kernel_stats.hpp"
#include "segbias/learner.hpp"

namespace segbias {

namespace {

constexpr const char* kModule = "penalty";

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

struct PixelRef {
  std::size_t image;
  Eigen::Index pixel;
};

void init_grads(PenaltyResult& r, std::span<const PenaltyView> batch, bool logits, bool hidden) {
  if (logits) {
    r.d_logits.resize(batch.size());
    for (std::size_t b = 0; b < batch.size(); ++b) r.d_logits[b] = Eigen::VectorXd::Zero(batch[b].logits->size());
  }
  if (hidden) {
    r.d_hidden.resize(batch.size());
    for (std::size_t b = 0; b < batch.size(); ++b) {
      r.d_hidden[b] = Eigen::MatrixXd::Zero(batch[b].hidden->rows(), batch[b].hidden->cols());
    }
  }
}

// Mean of p over a pixel subset, accumulating d(mean)/dz = p(1-p)/count scaled by coef.
struct MeanProb {
  double sum = 0.0;
  double count = 0.0;
  double mean() const { return count > 0.0 ? sum / count : 0.0; }
};

// Predicted-probability means per group, restricted to a label (or any label when label < 0).
std::array<MeanProb, 2> group_means(std::span<const PenaltyView> batch, int label) {
  std::array<MeanProb, 2> m{};
  for (const PenaltyView& v : batch) {
    const Eigen::VectorXd& p = *v.probs;
    for (Eigen::Index i = 0; i < p.size(); ++i) {
      if (label >= 0 && v.labels->data[static_cast<std::size_t>(i)] != label) continue;
      m[v.group].sum += p[i];
      m[v.group].count += 1.0;
    }
  }
  return m;
}

// Adds coef * d|mean0 - mean1| / dz to the logit gradients.
double abs_gap(std::span<const PenaltyView> batch, int label, PenaltyResult& r, bool with_grad) {
  const auto m = group_means(batch, label);
  if (m[0].count == 0.0 || m[1].count == 0.0) return 0.0;
  const double gap = m[0].mean() - m[1].mean();
  if (with_grad) {
    const double s = sign(gap);
    for (std::size_t b = 0; b < batch.size(); ++b) {
      const PenaltyView& v = batch[b];
      const Eigen::VectorXd& p = *v.probs;
      const double coef = (v.group == 0 ? s / m[0].count : -s / m[1].count);
      for (Eigen::Index i = 0; i < p.size(); ++i) {
        if (label >= 0 && v.labels->data[static_cast<std::size_t>(i)] != label) continue;
        r.d_logits[b][i] += coef * p[i] * (1.0 - p[i]);
      }
    }
  }
  return std::abs(gap);
}

double mmd_logit(std::span<const PenaltyView> batch, std::uint64_t seed, PenaltyResult& r, bool with_grad) {
  double total = 0.0;
  int classes_used = 0;
  for (int c = 0; c <= 1; ++c) {
    std::array<std::vector<PixelRef>, 2> pools;
    for (std::size_t b = 0; b < batch.size(); ++b) {
      const PenaltyView& v = batch[b];
      for (Eigen::Index i = 0; i < v.logits->size(); ++i) {
        if (v.labels->data[static_cast<std::size_t>(i)] == c) pools[v.group].push_back({b, i});
      }
    }
    for (int g = 0; g <= 1; ++g) {
      auto& pool = pools[g];
      if (pool.size() > kMmdLogitSubsample) {
        Rng rng = make_stream(seed, "penalty/mmd_logit", static_cast<std::uint64_t>(2 * c + g));
        // Partial Fisher-Yates: the first kMmdLogitSubsample entries are the draw.
        for (std::size_t k = 0; k < kMmdLogitSubsample; ++k) {
          const std::size_t j = k + uniform_index(rng, pool.size() - k);
          std::swap(pool[k], pool[j]);
        }
        pool.resize(kMmdLogitSubsample);
      }
    }
    if (pools[0].size() < 2 || pools[1].size() < 2) continue;
    Eigen::MatrixXd x(static_cast<Eigen::Index>(pools[0].size()), 1);
    Eigen::MatrixXd y(static_cast<Eigen::Index>(pools[1].size()), 1);
    for (std::size_t k = 0; k < pools[0].size(); ++k) {
      x(static_cast<Eigen::Index>(k), 0) = (*batch[pools[0][k].image].logits)[pools[0][k].pixel];
    }
    for (std::size_t k = 0; k < pools[1].size(); ++k) {
      y(static_cast<Eigen::Index>(k), 0) = (*batch[pools[1][k].image].logits)[pools[1][k].pixel];
    }
    const MmdResult res = mmd2_multiscale(x, y, with_grad);
    r.degenerate_bandwidth = r.degenerate_bandwidth || res.degenerate_bandwidth;
    total += res.value;
    ++classes_used;
    if (with_grad) {
      // Scaled by 1/classes_used below.
      for (std::size_t k = 0; k < pools[0].size(); ++k) {
        r.d_logits[pools[0][k].image][pools[0][k].pixel] += res.grad_x(static_cast<Eigen::Index>(k), 0);
      }
      for (std::size_t k = 0; k < pools[1].size(); ++k) {
        r.d_logits[pools[1][k].image][pools[1][k].pixel] += res.grad_y(static_cast<Eigen::Index>(k), 0);
      }
    }
  }
  if (classes_used == 0) return 0.0;
  if (with_grad) {
    for (auto& g : r.d_logits) g /= static_cast<double>(classes_used);
  }
  return total / classes_used;
}

double coral(std::span<const PenaltyView> batch, PenaltyResult& r, bool with_grad) {
  const Eigen::Index d = batch.front().hidden->rows();
  std::array<Eigen::VectorXd, 2> mean{Eigen::VectorXd::Zero(d), Eigen::VectorXd::Zero(d)};
  std::array<double, 2> count{0.0, 0.0};
  for (const PenaltyView& v : batch) {
    mean[v.group] += v.hidden->rowwise().sum();
    count[v.group] += static_cast<double>(v.hidden->cols());
  }
  if (count[0] < 2.0 || count[1] < 2.0) {
    r.single_group = true;
    return 0.0;
  }
  for (int g = 0; g <= 1; ++g) mean[g] /= count[g];
  std::array<Eigen::MatrixXd, 2> cov{Eigen::MatrixXd::Zero(d, d), Eigen::MatrixXd::Zero(d, d)};
  for (const PenaltyView& v : batch) {
    const Eigen::MatrixXd centered = v.hidden->colwise() - mean[v.group];
    cov[v.group].noalias() += centered * centered.transpose();
  }
  for (int g = 0; g <= 1; ++g) cov[g] /= (count[g] - 1.0);
  const Eigen::MatrixXd diff = cov[0] - cov[1];
  const double dd = static_cast<double>(d);
  const double value = diff.squaredNorm() / (4.0 * dd * dd);
  if (with_grad) {
    for (std::size_t b = 0; b < batch.size(); ++b) {
      const PenaltyView& v = batch[b];
      const double sgn = v.group == 0 ? 1.0 : -1.0;
      const Eigen::MatrixXd centered = v.hidden->colwise() - mean[v.group];
      r.d_hidden[b] = sgn / (dd * dd * (count[v.group] - 1.0)) * (diff * centered);
    }
  }
  return value;
}

double mmd_feature(std::span<const PenaltyView> batch, PenaltyResult& r, bool with_grad) {
  std::array<std::vector<std::size_t>, 2> members;
  for (std::size_t b = 0; b < batch.size(); ++b) members[batch[b].group].push_back(b);
  if (members[0].size() < 2 || members[1].size() < 2) {
    r.single_group = true;
    return 0.0;
  }
  const Eigen::Index d = batch.front().hidden->rows();
  std::array<Eigen::MatrixXd, 2> pooled;
  for (int g = 0; g <= 1; ++g) {
    pooled[g].resize(static_cast<Eigen::Index>(members[g].size()), d);
    for (std::size_t k = 0; k < members[g].size(); ++k) {
      pooled[g].row(static_cast<Eigen::Index>(k)) = batch[members[g][k]].hidden->rowwise().mean().transpose();
    }
  }
  const MmdResult res = mmd2_multiscale(pooled[0], pooled[1], with_grad);
  r.degenerate_bandwidth = res.degenerate_bandwidth;
  if (with_grad) {
    for (int g = 0; g <= 1; ++g) {
      const Eigen::MatrixXd& grad = g == 0 ? res.grad_x : res.grad_y;
      for (std::size_t k = 0; k < members[g].size(); ++k) {
        const std::size_t b = members[g][k];
        const Eigen::Index n_pix = batch[b].hidden->cols();
        const Eigen::VectorXd per_pixel = grad.row(static_cast<Eigen::Index>(k)).transpose() / static_cast<double>(n_pix);
        r.d_hidden[b] = per_pixel.replicate(1, n_pix);
      }
    }
  }
  return res.value;
}

}  // namespace

std::string to_string(PenaltyKind kind) {
  switch (kind) {
    case PenaltyKind::None: return "none";
    case PenaltyKind::DP: return "dp";
    case PenaltyKind::EO: return "eo";
    case PenaltyKind::DPEO: return "dp+eo";
    case PenaltyKind::MmdLogit: return "mmd_logit";
    case PenaltyKind::Coral: return "coral";
    case PenaltyKind::MmdFeature: return "mmd_feature";
  }
  return "unknown";
}

PenaltyKind parse_penalty(const std::string& name) {
  if (name == "none") return PenaltyKind::None;
  if (name == "dp") return PenaltyKind::DP;
  if (name == "eo") return PenaltyKind::EO;
  if (name == "dp+eo" || name == "dpeo") return PenaltyKind::DPEO;
  if (name == "mmd_logit") return PenaltyKind::MmdLogit;
  if (name == "coral") return PenaltyKind::Coral;
  if (name == "mmd_feature") return PenaltyKind::MmdFeature;
  throw Error(ErrorCode::ConfigError, kModule, "unknown penalty '" + name + "'");
}

PenaltyResult penalty(PenaltyKind kind, std::span<const PenaltyView> batch, std::uint64_t subsample_seed,
                      bool with_grad) {
  PenaltyResult r;
  if (kind == PenaltyKind::None || batch.empty()) return r;
  bool has[2] = {false, false};
  for (const PenaltyView& v : batch) {
    if (v.group != 0 && v.group != 1) throw Error(ErrorCode::UnknownGroup, kModule, "group must be 0 or 1");
    has[v.group] = true;
  }
  const bool uses_hidden = kind == PenaltyKind::Coral || kind == PenaltyKind::MmdFeature;
  if (with_grad) init_grads(r, batch, !uses_hidden, uses_hidden);
  if (!has[0] || !has[1]) {
    r.single_group = true;
    return r;
  }
  switch (kind) {
    case PenaltyKind::DP:
      r.value = abs_gap(batch, -1, r, with_grad);
      break;
    case PenaltyKind::EO:
      r.value = abs_gap(batch, 1, r, with_grad) + abs_gap(batch, 0, r, with_grad);
      break;
    case PenaltyKind::DPEO:
      r.value = abs_gap(batch, -1, r, with_grad) + abs_gap(batch, 1, r, with_grad) + abs_gap(batch, 0, r, with_grad);
      break;
    case PenaltyKind::MmdLogit:
      r.value = mmd_logit(batch, subsample_seed, r, with_grad);
      break;
    case PenaltyKind::Coral:
      r.value = coral(batch, r, with_grad);
      break;
    case PenaltyKind::MmdFeature:
      r.value = mmd_feature(batch, r, with_grad);
      break;
    case PenaltyKind::None:
      break;
  }
  return r;
}

}  // namespace segbias
