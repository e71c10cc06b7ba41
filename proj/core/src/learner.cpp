#include "segbias/learner.hpp"

#include <algorithm>
#include <cmath>

#include "segbias/error.hpp"

namespace segbias {

namespace {

constexpr const char* kModule = "learner";

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// Stable -[t log s(z) + (1-t) log(1-s(z))].
double bce_with_logit(double z, double t) {
  return std::max(z, 0.0) - t * z + std::log1p(std::exp(-std::abs(z)));
}

const FilmParams& film_for(const LearnerModel& model, int group) {
  const auto it = model.film.find(group);
  if (it == model.film.end()) {
    throw Error(ErrorCode::UnknownGroup, kModule, "no conditioning entry for group " + std::to_string(group));
  }
  return it->second;
}

struct ImagePass {
  Eigen::MatrixXd features;
  Eigen::MatrixXd pre;     // W1 x + b1
  Eigen::MatrixXd hidden;  // relu(pre)
  Eigen::MatrixXd modulated;
  Eigen::VectorXd logits;
  Eigen::VectorXd probs;
};

void featurize_into(const GrayImage& image, int patch_radius, double level_center, Eigen::MatrixXd& x) {
  const int w = image.width;
  const int h = image.height;
  const int side = 2 * patch_radius + 1;
  const double level = background_level(image);
  x.resize(side * side + 3, static_cast<Eigen::Index>(w) * h);
  const double sx = w > 1 ? 1.0 / (w - 1) : 0.0;
  const double sy = h > 1 ? 1.0 / (h - 1) : 0.0;
  for (int py = 0; py < h; ++py) {
    for (int px = 0; px < w; ++px) {
      const Eigen::Index col = static_cast<Eigen::Index>(py) * w + px;
      double* dst = x.col(col).data();
      for (int dy = -patch_radius; dy <= patch_radius; ++dy) {
        const int yy = std::clamp(py + dy, 0, h - 1);
        for (int dx = -patch_radius; dx <= patch_radius; ++dx) {
          *dst++ = image(std::clamp(px + dx, 0, w - 1), yy) - level;
        }
      }
      *dst++ = px * sx;
      *dst++ = py * sy;
      *dst = level - level_center;
    }
  }
}

// film == nullptr means identity modulation. Storage in pass is reused.
void run_pass(const LearnerModel& model, const GrayImage& image, const FilmParams* film, ImagePass& pass) {
  featurize_into(image, model.patch_radius, model.level_center, pass.features);
  pass.pre.resize(model.W1.rows(), pass.features.cols());
  pass.pre.noalias() = model.W1 * pass.features;
  pass.pre.colwise() += model.b1;
  pass.hidden = pass.pre.cwiseMax(0.0);
  if (film != nullptr) {
    pass.modulated = (pass.hidden.array().colwise() * film->gamma.array()).colwise() + film->beta.array();
  } else {
    pass.modulated = pass.hidden;
  }
  pass.logits.resize(pass.features.cols());
  pass.logits.noalias() = pass.modulated.transpose() * model.w2;
  pass.logits.array() += model.b2;
  pass.probs = pass.logits.unaryExpr([](double z) { return sigmoid(z); });
}

ImagePass run_pass(const LearnerModel& model, const GrayImage& image, const FilmParams* film) {
  ImagePass pass;
  run_pass(model, image, film, pass);
  return pass;
}

// Per-thread scratch reused across calls; repeated large allocations of
// same-sized buffers otherwise dominate the cost of a training step.
struct Workspace {
  std::vector<ImagePass> passes;
  Eigen::MatrixXd g_mod;
  Eigen::MatrixXd g_pre;
};

Workspace& workspace() {
  thread_local Workspace ws;
  return ws;
}

void check_weights(std::span<const double> weights, std::size_t n) {
  if (!weights.empty() && weights.size() != n) {
    throw Error(ErrorCode::ShapeMismatch, kModule, "weight map size differs from image size");
  }
}

// Per-image segmentation loss and dL/dz from logits.
double image_seg_loss(const Eigen::VectorXd& logits, const Eigen::VectorXd& probs, const BinaryMask& target,
                      std::span<const double> weights, double dice_weight, Eigen::VectorXd* d_logits) {
  const std::size_t n = target.size();
  check_weights(weights, n);
  auto w_at = [&](std::size_t i) { return weights.empty() ? 1.0 : weights[i]; };
  double w_sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) w_sum += w_at(i);
  if (!(w_sum > 0.0)) throw Error(ErrorCode::AllMaskedOut, kModule, "all pixel weights are zero");

  const double norm = static_cast<double>(n) / w_sum;  // Dice weights are W * N / sum(W)
  double ce = 0.0;
  double inter = 0.0;
  double denom = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double w = w_at(i);
    const double t = target.data[i];
    ce += w * bce_with_logit(logits[static_cast<Eigen::Index>(i)], t);
    const double wn = w * norm;
    const double p = probs[static_cast<Eigen::Index>(i)];
    inter += wn * p * t;
    denom += wn * (p + t);
  }
  ce /= w_sum;
  const double num = 2.0 * inter + kDiceSmoothing;
  const double den = denom + kDiceSmoothing;
  const double dice = 1.0 - num / den;

  if (d_logits != nullptr) {
    d_logits->resize(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
      const double w = w_at(i);
      const double t = target.data[i];
      const double p = probs[static_cast<Eigen::Index>(i)];
      const double wn = w * norm;
      const double d_dice_dp = -(2.0 * wn * t * den - num * wn) / (den * den);
      (*d_logits)[static_cast<Eigen::Index>(i)] = w / w_sum * (p - t) + dice_weight * d_dice_dp * p * (1.0 - p);
    }
  }
  return ce + dice_weight * dice;
}

}  // namespace

// ---------------------------------------------------------------------------

BinaryMask ProbMap::binarize(double threshold) const {
  BinaryMask m(width, height);
  for (std::size_t i = 0; i < p_fg.size(); ++i) m.data[i] = p_fg[i] > threshold ? 1 : 0;
  return m;
}

LearnerModel LearnerModel::initialize(int hidden_dim, int patch_radius, const std::vector<int>& groups, Rng& rng) {
  if (hidden_dim < 1 || patch_radius < 0) throw Error(ErrorCode::ConfigError, kModule, "invalid model dimensions");
  LearnerModel m;
  m.hidden_dim = hidden_dim;
  m.patch_radius = patch_radius;
  const int d = m.feat_dim();
  m.W1.resize(hidden_dim, d);
  const double s1 = std::sqrt(2.0 / d);
  // Column-major fill keeps the draw order tied to the flat layout.
  for (Eigen::Index c = 0; c < m.W1.cols(); ++c) {
    for (Eigen::Index r = 0; r < m.W1.rows(); ++r) m.W1(r, c) = s1 * standard_normal(rng);
  }
  m.W1.col(d - 1).setZero();
  m.b1 = Eigen::VectorXd::Constant(hidden_dim, 0.01);
  m.w2.resize(hidden_dim);
  const double s2 = std::sqrt(1.0 / hidden_dim);
  for (Eigen::Index i = 0; i < m.w2.size(); ++i) m.w2[i] = s2 * standard_normal(rng);
  m.b2 = 0.0;
  for (int g : groups) {
    m.film[g] = FilmParams{Eigen::VectorXd::Ones(hidden_dim), Eigen::VectorXd::Zero(hidden_dim)};
  }
  return m;
}

LearnerModel LearnerModel::zeros_like() const {
  LearnerModel z;
  z.patch_radius = patch_radius;
  z.hidden_dim = hidden_dim;
  z.level_center = level_center;
  z.W1 = Eigen::MatrixXd::Zero(W1.rows(), W1.cols());
  z.b1 = Eigen::VectorXd::Zero(b1.size());
  for (const auto& [g, f] : film) {
    z.film[g] = FilmParams{Eigen::VectorXd::Zero(f.gamma.size()), Eigen::VectorXd::Zero(f.beta.size())};
  }
  z.w2 = Eigen::VectorXd::Zero(w2.size());
  z.b2 = 0.0;
  return z;
}

std::size_t LearnerModel::parameter_count() const {
  std::size_t n = static_cast<std::size_t>(W1.size() + b1.size() + w2.size() + 1);
  for (const auto& [g, f] : film) n += static_cast<std::size_t>(f.gamma.size() + f.beta.size());
  return n;
}

std::vector<double> LearnerModel::flatten() const {
  std::vector<double> flat;
  flat.reserve(parameter_count());
  flat.insert(flat.end(), W1.data(), W1.data() + W1.size());
  flat.insert(flat.end(), b1.data(), b1.data() + b1.size());
  for (const auto& [g, f] : film) {
    flat.insert(flat.end(), f.gamma.data(), f.gamma.data() + f.gamma.size());
    flat.insert(flat.end(), f.beta.data(), f.beta.data() + f.beta.size());
  }
  flat.insert(flat.end(), w2.data(), w2.data() + w2.size());
  flat.push_back(b2);
  return flat;
}

void LearnerModel::assign(std::span<const double> flat) {
  if (flat.size() != parameter_count()) {
    throw Error(ErrorCode::ShapeMismatch, kModule, "flat parameter vector has wrong length");
  }
  std::size_t k = 0;
  auto take = [&](double* dst, Eigen::Index n) {
    std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(k), n, dst);
    k += static_cast<std::size_t>(n);
  };
  take(W1.data(), W1.size());
  take(b1.data(), b1.size());
  for (auto& [g, f] : film) {
    take(f.gamma.data(), f.gamma.size());
    take(f.beta.data(), f.beta.size());
  }
  take(w2.data(), w2.size());
  b2 = flat[k];
}

bool LearnerModel::all_finite() const {
  const auto flat = flatten();
  return std::all_of(flat.begin(), flat.end(), [](double v) { return std::isfinite(v); });
}

double background_level(const GrayImage& image) {
  if (image.values.empty()) throw Error(ErrorCode::InvalidArgument, kModule, "empty image");
  std::vector<double> v = image.values;
  const auto k = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 10);
  std::nth_element(v.begin(), k, v.end());
  return *k;
}

Eigen::MatrixXd featurize(const GrayImage& image, int patch_radius, double level_center) {
  Eigen::MatrixXd x;
  featurize_into(image, patch_radius, level_center, x);
  return x;
}

ForwardResult forward(const LearnerModel& model, const GrayImage& image, int group,
                      std::optional<int> condition_group) {
  const FilmParams& film = film_for(model, condition_group.value_or(group));
  ImagePass pass = run_pass(model, image, &film);
  ForwardResult out;
  out.prob = ProbMap{image.width, image.height,
                     std::vector<double>(pass.probs.data(), pass.probs.data() + pass.probs.size())};
  out.hidden = std::move(pass.hidden);
  out.logits = std::move(pass.logits);
  return out;
}

ProbMap predict(const LearnerModel& model, const GrayImage& image, int force_group) {
  return forward(model, image, force_group, force_group).prob;
}

Eigen::VectorXd gap_features(const LearnerModel& model, const GrayImage& image, int /*group*/) {
  // Pre-modulation activations do not depend on the group.
  const ImagePass pass = run_pass(model, image, nullptr);
  return pass.hidden.rowwise().mean();
}

SegLossParts seg_loss_parts(const ProbMap& prob, const BinaryMask& target, std::span<const double> weights,
                            double dice_weight) {
  if (prob.width != target.width || prob.height != target.height) {
    throw Error(ErrorCode::ShapeMismatch, kModule, "probability map and target differ in size");
  }
  const std::size_t n = target.size();
  check_weights(weights, n);
  auto w_at = [&](std::size_t i) { return weights.empty() ? 1.0 : weights[i]; };
  double w_sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) w_sum += w_at(i);
  if (!(w_sum > 0.0)) throw Error(ErrorCode::AllMaskedOut, kModule, "all pixel weights are zero");

  const double norm = static_cast<double>(n) / w_sum;
  double ce = 0.0;
  double inter = 0.0;
  double denom = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double w = w_at(i);
    const double p = std::clamp(prob.p_fg[i], 0.0, 1.0);
    const double t = target.data[i];
    const double pixel_ce = t > 0.5 ? -std::log(std::max(p, 1e-300)) : -std::log1p(-std::min(p, 1.0 - 1e-16));
    if (w != 0.0) ce += w * pixel_ce;
    inter += w * norm * p * t;
    denom += w * norm * (p + t);
  }
  SegLossParts parts;
  parts.ce = ce / w_sum;
  parts.dice = 1.0 - (2.0 * inter + kDiceSmoothing) / (denom + kDiceSmoothing);
  parts.total = parts.ce + dice_weight * parts.dice;
  return parts;
}

double seg_loss(const ProbMap& prob, const BinaryMask& target, std::span<const double> weights,
                double dice_weight) {
  return seg_loss_parts(prob, target, weights, dice_weight).total;
}

std::vector<double> asym_weights(const BinaryMask& mask_obs, int group, int biased_group, int band_width) {
  if (band_width < 1) throw Error(ErrorCode::InvalidArgument, kModule, "boundary width must be >= 1");
  std::vector<double> w(mask_obs.size(), 1.0);
  if (group != biased_group) return w;
  const BinaryMask band = boundary_band(mask_obs, band_width);
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (band.data[i]) w[i] = 0.0;
  }
  return w;
}

LossAndGrad loss_and_grad(const LearnerModel& model, std::span<const BatchItem> batch, const LossSettings& settings) {
  if (batch.empty()) throw Error(ErrorCode::InvalidArgument, kModule, "empty batch");
  const double inv_b = 1.0 / static_cast<double>(batch.size());

  Workspace& ws = workspace();
  if (ws.passes.size() < batch.size()) ws.passes.resize(batch.size());
  std::span<ImagePass> passes(ws.passes.data(), batch.size());
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const BatchItem& item = batch[b];
    if (item.image->width != item.target->width || item.image->height != item.target->height) {
      throw Error(ErrorCode::ShapeMismatch, kModule, "image and target differ in size");
    }
    const FilmParams& film = film_for(model, item.group);
    run_pass(model, *item.image, settings.conditioned ? &film : nullptr, passes[b]);
  }

  LossAndGrad out;
  out.grad = model.zeros_like();
  out.per_sample_loss.resize(batch.size());
  std::vector<Eigen::VectorXd> d_logits(batch.size());
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const BatchItem& item = batch[b];
    const double li = image_seg_loss(passes[b].logits, passes[b].probs, *item.target, item.weights,
                                     settings.dice_weight, &d_logits[b]);
    out.per_sample_loss[b] = li;
    out.seg += li * inv_b;
    d_logits[b] *= inv_b;
  }

  std::vector<Eigen::MatrixXd> d_hidden_extra(batch.size());
  if (settings.penalty != PenaltyKind::None && settings.penalty_weight != 0.0) {
    std::vector<PenaltyView> views(batch.size());
    for (std::size_t b = 0; b < batch.size(); ++b) {
      views[b] = PenaltyView{&passes[b].logits, &passes[b].probs, &passes[b].hidden, batch[b].target, batch[b].group};
    }
    const PenaltyResult pen = penalty(settings.penalty, views, settings.subsample_seed, true);
    out.penalty = pen.value;
    out.single_group_batch = pen.single_group;
    for (std::size_t b = 0; b < batch.size(); ++b) {
      if (!pen.d_logits.empty() && pen.d_logits[b].size() > 0) d_logits[b] += settings.penalty_weight * pen.d_logits[b];
      if (!pen.d_hidden.empty() && pen.d_hidden[b].size() > 0) d_hidden_extra[b] = settings.penalty_weight * pen.d_hidden[b];
    }
  }
  out.loss = out.seg + settings.penalty_weight * out.penalty;

  // Backward pass, accumulated in batch order.
  Eigen::MatrixXd& g_mod = ws.g_mod;
  Eigen::MatrixXd& g_pre = ws.g_pre;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const ImagePass& pass = passes[b];
    const Eigen::VectorXd& gz = d_logits[b];
    out.grad.w2.noalias() += pass.modulated * gz;
    out.grad.b2 += gz.sum();
    g_mod.resize(model.hidden_dim, gz.size());
    g_mod.noalias() = model.w2 * gz.transpose();  // dL/dh', hidden x N
    if (settings.conditioned) {
      FilmParams& gf = out.grad.film.at(batch[b].group);
      gf.gamma.noalias() += (pass.hidden.cwiseProduct(g_mod)).rowwise().sum();
      gf.beta.noalias() += g_mod.rowwise().sum();
      const FilmParams& film = film_for(model, batch[b].group);
      g_mod.array().colwise() *= film.gamma.array();
    }
    if (d_hidden_extra[b].size() > 0) g_mod += d_hidden_extra[b];
    g_pre = (pass.pre.array() > 0.0).select(g_mod, 0.0);
    out.grad.W1.noalias() += g_pre * pass.features.transpose();
    out.grad.b1.noalias() += g_pre.rowwise().sum();
  }
  return out;
}

}  // namespace segbias
