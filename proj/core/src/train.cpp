#include "segbias/train.hpp"

#include <cmath>
#include <numeric>

#include "segbias/error.hpp"

namespace segbias {

namespace {

constexpr const char* kModule = "learner";

constexpr double kAdamBeta1 = 0.9;
constexpr double kAdamBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;
constexpr double kTieTolerance = 1e-9;
constexpr double kLowConfidenceGap = 1e-3;

class Adam {
 public:
  Adam(std::size_t n, double lr) : lr_(lr), m_(n, 0.0), v_(n, 0.0) {}

  void step(std::vector<double>& params, const std::vector<double>& grad) {
    ++t_;
    const double c1 = 1.0 - std::pow(kAdamBeta1, t_);
    const double c2 = 1.0 - std::pow(kAdamBeta2, t_);
    for (std::size_t i = 0; i < params.size(); ++i) {
      const double g = grad[i];
      m_[i] = kAdamBeta1 * m_[i] + (1.0 - kAdamBeta1) * g;
      v_[i] = kAdamBeta2 * v_[i] + (1.0 - kAdamBeta2) * g * g;
      params[i] -= lr_ * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + kAdamEps);
    }
  }

 private:
  double lr_;
  int t_ = 0;
  std::vector<double> m_;
  std::vector<double> v_;
};

struct Phase {
  bool conditioned = false;
  std::optional<int> masked_group;  // boundary weights zeroed for this group
  std::string name = "train";
};

struct Trainer {
  const Corpus& corpus;
  std::vector<std::size_t> indices;
  const TrainConfig& config;
  LearnerModel model;
  std::vector<double> params;
  Adam adam;
  std::size_t step = 0;
  std::size_t total_steps = 0;
  std::size_t single_group_batches = 0;
  // Weight maps depend only on (sample, masked group); cached per phase.
  std::vector<std::vector<double>> weights;
  std::optional<int> weights_for;

  Trainer(const Corpus& c, std::span<const std::size_t> idx, const TrainConfig& cfg)
      : corpus(c), indices(idx.begin(), idx.end()), config(cfg), adam(0, cfg.learning_rate) {
    Rng init = make_stream(cfg.seed, "learner/init");
    model = LearnerModel::initialize(cfg.hidden_dim, cfg.patch_radius, {0, 1}, init);
    double level_sum = 0.0;
    for (std::size_t i : indices) level_sum += background_level(corpus.samples[i].image);
    model.level_center = indices.empty() ? 0.0 : level_sum / static_cast<double>(indices.size());
    params = model.flatten();
    adam = Adam(params.size(), cfg.learning_rate);
    const std::size_t per_epoch = (indices.size() + static_cast<std::size_t>(cfg.batch) - 1) /
                                  static_cast<std::size_t>(cfg.batch);
    total_steps = per_epoch * static_cast<std::size_t>(cfg.epochs);
  }

  void prepare_weights(const Phase& phase) {
    if (weights_for == phase.masked_group && !weights.empty()) return;
    weights.assign(indices.size(), {});
    if (phase.masked_group) {
      for (std::size_t k = 0; k < indices.size(); ++k) {
        const Sample& s = corpus.samples[indices[k]];
        if (s.group == *phase.masked_group) {
          weights[k] = asym_weights(s.mask_obs, s.group, *phase.masked_group, config.boundary_width);
        }
      }
    }
    weights_for = phase.masked_group;
  }

  double current_lambda() const {
    if (config.penalty == PenaltyKind::None) return 0.0;
    if (!config.penalty_ramp) return config.penalty_weight;
    const double ramp_steps = 0.5 * static_cast<double>(total_steps);
    if (ramp_steps <= 0.0) return config.penalty_weight;
    return config.penalty_weight * std::min(1.0, static_cast<double>(step) / ramp_steps);
  }

  // Runs one epoch; returns per-position per-sample losses (aligned with indices).
  std::vector<double> run_epoch(int epoch, const Phase& phase, bool with_penalty) {
    prepare_weights(phase);
    Rng order_rng = make_stream(config.seed, "learner/order", static_cast<std::uint64_t>(epoch));
    const std::vector<std::size_t> order = permutation(order_rng, indices.size());
    std::vector<double> losses(indices.size(), 0.0);
    const std::size_t bsz = static_cast<std::size_t>(config.batch);
    for (std::size_t start = 0; start < order.size(); start += bsz) {
      const std::size_t stop = std::min(order.size(), start + bsz);
      std::vector<BatchItem> batch;
      batch.reserve(stop - start);
      for (std::size_t k = start; k < stop; ++k) {
        const Sample& s = corpus.samples[indices[order[k]]];
        batch.push_back(BatchItem{&s.image, &s.mask_obs, s.group, weights[order[k]]});
      }
      LossSettings settings;
      settings.dice_weight = config.dice_weight;
      settings.conditioned = phase.conditioned;
      if (with_penalty) {
        settings.penalty = config.penalty;
        settings.penalty_weight = current_lambda();
      }
      settings.subsample_seed = make_stream(config.seed, "learner/subsample", step)();
      LossAndGrad lg = loss_and_grad(model, batch, settings);
      if (lg.single_group_batch) ++single_group_batches;
      for (std::size_t k = start; k < stop; ++k) losses[order[k]] = lg.per_sample_loss[k - start];
      adam.step(params, lg.grad.flatten());
      model.assign(params);
      ++step;
    }
    if (!model.all_finite()) {
      throw Error(ErrorCode::InvalidArgument, kModule, "training diverged (non-finite parameters)");
    }
    return losses;
  }

  void record(std::vector<HistoryRow>& history, int epoch, const std::vector<double>& losses,
              const std::string& phase) const {
    for (int g = 0; g <= 1; ++g) {
      double sum = 0.0;
      std::size_t n = 0;
      for (std::size_t k = 0; k < indices.size(); ++k) {
        if (corpus.samples[indices[k]].group != g) continue;
        sum += losses[k];
        ++n;
      }
      history.push_back(HistoryRow{epoch, g, n ? sum / static_cast<double>(n) : 0.0, phase});
    }
  }
};

void check_corpus(const Corpus& corpus, std::span<const std::size_t> indices) {
  if (indices.empty()) throw Error(ErrorCode::InvalidArgument, kModule, "training set is empty");
  for (std::size_t i : indices) {
    if (i >= corpus.samples.size()) throw Error(ErrorCode::InvalidArgument, kModule, "sample index out of range");
    const int g = corpus.samples[i].group;
    if (g != 0 && g != 1) throw Error(ErrorCode::UnknownGroup, kModule, "group must be 0 or 1", corpus.samples[i].id);
  }
}

int resolve_biased(const Corpus& corpus, const TrainConfig& config) {
  const int g = config.biased_group.value_or(corpus.biased_group());
  if (g != 0 && g != 1) throw Error(ErrorCode::ConfigError, kModule, "biased group must be 0 or 1");
  return g;
}

TrainResult run_auto(const Corpus& corpus, std::span<const std::size_t> indices, const TrainConfig& config) {
  Trainer t(corpus, indices, config);
  TrainResult out;
  out.conditioned = true;
  std::array<double, 2> sum{0.0, 0.0};
  std::array<std::size_t, 2> count{0, 0};
  const Phase warmup{true, std::nullopt, "warmup"};
  for (int e = 0; e < config.warmup_epochs; ++e) {
    const auto losses = t.run_epoch(e, warmup, false);
    t.record(out.history, e, losses, warmup.name);
    for (std::size_t k = 0; k < t.indices.size(); ++k) {
      const int g = corpus.samples[t.indices[k]].group;
      sum[g] += losses[k];
      ++count[g];
    }
  }
  for (int g = 0; g <= 1; ++g) {
    out.warmup_mean_loss[g] = count[g] ? sum[g] / static_cast<double>(count[g]) : 0.0;
  }
  const double gap = out.warmup_mean_loss[1] - out.warmup_mean_loss[0];
  int clean = 0;
  if (count[0] == 0) {
    clean = 1;
  } else if (count[1] != 0 && gap < -kTieTolerance) {
    clean = 1;
  }
  out.discovered_clean_group = clean;
  out.low_confidence = std::abs(gap) < kLowConfidenceGap || count[0] == 0 || count[1] == 0;
  out.inference_group = clean;

  const Phase main{true, 1 - clean, "train"};
  for (int e = config.warmup_epochs; e < config.epochs; ++e) {
    const auto losses = t.run_epoch(e, main, true);
    t.record(out.history, e, losses, main.name);
  }
  out.model = std::move(t.model);
  out.single_group_batches = t.single_group_batches;
  return out;
}

}  // namespace

std::string to_string(Mitigation m) {
  switch (m) {
    case Mitigation::None: return "none";
    case Mitigation::Conditioned: return "conditioned";
    case Mitigation::AsymMask: return "asym_mask";
    case Mitigation::Combined: return "combined";
    case Mitigation::Auto: return "auto";
  }
  return "unknown";
}

Mitigation parse_mitigation(const std::string& name) {
  if (name == "none") return Mitigation::None;
  if (name == "conditioned") return Mitigation::Conditioned;
  if (name == "asym_mask") return Mitigation::AsymMask;
  if (name == "combined") return Mitigation::Combined;
  if (name == "auto") return Mitigation::Auto;
  throw Error(ErrorCode::ConfigError, kModule, "unknown mitigation '" + name + "'");
}

void validate(const TrainConfig& c) {
  auto fail = [](const std::string& msg) { throw Error(ErrorCode::ConfigError, kModule, msg); };
  if (c.epochs < 1) fail("epochs must be >= 1");
  if (c.batch < 1) fail("batch must be >= 1");
  if (!(c.learning_rate > 0.0) || !std::isfinite(c.learning_rate)) fail("learning_rate must be > 0");
  if (c.boundary_width < 1) fail("boundary_width must be >= 1");
  if (!(c.penalty_weight >= 0.0) || !std::isfinite(c.penalty_weight)) fail("penalty weight must be >= 0");
  if (!(c.dice_weight >= 0.0) || !std::isfinite(c.dice_weight)) fail("dice_weight must be >= 0");
  if (c.hidden_dim < 1) fail("hidden_dim must be >= 1");
  if (c.patch_radius < 0) fail("patch_radius must be >= 0");
  if (c.mitigation == Mitigation::Auto && (c.warmup_epochs < 1 || c.warmup_epochs >= c.epochs)) {
    fail("auto mode needs 1 <= warmup_epochs < epochs");
  }
  if (c.biased_group && *c.biased_group != 0 && *c.biased_group != 1) fail("biased_group must be 0 or 1");
}

TrainResult train_subset(const Corpus& corpus, std::span<const std::size_t> indices, const TrainConfig& config) {
  validate(config);
  check_corpus(corpus, indices);
  if (config.mitigation == Mitigation::Auto) return run_auto(corpus, indices, config);

  const int biased = resolve_biased(corpus, config);
  Phase phase;
  phase.conditioned = config.mitigation == Mitigation::Conditioned || config.mitigation == Mitigation::Combined;
  if (config.mitigation == Mitigation::AsymMask || config.mitigation == Mitigation::Combined) {
    phase.masked_group = biased;
  }
  Trainer t(corpus, indices, config);
  TrainResult out;
  for (int e = 0; e < config.epochs; ++e) {
    const auto losses = t.run_epoch(e, phase, true);
    t.record(out.history, e, losses, phase.name);
  }
  out.model = std::move(t.model);
  out.conditioned = phase.conditioned;
  if (phase.conditioned) out.inference_group = 1 - biased;
  out.single_group_batches = t.single_group_batches;
  return out;
}

TrainResult train(const Corpus& corpus, const TrainConfig& config) {
  std::vector<std::size_t> all(corpus.samples.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  return train_subset(corpus, all, config);
}

TrainResult auto_condition_train(const Corpus& corpus, const TrainConfig& config) {
  TrainConfig c = config;
  c.mitigation = Mitigation::Auto;
  return train(corpus, c);
}

ProbMap infer(const TrainResult& result, const Sample& sample) {
  return predict(result.model, sample.image, result.inference_group.value_or(sample.group));
}

}  // namespace segbias
