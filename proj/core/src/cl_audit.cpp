#include "segbias/cl_audit.hpp"

#include "segbias/error.hpp"
#include "segbias/parallel.hpp"

namespace segbias {

namespace {

constexpr const char* kModule = "cl_audit";

void check_fold_split(const Corpus& corpus, std::span<const std::size_t> train, int fold) {
  bool group[2] = {false, false};
  bool cls[2] = {false, false};
  for (std::size_t i : train) {
    const Sample& s = corpus.samples[i];
    if (s.group == 0 || s.group == 1) group[s.group] = true;
    for (std::uint8_t v : s.mask_obs.data) {
      cls[v] = true;
      if (cls[0] && cls[1]) break;
    }
  }
  if (!group[0] || !group[1] || !cls[0] || !cls[1]) {
    throw Error(ErrorCode::FoldDegenerate, kModule,
                "training split for fold " + std::to_string(fold) + " misses a class or a group");
  }
}

}  // namespace

std::vector<std::size_t> FoldPlan::train_indices(int fold) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < assignment.size(); ++i) {
    if (assignment[i] != fold) out.push_back(i);
  }
  return out;
}

std::vector<std::size_t> FoldPlan::test_indices(int fold) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < assignment.size(); ++i) {
    if (assignment[i] == fold) out.push_back(i);
  }
  return out;
}

FoldPlan make_folds(const Corpus& corpus, int k, std::uint64_t seed) {
  if (k < 2) throw Error(ErrorCode::ConfigError, kModule, "K must be >= 2");
  if (corpus.samples.size() < static_cast<std::size_t>(k)) {
    throw Error(ErrorCode::FoldDegenerate, kModule, "fewer samples than folds");
  }
  FoldPlan plan;
  plan.k = k;
  plan.seed = seed;
  plan.assignment.assign(corpus.samples.size(), 0);
  // Each group is shuffled and dealt round-robin; the deal continues where
  // the previous group stopped so overall fold sizes differ by at most one.
  Rng rng = make_stream(seed, "cl_audit/folds");
  int next = 0;
  for (int g = 0; g <= 1; ++g) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < corpus.samples.size(); ++i) {
      if (corpus.samples[i].group == g) members.push_back(i);
    }
    shuffle(rng, members);
    for (std::size_t i : members) {
      plan.assignment[i] = next;
      next = (next + 1) % k;
    }
  }
  return plan;
}

OutOfFold crossval_probs(const Corpus& corpus, int k, const TrainConfig& config) {
  FoldPlan plan = make_folds(corpus, k, config.seed);
  TrainConfig audit_config = config;
  audit_config.mitigation = Mitigation::None;
  audit_config.penalty = PenaltyKind::None;
  audit_config.penalty_weight = 0.0;
  validate(audit_config);

  std::vector<std::vector<std::size_t>> train_sets(static_cast<std::size_t>(k));
  for (int f = 0; f < k; ++f) {
    train_sets[static_cast<std::size_t>(f)] = plan.train_indices(f);
    check_fold_split(corpus, train_sets[static_cast<std::size_t>(f)], f);
  }

  OutOfFold out;
  out.probs.resize(corpus.samples.size());
  out.predicted_by_fold.assign(corpus.samples.size(), -1);
  parallel_for(static_cast<std::size_t>(k), [&](std::size_t f) {
    TrainConfig fold_config = audit_config;
    fold_config.seed = make_stream(config.seed, "cl_audit/fold_seed", f)();
    const TrainResult model = train_subset(corpus, train_sets[f], fold_config);
    for (std::size_t i : plan.test_indices(static_cast<int>(f))) {
      out.probs[i] = predict(model.model, corpus.samples[i].image, corpus.samples[i].group);
      out.predicted_by_fold[i] = static_cast<int>(f);
    }
  });
  out.plan = std::move(plan);
  return out;
}

Thresholds class_thresholds(std::span<const ProbMap> probs, const Corpus& corpus) {
  if (probs.size() != corpus.samples.size()) {
    throw Error(ErrorCode::ShapeMismatch, kModule, "one probability map per sample is required");
  }
  double sum[2] = {0.0, 0.0};
  std::int64_t count[2] = {0, 0};
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const Sample& s = corpus.samples[i];
    if (probs[i].size() != s.mask_obs.size()) {
      throw Error(ErrorCode::ShapeMismatch, kModule, "probability map size differs from mask", s.id);
    }
    for (std::size_t p = 0; p < s.mask_obs.size(); ++p) {
      const double fg = probs[i].p_fg[p];
      if (s.mask_obs.data[p]) {
        sum[1] += fg;
        ++count[1];
      } else {
        sum[0] += 1.0 - fg;
        ++count[0];
      }
    }
  }
  if (count[0] == 0 || count[1] == 0) {
    throw Error(ErrorCode::EmptyClass, kModule, "a class has no observed pixels");
  }
  return Thresholds{sum[0] / static_cast<double>(count[0]), sum[1] / static_cast<double>(count[1])};
}

BinaryMask confident_labels(const ProbMap& prob, const Thresholds& t) {
  if (!(t.t_bg > 0.0) || !(t.t_fg > 0.0)) throw Error(ErrorCode::InvalidArgument, kModule, "thresholds must be > 0");
  BinaryMask out(prob.width, prob.height);
  for (std::size_t p = 0; p < prob.size(); ++p) {
    const double fg = prob.p_fg[p];
    const double bg = 1.0 - fg;
    const double r_fg = fg / t.t_fg;
    const double r_bg = bg / t.t_bg;
    if (std::max(r_fg, r_bg) >= 1.0) {
      out.data[p] = r_fg > r_bg ? 1 : 0;
    } else {
      out.data[p] = fg > bg ? 1 : 0;
    }
  }
  return out;
}

double JointDistribution::q_sum() const {
  double s = 0.0;
  for (int a = 0; a < 2; ++a) {
    for (int b = 0; b < 2; ++b) s += q(a, b);
  }
  return s;
}

JointDistribution joint_distribution(const Corpus& corpus, std::span<const BinaryMask> confident,
                                     std::optional<int> group) {
  if (confident.size() != corpus.samples.size()) {
    throw Error(ErrorCode::ShapeMismatch, kModule, "one confident map per sample is required");
  }
  JointDistribution jd;
  jd.group = group;
  for (std::size_t i = 0; i < confident.size(); ++i) {
    const Sample& s = corpus.samples[i];
    if (group && s.group != *group) continue;
    if (!confident[i].same_shape(s.mask_obs)) {
      throw Error(ErrorCode::ShapeMismatch, kModule, "confident map size differs from mask", s.id);
    }
    for (std::size_t p = 0; p < s.mask_obs.size(); ++p) {
      ++jd.counts[s.mask_obs.data[p]][confident[i].data[p]];
    }
    jd.total += static_cast<std::int64_t>(s.mask_obs.size());
  }
  return jd;
}

ErrorRates error_rates(const JointDistribution& q) {
  ErrorRates r;
  r.omission = q.q(0, 1);
  r.commission = q.q(1, 0);
  r.error = r.omission + r.commission;
  return r;
}

}  // namespace segbias
