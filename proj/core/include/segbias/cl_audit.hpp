#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "segbias/learner.hpp"
#include "segbias/synth_corpus.hpp"
#include "segbias/train.hpp"

namespace segbias {

/// Group-stratified K-fold split. assignment[i] is the fold of sample i.
struct FoldPlan {
  int k = 5;
  std::uint64_t seed = 1;
  std::vector<int> assignment;

  std::vector<std::size_t> train_indices(int fold) const;
  std::vector<std::size_t> test_indices(int fold) const;
};

FoldPlan make_folds(const Corpus& corpus, int k, std::uint64_t seed);

struct OutOfFold {
  FoldPlan plan;
  std::vector<ProbMap> probs;          // one per sample, corpus order
  std::vector<int> predicted_by_fold;  // fold whose model produced probs[i]
};

/// Trains one unconditioned learner per fold on the observed labels and
/// predicts the held-out samples. Throws FoldDegenerate when a training split
/// misses a class or a group.
OutOfFold crossval_probs(const Corpus& corpus, int k, const TrainConfig& config);

struct Thresholds {
  double t_bg = 0.0;
  double t_fg = 0.0;
};

/// t_j = mean of P(j) over every pixel observed as class j, across the corpus.
Thresholds class_thresholds(std::span<const ProbMap> probs, const Corpus& corpus);

/// Confident label per pixel: argmax of P(j)/t_j when the best ratio reaches
/// 1, plain argmax otherwise. Ties go to background.
BinaryMask confident_labels(const ProbMap& prob, const Thresholds& thresholds);

/// 2x2 counts indexed [observed][confident].
struct JointDistribution {
  std::array<std::array<std::int64_t, 2>, 2> counts{};
  std::int64_t total = 0;
  std::optional<int> group;  // nullopt for the global scope

  double q(int observed, int confident) const {
    return total > 0 ? static_cast<double>(counts[observed][confident]) / static_cast<double>(total) : 0.0;
  }
  double q_sum() const;
};

/// Global distribution when group is nullopt, else restricted to that group.
JointDistribution joint_distribution(const Corpus& corpus, std::span<const BinaryMask> confident,
                                     std::optional<int> group = std::nullopt);

struct ErrorRates {
  double omission = 0.0;    // observed BG, confident FG
  double commission = 0.0;  // observed FG, confident BG
  double error = 0.0;
};

ErrorRates error_rates(const JointDistribution& q);

}  // namespace segbias
