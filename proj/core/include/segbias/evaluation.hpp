#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include "segbias/mask_ops.hpp"
#include "segbias/synth_corpus.hpp"
#include "segbias/train.hpp"

namespace segbias {

/// Both-empty pairs score 1; throws ShapeMismatch on unequal shapes.
double dice(const BinaryMask& a, const BinaryMask& b);
double iou(const BinaryMask& a, const BinaryMask& b);

enum class Reference { Observed, Clean };

std::string to_string(Reference r);
Reference parse_reference(const std::string& name);

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation (n - 1); 0 when n < 2
  std::size_t n = 0;
};

MeanStd mean_std(std::span<const double> values);

struct GroupScores {
  std::vector<double> dice;  // percent, one per sample
  std::vector<double> iou;
};

/// Per-group metrics of one run. Index by group id.
struct EvalReport {
  Reference reference = Reference::Observed;
  int clean_group = 0;
  std::size_t n_seeds = 1;
  std::array<MeanStd, 2> dice{};
  std::array<MeanStd, 2> iou{};

  double delta_dice() const { return dice[clean_group].mean - dice[1 - clean_group].mean; }
  double delta_iou() const { return iou[clean_group].mean - iou[1 - clean_group].mean; }
};

/// Scores predicted masks against the observed or the clean reference. For
/// the clean reference a sample without a retained clean mask is scored
/// against mask_obs unless it is corrupted (then MissingCleanMask).
EvalReport evaluate_masks(const Corpus& corpus, std::span<const BinaryMask> predicted, Reference reference);

/// Thresholds the model's probabilities at 0.5 under its inference rule.
std::vector<BinaryMask> predict_masks(const TrainResult& model, const Corpus& corpus);
EvalReport evaluate(const TrainResult& model, const Corpus& corpus, Reference reference);

/// Mean and spread across seeds of each run's per-group mean.
EvalReport aggregate(std::span<const EvalReport> runs);

}  // namespace segbias
