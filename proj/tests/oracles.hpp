#pragma once

// Slow, obviously-correct reimplementations used as test references.

#include <cstdint>
#include <string>
#include <vector>

#include "segbias/bias_stats.hpp"
#include "segbias/learner.hpp"
#include "segbias/mask_ops.hpp"
#include "segbias/rng.hpp"

namespace oracle {

using segbias::BinaryMask;

BinaryMask random_mask(segbias::Rng& rng, int max_side, double density = 0.5);
BinaryMask disk_mask(int w, int h, double cx, double cy, double r);

BinaryMask erode(const BinaryMask& m, int r);
BinaryMask dilate(const BinaryMask& m, int r);
BinaryMask band(const BinaryMask& m, int w);
/// Minimum over all opposite-class pixels of the Euclidean distance.
std::vector<double> signed_distance(const BinaryMask& m);

/// Pixels of m with a 4-neighbour of the other class inside the frame.
std::vector<std::pair<int, int>> boundary_pixels(const BinaryMask& m);

/// Pearson chi-square from the textbook sum over (O - E)^2 / E.
double chi_square(const std::vector<std::vector<double>>& table);

/// p_fg for every pixel by plain loops over the model definition.
std::vector<double> forward(const segbias::LearnerModel& model, const segbias::GrayImage& image, int film_group);

/// Weighted CE plus soft Dice, one pixel at a time.
double seg_loss(const std::vector<double>& p, const std::vector<std::uint8_t>& t, const std::vector<double>& w,
                double dice_weight);

struct GradCheck {
  double max_rel_err = 0.0;
  std::size_t worst_index = 0;
  std::size_t n_params = 0;
  std::size_t kinks = 0;  // coordinates skipped because the loss is not smooth within the step
};

/// Forward and backward slopes further apart than this (relative) mean the
/// step straddles a kink (a ReLU switching or the median bandwidth changing
/// its pair), where a central difference is not a derivative estimate.
inline constexpr double kKinkTolerance = 1e-2;

/// Central finite differences of loss_and_grad(...).loss against its
/// analytic gradient, over every smooth coordinate. Error is
/// |a - f| / max(|a|, |f|, 1e-6).
GradCheck gradient_check(const segbias::LearnerModel& model, const std::vector<segbias::BatchItem>& batch,
                         const segbias::LossSettings& settings, double step = 1e-5);

struct GradCase {
  std::string name;
  segbias::LearnerModel model;
  std::vector<segbias::GrayImage> images;
  std::vector<BinaryMask> masks;
  std::vector<int> groups;
  std::vector<std::vector<double>> weights;
  segbias::LossSettings settings;

  std::vector<segbias::BatchItem> batch() const;
};

/// The random gradient-check configurations: every penalty, with and without
/// FiLM conditioning and with asymmetric weights. Index i is seeded by i.
std::vector<GradCase> gradient_cases();

/// A mask and two corruptions removing and adding the same number of pixels.
struct CorruptionPair {
  BinaryMask clean;
  BinaryMask eroded;
  BinaryMask dilated;
};
CorruptionPair equal_count_corruption(segbias::Rng& rng);

}  // namespace oracle
