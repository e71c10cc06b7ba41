#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "segbias/image.hpp"
#include "segbias/mask_ops.hpp"
#include "segbias/rng.hpp"

namespace segbias {

/// Per-pixel foreground probability. P(background) is 1 - p_fg.
struct ProbMap {
  int width = 0;
  int height = 0;
  std::vector<double> p_fg;

  double operator()(int x, int y) const { return p_fg[static_cast<std::size_t>(y) * width + x]; }
  std::size_t size() const { return p_fg.size(); }
  /// Foreground where p_fg > threshold.
  BinaryMask binarize(double threshold = 0.5) const;

  bool operator==(const ProbMap&) const = default;
};

struct FilmParams {
  Eigen::VectorXd gamma;
  Eigen::VectorXd beta;
};

/// One-hidden-layer pixel classifier over image patches, with per-group
/// feature-wise affine modulation of the hidden layer:
///   h  = relu(W1 x + b1)
///   h' = gamma_g * h + beta_g
///   p  = sigmoid(w2 . h' + b2)
struct LearnerModel {
  int patch_radius = 2;
  int hidden_dim = 16;
  Eigen::MatrixXd W1;  // hidden_dim x feat_dim
  Eigen::VectorXd b1;
  std::map<int, FilmParams> film;
  Eigen::VectorXd w2;
  double b2 = 0.0;
  double level_center = 0.0;  // fixed at training start, not a trained parameter

  static int feat_dim_for(int patch_radius) { return (2 * patch_radius + 1) * (2 * patch_radius + 1) + 3; }
  int feat_dim() const { return feat_dim_for(patch_radius); }

  /// He-initialised weights with a zero column for the level feature; FiLM
  /// starts at the identity (gamma = 1, beta = 0).
  static LearnerModel initialize(int hidden_dim, int patch_radius, const std::vector<int>& groups, Rng& rng);
  /// Same shape, every parameter zero (gradient accumulator).
  LearnerModel zeros_like() const;

  std::size_t parameter_count() const;
  /// Flat order: W1 (column-major), b1, per group ascending {gamma, beta}, w2, b2.
  std::vector<double> flatten() const;
  void assign(std::span<const double> flat);
  bool all_finite() const;
  bool has_group(int group) const { return film.count(group) != 0; }
};

/// 10th percentile of the image intensities.
double background_level(const GrayImage& image);

/// Features, one column per pixel (row-major pixel order): the edge-clamped
/// (2p+1)^2 intensity patch minus the background level, x/(W-1), y/(H-1),
/// and the background level minus level_center.
Eigen::MatrixXd featurize(const GrayImage& image, int patch_radius, double level_center = 0.0);

struct ForwardResult {
  ProbMap prob;
  Eigen::MatrixXd hidden;   // pre-modulation activations h, hidden_dim x N
  Eigen::VectorXd logits;
};

/// Conditions on condition_group when given, else on the sample's own group.
ForwardResult forward(const LearnerModel& model, const GrayImage& image, int group,
                      std::optional<int> condition_group = std::nullopt);

/// Forward pass conditioned on force_group.
ProbMap predict(const LearnerModel& model, const GrayImage& image, int force_group);

/// Global average pool of the pre-modulation hidden activations.
Eigen::VectorXd gap_features(const LearnerModel& model, const GrayImage& image, int group);

// ---------------------------------------------------------------------------
// Losses

inline constexpr double kDiceSmoothing = 1.0;

struct SegLossParts {
  double ce = 0.0;
  double dice = 0.0;
  double total = 0.0;
};

/// Weighted mean cross-entropy plus dice_weight times weighted soft-Dice loss.
/// Weights enter both terms normalised by their sum, so rescaling every
/// weight by c > 0 changes nothing. Throws AllMaskedOut when sum(W) = 0.
SegLossParts seg_loss_parts(const ProbMap& prob, const BinaryMask& target, std::span<const double> weights,
                            double dice_weight);
double seg_loss(const ProbMap& prob, const BinaryMask& target, std::span<const double> weights,
                double dice_weight = 1.0);

/// Zero on boundary_band(mask_obs, w) for biased-group samples, one elsewhere.
std::vector<double> asym_weights(const BinaryMask& mask_obs, int group, int biased_group, int band_width);

// ---------------------------------------------------------------------------
// Fairness / invariance penalties

enum class PenaltyKind { None, DP, EO, DPEO, MmdLogit, Coral, MmdFeature };

std::string to_string(PenaltyKind kind);
PenaltyKind parse_penalty(const std::string& name);

/// Maximum logits drawn per (class, group) for the logit-level MMD.
inline constexpr std::size_t kMmdLogitSubsample = 256;

/// One image's worth of model outputs as seen by a penalty.
struct PenaltyView {
  const Eigen::VectorXd* logits = nullptr;
  const Eigen::VectorXd* probs = nullptr;
  const Eigen::MatrixXd* hidden = nullptr;  // pre-modulation h
  const BinaryMask* labels = nullptr;
  int group = 0;
};

struct PenaltyResult {
  double value = 0.0;
  bool single_group = false;  // batch lacked one group: value forced to 0
  bool degenerate_bandwidth = false;
  std::vector<Eigen::VectorXd> d_logits;  // per image, empty when unused
  std::vector<Eigen::MatrixXd> d_hidden;  // per image, empty when unused
};

/// Evaluates the named penalty on a batch; gradients w.r.t. logits and
/// hidden activations when with_grad. subsample_seed fixes the logit MMD draw.
PenaltyResult penalty(PenaltyKind kind, std::span<const PenaltyView> batch, std::uint64_t subsample_seed,
                      bool with_grad);

// ---------------------------------------------------------------------------
// Batch objective

struct BatchItem {
  const GrayImage* image = nullptr;
  const BinaryMask* target = nullptr;
  int group = 0;
  std::vector<double> weights;  // empty means all ones
};

struct LossSettings {
  double dice_weight = 1.0;
  PenaltyKind penalty = PenaltyKind::None;
  double penalty_weight = 0.0;  // effective lambda for this step
  bool conditioned = false;     // use the sample's own FiLM entry (else identity)
  std::uint64_t subsample_seed = 0;
};

struct LossAndGrad {
  double loss = 0.0;          // mean segmentation loss + lambda * penalty
  double seg = 0.0;
  double penalty = 0.0;
  bool single_group_batch = false;
  std::vector<double> per_sample_loss;
  LearnerModel grad;
};

/// Exact analytic gradient of the batch objective w.r.t. every parameter.
LossAndGrad loss_and_grad(const LearnerModel& model, std::span<const BatchItem> batch, const LossSettings& settings);

}  // namespace segbias
