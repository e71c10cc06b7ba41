#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "segbias/synth_corpus.hpp"
#include "segbias/train.hpp"

namespace segbias {

struct EmbeddingSet {
  Eigen::MatrixXd vectors;  // N x d, one row per sample
  std::vector<int> groups;
  std::vector<std::string> ids;  // optional, for export

  Eigen::Index size() const { return vectors.rows(); }
};

/// GAP features of every sample under the trained model.
EmbeddingSet embed(const TrainResult& model, const Corpus& corpus);

struct ProbeResult {
  double accuracy = 0.0;  // mean held-out accuracy over folds
  double auroc = 0.0;     // pooled out-of-fold scores
};

/// K-fold logistic regression predicting group from embedding.
ProbeResult linear_probe(const EmbeddingSet& e, int k = 5, std::uint64_t seed = 1);

/// Rank-based area under the ROC curve; ties count one half.
double auroc(const std::vector<double>& scores, const std::vector<int>& labels);

double silhouette(const EmbeddingSet& e);

struct FisherResult {
  double ratio = 0.0;  // +inf when the within-group scatter vanishes
  double p_value = 1.0;
  bool zero_within = false;
};

double fisher_statistic(const EmbeddingSet& e);
FisherResult fisher_ratio(const EmbeddingSet& e, int n_perm = 500, std::uint64_t seed = 1);

struct Mmd2Result {
  double value = 0.0;
  double sigma0 = 0.0;
  bool degenerate_bandwidth = false;
};

/// Multi-scale V-statistic between group 0 and group 1 rows.
Mmd2Result mmd2(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y);
Mmd2Result mmd2(const EmbeddingSet& e);

double centroid_distance(const EmbeddingSet& e);

struct Projection {
  Eigen::MatrixXd coords;  // N x 2
  Eigen::Vector2d variance{0.0, 0.0};
  bool rank_deficient = false;
};

/// Projection onto the two leading principal axes. Each axis is oriented
/// so that its largest-magnitude coordinate is positive.
Projection pca_2d(const EmbeddingSet& e);

struct SeparabilityReport {
  ProbeResult probe;
  double silhouette = 0.0;
  FisherResult fisher;
  Mmd2Result mmd;
  double centroid_distance = 0.0;
  Projection pca;
};

struct SeparabilityOptions {
  int probe_folds = 5;
  int n_perm = 500;
  std::uint64_t seed = 1;
};

SeparabilityReport analyze(const EmbeddingSet& e, const SeparabilityOptions& options = {});

}  // namespace segbias
