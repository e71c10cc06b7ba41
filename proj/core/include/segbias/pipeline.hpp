#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "segbias/bias_injection.hpp"
#include "segbias/bias_stats.hpp"
#include "segbias/cl_audit.hpp"
#include "segbias/evaluation.hpp"
#include "segbias/separability.hpp"
#include "segbias/synth_corpus.hpp"
#include "segbias/train.hpp"

namespace segbias {

struct AuditResult {
  OutOfFold oof;
  Thresholds thresholds;
  std::vector<BinaryMask> confident;
  JointDistribution global;
  std::array<JointDistribution, 2> per_group;  // indexed by group id
  std::array<ErrorRates, 2> rates;
  BiasIndicators indicators;
  int clean_group = 0;
};

/// Out-of-fold probabilities, thresholds, confident labels, joint
/// distributions and bias indicators for a corpus. Reads observed masks only.
AuditResult run_audit(const Corpus& corpus, int k, const TrainConfig& config);

/// Everything a pipeline run needs. Leaf keys mirror the JSON config.
struct RunConfig {
  GenConfig gen;
  BiasSpec bias;
  TrainConfig train;
  int audit_k = 5;
  std::vector<std::uint64_t> seeds{1};
  std::vector<Mitigation> modes{Mitigation::None, Mitigation::Conditioned, Mitigation::AsymMask,
                                Mitigation::Combined, Mitigation::Auto};
  std::vector<PenaltyKind> penalties;  // trained as extra unmitigated runs
  double penalty_weight = 1.0;
  bool run_audit = true;
  bool run_separability = true;
  SeparabilityOptions separability;
  int test_samples = 200;  // held-out corpus used for evaluation
};

void validate(const RunConfig& config);

/// One trained condition (mitigation mode or penalty baseline).
struct ConditionResult {
  std::string name;
  std::vector<EvalReport> observed;  // one per seed
  std::vector<EvalReport> clean;
  std::vector<std::optional<int>> discovered_clean;  // auto mode
  std::vector<bool> low_confidence;
  std::vector<TrainResult> models;  // one per seed, with training history
};

struct SeedArtifacts {
  std::uint64_t seed = 0;
  Corpus train_corpus;
  Corpus test_corpus;
  InjectionRecord injection;
  std::optional<AuditResult> audit;
  std::optional<SeparabilityReport> separability;
  EmbeddingSet embeddings;
};

struct PipelineResult {
  RunConfig config;
  std::vector<SeedArtifacts> seeds;
  std::vector<ConditionResult> conditions;
};

/// Data for one seed: generate, inject, and build the held-out test corpus
/// (same generator and bias spec, independent seed stream).
SeedArtifacts prepare_seed(const RunConfig& config, std::uint64_t seed);

/// Config of a seeded run: every sub-config seed derives from the run seed.
RunConfig seeded(const RunConfig& config, std::uint64_t seed);

PipelineResult run_pipeline(const RunConfig& config);

}  // namespace segbias
