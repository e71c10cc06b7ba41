#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "segbias/learner.hpp"
#include "segbias/synth_corpus.hpp"

namespace segbias {

enum class Mitigation { None, Conditioned, AsymMask, Combined, Auto };

std::string to_string(Mitigation m);
Mitigation parse_mitigation(const std::string& name);

struct TrainConfig {
  int epochs = 20;
  int warmup_epochs = 5;  // auto mode only
  double learning_rate = 1e-2;
  int batch = 8;
  int boundary_width = 2;
  Mitigation mitigation = Mitigation::None;
  PenaltyKind penalty = PenaltyKind::None;
  double penalty_weight = 0.0;
  bool penalty_ramp = true;  // linear 0 -> lambda over the first half of the steps
  double dice_weight = 1.0;
  int hidden_dim = 16;
  int patch_radius = 2;
  std::uint64_t seed = 1;
  /// Group whose boundaries are masked (asym_mask / combined) and whose
  /// complement is forced at inference. Defaults to the corpus' biased group.
  std::optional<int> biased_group;
};

void validate(const TrainConfig& config);

struct HistoryRow {
  int epoch = 0;
  int group = 0;
  double mean_loss = 0.0;
  std::string phase;  // "warmup" or "train"

  bool operator==(const HistoryRow&) const = default;
};

struct TrainResult {
  LearnerModel model;
  std::vector<HistoryRow> history;
  bool conditioned = false;
  /// Conditioning id used at inference; nullopt means each sample's own group.
  std::optional<int> inference_group;
  std::optional<int> discovered_clean_group;  // auto mode
  bool low_confidence = false;
  std::array<double, 2> warmup_mean_loss{0.0, 0.0};
  std::size_t single_group_batches = 0;
};

TrainResult train(const Corpus& corpus, const TrainConfig& config);

/// Warm-up with native conditioning and unweighted loss, pick the group with
/// the lower mean loss as clean, then mask the other group's boundaries.
TrainResult auto_condition_train(const Corpus& corpus, const TrainConfig& config);

/// Trains on a subset of the corpus given by indices.
TrainResult train_subset(const Corpus& corpus, std::span<const std::size_t> indices, const TrainConfig& config);

/// Foreground probabilities for one sample under the result's inference rule.
ProbMap infer(const TrainResult& result, const Sample& sample);

void save_checkpoint(const LearnerModel& model, const std::filesystem::path& json_path);
LearnerModel load_checkpoint(const std::filesystem::path& json_path);
/// Checkpoint plus the inference rule (conditioning, discovered clean group).
void save_train_result(const TrainResult& result, const std::filesystem::path& json_path);
TrainResult load_train_result(const std::filesystem::path& json_path);
void write_history_csv(const std::vector<HistoryRow>& history, const std::filesystem::path& path);

}  // namespace segbias
