#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "segbias/synth_corpus.hpp"

namespace segbias {

enum class BiasOperator { Erosion, Dilation, Hbd };

std::string to_string(BiasOperator op);
BiasOperator parse_bias_operator(const std::string& name);

struct BiasSpec {
  int target_group = 1;
  double beta = 0.0;  // fraction of the target group to corrupt
  BiasOperator op = BiasOperator::Erosion;
  int radius = 3;      // r_d; also the HBD amplitude rho
  int harmonics = 3;   // HBD only
  std::uint64_t seed = 1;
};

struct SkippedSample {
  std::string id;
  std::string reason;
};

struct InjectionRecord {
  BiasSpec spec;
  std::vector<std::string> corrupted_ids;  // in selection order
  std::vector<SkippedSample> skipped;      // selected but left unchanged

  bool operator==(const InjectionRecord& other) const;
};

struct InjectionResult {
  Corpus corpus;
  InjectionRecord record;
};

/// Selects exactly round(beta * |target group|) samples (seeded, without
/// replacement) and replaces their observed mask with op(mask, radius),
/// keeping the previous mask as the clean one.
InjectionResult inject(const Corpus& corpus, const BiasSpec& spec);

/// The corruption itself, applied to one mask.
BinaryMask apply_bias_operator(const BinaryMask& mask, const BiasSpec& spec, Rng& rng);

void write_injection_record(const InjectionRecord& record, const std::filesystem::path& path);
InjectionRecord read_injection_record(const std::filesystem::path& path);

}  // namespace segbias
