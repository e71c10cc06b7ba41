#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "segbias/image.hpp"
#include "segbias/mask_ops.hpp"

namespace segbias {

enum class ShapeFamily { Ellipse, PolygonBlob };

std::string to_string(ShapeFamily shape);
ShapeFamily parse_shape_family(const std::string& name);

struct GenConfig {
  int n_samples = 200;
  int width = 64;
  int height = 64;
  ShapeFamily shape = ShapeFamily::Ellipse;
  double contrast = 0.5;     // foreground minus background intensity
  double noise_sigma = 0.1;  // additive Gaussian pixel noise
  double edge_blur = 1.0;    // Gaussian sigma (px) applied to the rendered object
  double group_cue_shift = 0.3;  // intensity offset added to biased-group images
  double group_balance = 0.5;    // fraction of samples in the biased group
  int clean_group = 0;
  std::string id_prefix = "s";
  std::uint64_t seed = 1;
};

/// Throws ConfigError on violated preconditions.
void validate(const GenConfig& config);

/// Number of clean-mask reads since process start. Training and auditing
/// must never move this counter; only evaluation against clean labels may.
std::uint64_t clean_mask_reads() noexcept;

class Sample {
 public:
  std::string id;
  int group = 0;
  GrayImage image;
  BinaryMask mask_obs;
  bool corrupted = false;

  bool has_clean() const noexcept { return mask_clean_.has_value(); }
  /// Counted read; throws MissingCleanMask when absent.
  const BinaryMask& clean() const;
  void set_clean(std::optional<BinaryMask> mask) { mask_clean_ = std::move(mask); }
  /// Shape check that does not count as a read.
  bool clean_has_shape(int w, int h) const noexcept {
    return mask_clean_ && mask_clean_->width == w && mask_clean_->height == h;
  }

  bool operator==(const Sample&) const = default;

 private:
  std::optional<BinaryMask> mask_clean_;
};

struct Corpus {
  int width = 0;
  int height = 0;
  int clean_group = 0;
  std::vector<Sample> samples;

  int biased_group() const { return 1 - clean_group; }
  std::size_t group_size(int group) const;
  /// Throws if ids repeat, shapes disagree, groups fall outside {0,1} or one
  /// group is empty, or a corrupted sample lacks its clean mask.
  void check_invariants() const;

  bool operator==(const Corpus&) const = default;
};

Corpus generate(const GenConfig& config);

/// Writes images/, masks_obs/, masks_clean/ PGMs and manifest.json into dir.
std::filesystem::path write_manifest(const Corpus& corpus, const std::filesystem::path& dir);
Corpus read_manifest(const std::filesystem::path& manifest_path);

}  // namespace segbias
