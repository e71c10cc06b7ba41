#pragma once

#include <filesystem>
#include <span>

#include "segbias/pipeline.hpp"

namespace segbias {

/// audit.json, audit.csv and one PGM per sample under error_masks/ marking
/// pixels whose confident label disagrees with the observed one.
void write_audit(const AuditResult& audit, const Corpus& corpus, const std::filesystem::path& dir);

/// separability.json and pca_projection.csv.
void write_separability(const SeparabilityReport& report, const EmbeddingSet& embeddings,
                        const std::filesystem::path& dir);

/// eval.json and eval.csv. Group rows carry per-group means; the "gap" rows
/// carry the clean-minus-biased difference.
void write_eval(std::span<const ConditionResult> conditions, std::span<const std::uint64_t> seeds,
                const std::filesystem::path& dir);

/// Everything a pipeline run produces: config.json, eval.json/csv, and per
/// seed the corpora, injection record, audit, separability and checkpoints,
/// followed by report.md and report.csv.
void write_pipeline_outputs(const PipelineResult& result, const std::filesystem::path& out_dir);

/// Rebuilds report.md and report.csv from config.json, eval.json and the
/// per-seed audit.json files found in a pipeline output directory.
void render_report(const std::filesystem::path& out_dir);

/// Directory name used for one seed's artifacts.
std::string seed_dir_name(std::uint64_t seed);

}  // namespace segbias
