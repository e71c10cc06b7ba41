#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "segbias/pipeline.hpp"

namespace segbias {

/// JSON form of a run configuration. Sections: gen, bias, train, audit,
/// separability, pipeline, plus the top-level seeds list.
std::string run_config_to_json(const RunConfig& config);

/// Keys missing from the document keep their defaults. Unknown keys and
/// mistyped values throw ConfigError.
RunConfig run_config_from_json(const std::string& text);
RunConfig load_run_config(const std::filesystem::path& path);

/// Dotted leaf keys such as "train.epochs", in document order.
std::vector<std::string> run_config_keys();

/// Sets one leaf from its textual value. Lists take comma-separated items.
void apply_override(RunConfig& config, const std::string& key, const std::string& value);

/// Parses "1,2,3" into seeds.
std::vector<std::uint64_t> parse_seed_list(const std::string& text);

}  // namespace segbias
