#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "semlp/data.hpp"
#include "semlp/se_mlp.hpp"
#include "semlp/training.hpp"

namespace semlp {

/// Every tunable of a run. The generator and training seeds are not set directly:
/// both derive from `seed` (see generator_seed / train_seed).
struct RunConfig {
    std::uint64_t seed = 0;
    GridSpec grid;
    GeneratorConfig generator;
    TrainConfig train;
    SEMLPConfig model;

    /// Checks every section's invariants; throws ConfigError.
    void validate() const;
    GeneratorConfig generator_with_seed() const;
    TrainConfig train_with_seed() const;
};

std::uint64_t generator_seed(std::uint64_t seed) noexcept;

/// Applies one `key = value` setting, e.g. "train.batch_size", "model.hidden_dims" ("64,64,64").
void apply_setting(RunConfig& cfg, std::string_view key, std::string_view value);

/// Parses `key = value` lines over the defaults. '#' starts a comment; blank lines are skipped.
RunConfig parse_run_config(std::string_view text);
RunConfig load_run_config(const std::filesystem::path& path);

/// Canonical text listing every key, suitable for parse_run_config.
std::string format_run_config(const RunConfig& cfg);

} // namespace semlp
