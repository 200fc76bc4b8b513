#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "semlp/data.hpp"
#include "semlp/se_mlp.hpp"

// Binary containers for trained models and their normalization parameters.
// Layout is documented in docs/file-formats.md; all integers and doubles little-endian.
namespace semlp {

inline constexpr std::uint32_t kModelFormatVersion = 1;
inline constexpr std::uint32_t kNormFormatVersion = 1;

std::vector<std::uint8_t> serialize_norm_params(const NormParams& np);
/// Validates magic, version, length, checksum and the parameter invariants.
NormParams deserialize_norm_params(std::span<const std::uint8_t> bytes);
/// The CRC32 trailer of the serialized parameters; models record it to pair with them.
std::uint32_t norm_params_checksum(const NormParams& np);

void persist_norm_params(const NormParams& np, const std::filesystem::path& path);
NormParams load_norm_params(const std::filesystem::path& path);

std::vector<std::uint8_t> serialize_model(const SEMLPModel& model);
SEMLPModel deserialize_model(std::span<const std::uint8_t> bytes);

void save_model(const SEMLPModel& model, const std::filesystem::path& path);
SEMLPModel load_model(const std::filesystem::path& path);

/// Loads a model and a separate parameter file, refusing the pair unless the model's
/// recorded checksum matches. The returned model carries the loaded parameters.
SEMLPModel load_paired(const std::filesystem::path& model_path, const std::filesystem::path& norm_path);

} // namespace semlp
