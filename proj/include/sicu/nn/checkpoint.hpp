#pragma once

#include <filesystem>
#include <memory>

#include "json.hpp"

#include "sicu/nn/layers.hpp"

namespace sicu::nn {

inline constexpr std::uint32_t kCheckpointFormatVersion = 1;

/// File layout: "SICW", u32 version, u32 descriptor length, descriptor JSON
/// (sorted keys), then every parameter and buffer as little-endian f32 in
/// descriptor order, then the SHA-256 of all preceding bytes.
///
/// The descriptor holds {"architecture", "tensors": [{name, kind, shape}],
/// "metadata"}.
template <typename T>
void save_checkpoint(Layer<T>& model, const nlohmann::json& metadata, const std::filesystem::path& path);

struct LoadedModel {
    std::unique_ptr<Layer<float>> model;
    nlohmann::json architecture;
    nlohmann::json metadata;
};

/// Throws IoError, VersionError, TruncatedError, ChecksumError or FormatError
/// (including architecture / tensor-list disagreement).
LoadedModel load_checkpoint(const std::filesystem::path& path);

/// Descriptor only (checksum still verified).
nlohmann::json read_checkpoint_descriptor(const std::filesystem::path& path);

}  // namespace sicu::nn
