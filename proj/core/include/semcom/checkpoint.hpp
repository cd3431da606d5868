#pragma once

#include <filesystem>
#include <string>

#include "semcom/training.hpp"

namespace semcom {

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Serialized trainer: magic "SEMC", u32 version, config text, parameter
/// manifest (name + shape), parameter values, Adam moments, training
/// progress and RNG state, then a CRC32 of everything before it. All integers
/// and floats little-endian.
std::string checkpoint_bytes(const Trainer& trainer);

/// Inverse of checkpoint_bytes. Throws CorruptionError on a bad magic,
/// version, checksum, manifest or truncated payload.
Trainer checkpoint_from_bytes(const std::string& bytes);

/// Atomic write (temporary file then rename).
void checkpoint_save(const Trainer& trainer, const std::filesystem::path& path);

/// Throws MissingCheckpointError when the file does not exist.
Trainer checkpoint_load(const std::filesystem::path& path);

}  // namespace semcom
