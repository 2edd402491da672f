#pragma once

#include <cstdint>
#include <filesystem>

#include "drivedit/rfdit/model.hpp"

namespace drivedit::rfdit {

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Layout (little endian): 8-byte magic "DRVDCKPT", u32 version, u32 length +
/// model config JSON, u32 tensor count, then per tensor u32 name length,
/// name, u32 rows, u32 cols, rows * cols float64 in row-major order.
void save_checkpoint(const ToyModel& model, const std::filesystem::path& path);
/// Throws InputError on a missing file, bad magic, version, or tensor set.
ToyModel load_checkpoint(const std::filesystem::path& path);

}  // namespace drivedit::rfdit
