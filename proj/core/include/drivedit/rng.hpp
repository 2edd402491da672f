#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace drivedit {

/// Derives an independent 64-bit seed for a named substream of a root seed,
/// e.g. substream_seed(root, "placement/0"). Adding new stream names never
/// changes the seeds of existing ones.
std::uint64_t substream_seed(std::uint64_t root, std::string_view name);

/// Engine seeded from a named substream.
std::mt19937_64 make_engine(std::uint64_t root, std::string_view name);

}  // namespace drivedit
