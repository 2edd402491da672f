#pragma once

#include <filesystem>

#include "drivedit/image.hpp"

namespace drivedit::png {

/// Reads an 8-bit PNG and converts it to `channels` (1 = gray, 3 = RGB).
/// Palette and alpha are expanded/stripped. 16-bit inputs are rejected.
ImageU8 read_u8(const std::filesystem::path& path, int channels);

/// Reads a 16-bit single-channel PNG verbatim (no gamma handling).
ImageU16 read_u16(const std::filesystem::path& path);

/// Writes a 1- or 3-channel 8-bit image. Output bytes depend only on pixel content.
void write(const std::filesystem::path& path, const ImageU8& image);
void write(const std::filesystem::path& path, const ImageU16& image);

}  // namespace drivedit::png
