#pragma once

#include <filesystem>

#include "dzsr/image.hpp"

namespace dzsr {

/// Writes a 16-bit RGB PNG; values are clamped to [0, 1].
void write_png16(const std::filesystem::path& path, const Image& img);

/// Reads 8- or 16-bit gray/RGB(A) PNGs into [0, 1] floats (alpha dropped).
Image read_png(const std::filesystem::path& path);

}  // namespace dzsr
