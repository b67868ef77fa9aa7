#pragma once

#include <filesystem>

#include "segadv/image.hpp"

namespace segadv::harness {

// 8-bit RGB (or grey, when channels == 1) PNG.
void write_png(const std::filesystem::path& path, const Image& image);
// Class indices as an 8-bit greyscale PNG.
void write_mask_png(const std::filesystem::path& path, const LabelMask& mask);

// Accepts 8-bit RGB only. 16-bit, palette and alpha inputs raise DataError.
Image read_png_rgb(const std::filesystem::path& path);
// Accepts 8-bit greyscale only.
LabelMask read_mask_png(const std::filesystem::path& path);

}  // namespace segadv::harness
