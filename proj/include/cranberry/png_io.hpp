#pragma once

#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

#include "cranberry/image.hpp"

namespace cranberry {

// 8-bit RGB PNG <-> float image in [0,1]. Grayscale/palette/alpha inputs are
// expanded to RGB on read; alpha is stripped.
Image read_png_rgb(const std::filesystem::path& path);
void write_png_rgb(const std::filesystem::path& path, const Image& image);

// Width/height without decoding the pixel data (annotation bounds checks).
std::pair<int, int> read_png_dimensions(const std::filesystem::path& path);

// 16-bit single-channel PNG, used for instance-id rasters.
std::vector<uint16_t> read_png_gray16(const std::filesystem::path& path, int& width, int& height);
void write_png_gray16(const std::filesystem::path& path, const std::vector<uint16_t>& pixels, int width, int height);

}  // namespace cranberry
