#pragma once

#include <array>
#include <cstddef>
#include <vector>

namespace cranberry {

// RGB raster, float channels, interleaved row-major. Values are kept in [0,1]
// by the operations that promise clamping; intermediate rasters may exceed it.
struct Image {
    int width = 0;
    int height = 0;
    bool calibrated = false;
    std::vector<float> data;  // width * height * 3

    Image() = default;
    Image(int w, int h, float r = 0.0f, float g = 0.0f, float b = 0.0f);

    float at(int x, int y, int c) const { return data[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
    float& at(int x, int y, int c) { return data[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }

    std::array<float, 3> pixel(int x, int y) const;
    void set_pixel(int x, int y, float r, float g, float b);
    bool in_bounds(int x, int y) const { return x >= 0 && x < width && y >= 0 && y < height; }
    std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }
};

// Clamps every channel into [0,1]. Idempotent. Throws DataError on a
// non-finite pixel value.
Image clamp_unit(const Image& image);

// Non-overlapping tiling grid. cols/rows are the integral crop counts that
// fit the source frame; residual margin pixels are dropped.
struct CropGrid {
    int crop_w = 456;
    int crop_h = 608;
    int cols = 0;
    int rows = 0;

    static CropGrid fit(int frame_w, int frame_h, int crop_w = 456, int crop_h = 608);
};

struct FrameCrop {
    Image image;
    int origin_x = 0;
    int origin_y = 0;
};

// Crops in row-major order (top row first). Throws DataError when the frame
// is smaller than one crop or the grid exceeds the frame.
std::vector<FrameCrop> tile_frame(const Image& frame, const CropGrid& grid);

}  // namespace cranberry
