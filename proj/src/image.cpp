#include "cranberry/image.hpp"

#include <cmath>
#include <string>

#include "cranberry/errors.hpp"

namespace cranberry {

Image::Image(int w, int h, float r, float g, float b) : width(w), height(h) {
    if (w <= 0 || h <= 0) throw DataError("image dimensions must be positive");
    data.resize(static_cast<std::size_t>(w) * h * 3);
    for (std::size_t i = 0; i < data.size(); i += 3) {
        data[i] = r;
        data[i + 1] = g;
        data[i + 2] = b;
    }
}

std::array<float, 3> Image::pixel(int x, int y) const {
    const std::size_t i = (static_cast<std::size_t>(y) * width + x) * 3;
    return {data[i], data[i + 1], data[i + 2]};
}

void Image::set_pixel(int x, int y, float r, float g, float b) {
    const std::size_t i = (static_cast<std::size_t>(y) * width + x) * 3;
    data[i] = r;
    data[i + 1] = g;
    data[i + 2] = b;
}

Image clamp_unit(const Image& image) {
    Image out = image;
    for (float& v : out.data) {
        if (!std::isfinite(v)) throw DataError("non-finite pixel");
        if (v < 0.0f) v = 0.0f;
        if (v > 1.0f) v = 1.0f;
    }
    return out;
}

CropGrid CropGrid::fit(int frame_w, int frame_h, int crop_w, int crop_h) {
    if (crop_w <= 0 || crop_h <= 0) throw DataError("crop size must be positive");
    CropGrid g;
    g.crop_w = crop_w;
    g.crop_h = crop_h;
    g.cols = frame_w / crop_w;
    g.rows = frame_h / crop_h;
    return g;
}

std::vector<FrameCrop> tile_frame(const Image& frame, const CropGrid& grid) {
    if (frame.width < grid.crop_w || frame.height < grid.crop_h) {
        throw DataError("frame " + std::to_string(frame.width) + "x" + std::to_string(frame.height) +
                        " smaller than one " + std::to_string(grid.crop_w) + "x" +
                        std::to_string(grid.crop_h) + " crop");
    }
    if (grid.cols < 1 || grid.rows < 1 ||
        grid.cols * grid.crop_w > frame.width || grid.rows * grid.crop_h > frame.height) {
        throw DataError("crop grid does not fit the frame");
    }
    std::vector<FrameCrop> crops;
    crops.reserve(static_cast<std::size_t>(grid.cols) * grid.rows);
    for (int row = 0; row < grid.rows; ++row) {
        for (int col = 0; col < grid.cols; ++col) {
            FrameCrop crop;
            crop.origin_x = col * grid.crop_w;
            crop.origin_y = row * grid.crop_h;
            crop.image = Image(grid.crop_w, grid.crop_h);
            crop.image.calibrated = frame.calibrated;
            for (int y = 0; y < grid.crop_h; ++y) {
                for (int x = 0; x < grid.crop_w; ++x) {
                    for (int c = 0; c < 3; ++c) {
                        crop.image.at(x, y, c) = frame.at(crop.origin_x + x, crop.origin_y + y, c);
                    }
                }
            }
            crops.push_back(std::move(crop));
        }
    }
    return crops;
}

}  // namespace cranberry
