#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "cranberry/image.hpp"
#include "cranberry/pixel_scorer.hpp"

namespace cranberry {

struct SegParams {
    double tau = 0.5;      // score threshold
    double kappa = 0.8;    // minimum blob convexity
    int min_area = 30;     // px^2
    int r_fg = 6;          // pseudo-mask foreground radius
    int r_ig = 4;          // pseudo-mask ignore annulus width
    int seed_min_separation = 4;  // px between watershed seeds
};

struct BerryInstance {
    std::vector<std::pair<int, int>> pixels;  // 4-connected
    double centroid_x = 0.0;
    double centroid_y = 0.0;
    int area = 0;
    double convexity = 1.0;
    std::array<float, 3> mean_rgb{};
};

struct SegmentationMask {
    int width = 0;
    int height = 0;
    std::vector<uint16_t> ids;  // 0 = background; value i+1 marks instances[i]
    std::vector<BerryInstance> instances;

    uint16_t id_at(int x, int y) const { return ids[static_cast<std::size_t>(y) * width + x]; }

    // Rebuilds the id raster from the instance pixel sets and verifies they
    // partition the nonzero pixels.
    void validate() const;

    void save(const std::filesystem::path& png_file, const std::filesystem::path& json_file) const;
    static SegmentationMask load(const std::filesystem::path& png_file, const std::filesystem::path& json_file);
};

// Monotone-chain convex hull (CCW, collinear points dropped).
std::vector<std::pair<double, double>> convex_hull(std::vector<std::pair<double, double>> points);
double polygon_area(const std::vector<std::pair<double, double>>& polygon);

// Blob area over convex-hull area. The hull runs on pixel centers, so its
// shoelace area is compensated by one px^2 per hull vertex before dividing;
// the ratio is clamped into (0,1]. Collinear pixel sets are defined as 1.
double convexity(const std::vector<std::pair<int, int>>& pixels);

// Exact squared Euclidean distance to the nearest zero pixel.
std::vector<double> distance_transform_sq(const std::vector<uint8_t>& foreground, int width, int height);

// Threshold at tau -> 4-connected components -> min_area filter -> blobs
// below kappa split by distance-transform watershed, parts re-tested and
// dropped if still below kappa. Instance ids follow raster-scan order of the
// centroids. Requires a trained scorer and a calibrated image.
SegmentationMask segment(const Image& image, const PixelScorer& scorer, const SegParams& params);

int count(const SegmentationMask& mask);

struct EvalReport {
    double miou = 0.0;
    double count_mae = 0.0;
    struct PerImage {
        std::string image_id;
        double iou = 0.0;
        int count_error = 0;
    };
    std::vector<PerImage> per_image;

    std::string to_json() const;
};

// Binary-foreground IOU and absolute count error, averaged over image pairs.
EvalReport evaluate(const std::vector<SegmentationMask>& preds, const std::vector<SegmentationMask>& truths);

}  // namespace cranberry
