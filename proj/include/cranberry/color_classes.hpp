#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "cranberry/image.hpp"
#include "cranberry/meta.hpp"
#include "cranberry/segmentation.hpp"

namespace cranberry {

using Color = std::array<float, 3>;

// Redness index rho = R / (R + G + B + eps); orders centroids green -> red.
double redness(const std::array<double, 3>& rgb);

struct KMeansResult {
    std::vector<std::array<double, 3>> centroids;
    std::vector<int> assignment;
    std::vector<double> objective_history;  // sum of squared distances, one entry per Lloyd iteration
};

// k-means++ seeding with a fixed seed, then Lloyd iterations until the
// largest centroid movement drops below tol or max_iters is hit. Empty
// clusters are reseeded to the point farthest from its centroid.
KMeansResult kmeans_rgb(const std::vector<Color>& points, int k, uint64_t seed,
                        int max_iters = 300, double tol = 1e-6);

// k raw RGB cluster centers partitioned into the 5 green->red classes.
struct ColorClassModel {
    std::vector<std::array<double, 3>> centroids;   // raw k-means centers
    std::vector<int> class_map;                     // centroid index -> class 1..5
    std::array<std::array<double, 3>, 5> class_centroids{};
    uint64_t seed = 0;
    int k = 0;

    int class_of_color(float r, float g, float b) const;  // nearest raw centroid's class

    static ColorClassModel load(const std::filesystem::path& file);
    void save(const std::filesystem::path& file) const;
};

// Uniform sample without replacement of n berry pixels across all instances.
// Returns every pixel (and records a warning) when fewer than n exist.
std::vector<Color> sample_berry_pixels(const std::vector<SegmentationMask>& masks,
                                       const std::vector<Image>& images, std::size_t n, uint64_t seed,
                                       std::vector<std::string>* warnings = nullptr);
std::vector<Color> sample_berry_pixels(const std::vector<SegmentationMask>& masks,
                                       const std::vector<const Image*>& images, std::size_t n, uint64_t seed,
                                       std::vector<std::string>* warnings = nullptr);

// Clusters pixels with k-means (k >= 5), sorts centroids by redness and
// partitions them into 5 contiguous classes by exact 1-D k-means on rho.
// class_centroids are pixel-weighted means per class.
ColorClassModel build_color_model(const std::vector<Color>& pixels, int k, uint64_t seed);

struct BerryClassification {
    int cls = 0;                        // 1..5
    std::array<double, 5> vote_fractions{};
    std::string bog_id;                 // stamped from capture metadata
    std::optional<Date> date;
};

// Per-pixel nearest-centroid majority vote; ties go to the redder class.
BerryClassification classify_berry(const BerryInstance& instance, const Image& image,
                                   const ColorClassModel& model);
BerryClassification classify_berry(const BerryInstance& instance, const Image& image,
                                   const ColorClassModel& model, const CaptureMeta& meta);

struct ClassHistogram {
    std::string bog_id;
    Date date;
    std::array<double, 5> fractions{};
    int berry_count = 0;
};

// fractions[c] = berries of class c+1 / total. All classifications must carry
// the same bog/date as meta.
ClassHistogram class_histogram(const std::vector<BerryClassification>& classifications,
                               const CaptureMeta& meta);

}  // namespace cranberry
