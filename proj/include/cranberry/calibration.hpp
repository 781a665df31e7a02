#pragma once

#include <array>
#include <filesystem>
#include <string>

#include "cranberry/image.hpp"

namespace cranberry {

struct Rect {
    int x = 0;
    int y = 0;
    int w = 0;
    int h = 0;
};

// Target luminances for the six neutral patches, lightest first. The bundled
// defaults are nominal values; sessions calibrate onto this scale.
struct GreyReference {
    std::array<double, 6> values{0.91, 0.59, 0.36, 0.19, 0.09, 0.03};

    static GreyReference load(const std::filesystem::path& file);
    void save(const std::filesystem::path& file) const;
};

// Per-patch trimmed channel means measured off a card image.
struct GreyPatchMeasurement {
    std::string session_id;
    std::array<std::array<double, 3>, 6> means{};  // lightest -> darkest
    std::array<int, 6> pixel_counts{};
};

// Per-channel affine correction: v' = gain * v + offset.
struct RadiometricCorrection {
    std::array<double, 3> gain{1.0, 1.0, 1.0};
    std::array<double, 3> offset{0.0, 0.0, 0.0};
    double residual_rms = 0.0;
    std::string session_id;

    static RadiometricCorrection load(const std::filesystem::path& file);
    void save(const std::filesystem::path& file) const;
};

double luminance(const std::array<double, 3>& rgb);

// Trimmed mean (drop top/bottom 10% per channel) over each patch rectangle.
// Requires >= 25 pixels per patch after trimming and luminance strictly
// decreasing from patch 1 to 6.
GreyPatchMeasurement measure_grey_patches(const Image& card_image, const std::array<Rect, 6>& patch_rects,
                                          const std::string& session_id = {});

// Ordinary least squares per channel via the closed-form normal equations.
// residual_rms spans all 18 equations. Degenerate measurements raise a
// singular-fit DataError, a non-positive fitted gain an "inverted response".
RadiometricCorrection fit_correction(const GreyPatchMeasurement& measured, const GreyReference& reference);

// Applies the correction and clamps into [0,1]; output carries
// calibrated=true. Correcting an already-calibrated image is an error.
Image apply_correction(const Image& image, const RadiometricCorrection& corr);

}  // namespace cranberry
