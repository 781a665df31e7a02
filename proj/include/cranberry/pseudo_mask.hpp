#pragma once

#include <cstdint>
#include <vector>

#include "cranberry/dataset.hpp"

namespace cranberry {

enum class MaskLabel : uint8_t { Background = 0, Foreground = 1, Ignore = 2 };

// Approximate supervision synthesized from point clicks: a foreground disk of
// radius r_fg around every point, an ignore annulus of width r_ig around each
// disk, background elsewhere. Ignore never overwrites foreground.
struct PseudoMask {
    int width = 0;
    int height = 0;
    std::vector<MaskLabel> labels;

    MaskLabel at(int x, int y) const { return labels[static_cast<std::size_t>(y) * width + x]; }
    std::size_t count(MaskLabel l) const;
};

PseudoMask build_pseudo_mask(const PointAnnotation& points, int width, int height, int r_fg, int r_ig);

}  // namespace cranberry
