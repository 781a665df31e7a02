#include "cranberry/pseudo_mask.hpp"

#include <algorithm>
#include <string>

#include "cranberry/errors.hpp"

namespace cranberry {

std::size_t PseudoMask::count(MaskLabel l) const {
    return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), l));
}

PseudoMask build_pseudo_mask(const PointAnnotation& points, int width, int height, int r_fg, int r_ig) {
    if (width <= 0 || height <= 0) throw DataError("pseudo-mask shape must be positive");
    if (r_fg < 1 || r_ig < 0) throw DataError("pseudo-mask radii out of range (r_fg >= 1, r_ig >= 0)");

    PseudoMask mask;
    mask.width = width;
    mask.height = height;
    mask.labels.assign(static_cast<std::size_t>(width) * height, MaskLabel::Background);

    const int r_out = r_fg + r_ig;
    for (const auto& [px, py] : points.points) {
        if (px < 0 || px >= width || py < 0 || py >= height) {
            throw DataError("annotation point (" + std::to_string(px) + "," + std::to_string(py) +
                            ") outside " + std::to_string(width) + "x" + std::to_string(height) + " mask");
        }
        const int x0 = std::max(0, px - r_out), x1 = std::min(width - 1, px + r_out);
        const int y0 = std::max(0, py - r_out), y1 = std::min(height - 1, py + r_out);
        for (int y = y0; y <= y1; ++y) {
            for (int x = x0; x <= x1; ++x) {
                const int d2 = (x - px) * (x - px) + (y - py) * (y - py);
                MaskLabel& cell = mask.labels[static_cast<std::size_t>(y) * width + x];
                if (d2 <= r_fg * r_fg) {
                    cell = MaskLabel::Foreground;
                } else if (d2 <= r_out * r_out && cell != MaskLabel::Foreground) {
                    cell = MaskLabel::Ignore;
                }
            }
        }
    }
    return mask;
}

}  // namespace cranberry
