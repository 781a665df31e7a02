#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "cranberry/image.hpp"
#include "cranberry/pseudo_mask.hpp"

namespace cranberry {

// Logistic berry-vs-background pixel classifier on quadratic color features
// phi = (1, R, G, B, R^2, G^2, B^2). The diagonal quadric is enough to carve
// out the foliage color region, so both green and red berries score high.
struct PixelScorer {
    std::array<double, 7> weights{};
    bool trained = false;
    std::vector<double> loss_history;
    uint64_t seed = 0;
    int epochs = 0;
    double learning_rate = 0.0;

    double score(float r, float g, float b) const;

    static PixelScorer load(const std::filesystem::path& file);
    void save(const std::filesystem::path& file) const;
};

struct LabeledCrop {
    Image image;
    PseudoMask mask;
};

// Full-batch gradient descent on class-balanced cross-entropy (foreground
// pixels reweighted by the background/foreground count ratio); ignore pixels
// are excluded. loss_history records the loss entering each epoch.
// Deterministic for a given seed.
PixelScorer train_scorer(const std::vector<LabeledCrop>& crops, int epochs, double learning_rate, uint64_t seed);

// Fraction of non-ignore pixels the scorer labels correctly at threshold 0.5.
double scorer_accuracy(const PixelScorer& scorer, const std::vector<LabeledCrop>& crops);

}  // namespace cranberry
