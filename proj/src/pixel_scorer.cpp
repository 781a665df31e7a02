#include "cranberry/pixel_scorer.hpp"

#include <cmath>
#include <cstddef>
#include <fstream>

#include <json.hpp>

#include "cranberry/errors.hpp"

namespace cranberry {

using nlohmann::json;

namespace {

inline void features(float r, float g, float b, double* phi) {
    phi[0] = 1.0;
    phi[1] = r;
    phi[2] = g;
    phi[3] = b;
    phi[4] = static_cast<double>(r) * r;
    phi[5] = static_cast<double>(g) * g;
    phi[6] = static_cast<double>(b) * b;
}

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// log(1 + exp(z)) without overflow
inline double softplus(double z) {
    if (z > 0) return z + std::log1p(std::exp(-z));
    return std::log1p(std::exp(z));
}

struct TrainingSet {
    std::vector<float> x;       // n * 3 channel triples
    std::vector<uint8_t> y;     // 1 = foreground
    std::size_t n_fg = 0;
    std::size_t n_bg = 0;
};

TrainingSet collect(const std::vector<LabeledCrop>& crops) {
    TrainingSet set;
    for (const auto& crop : crops) {
        if (crop.image.width != crop.mask.width || crop.image.height != crop.mask.height) {
            throw DataError("crop image and pseudo-mask shapes differ");
        }
        const std::size_t n = crop.image.pixel_count();
        for (std::size_t i = 0; i < n; ++i) {
            const MaskLabel l = crop.mask.labels[i];
            if (l == MaskLabel::Ignore) continue;
            set.x.push_back(crop.image.data[i * 3]);
            set.x.push_back(crop.image.data[i * 3 + 1]);
            set.x.push_back(crop.image.data[i * 3 + 2]);
            set.y.push_back(l == MaskLabel::Foreground ? 1 : 0);
            (l == MaskLabel::Foreground ? set.n_fg : set.n_bg)++;
        }
    }
    return set;
}

}  // namespace

double PixelScorer::score(float r, float g, float b) const {
    double phi[7];
    features(r, g, b, phi);
    double z = 0.0;
    for (int j = 0; j < 7; ++j) z += weights[j] * phi[j];
    return sigmoid(z);
}

PixelScorer train_scorer(const std::vector<LabeledCrop>& crops, int epochs, double learning_rate, uint64_t seed) {
    if (crops.empty()) throw DataError("no labeled crops to train on");
    if (epochs < 0 || learning_rate < 0.0) throw DataError("epochs and learning rate must be non-negative");

    const TrainingSet set = collect(crops);
    if (set.n_fg == 0) throw DataError("no foreground pixels in the training corpus");
    if (set.n_bg == 0) throw DataError("no background pixels in the training corpus");

    const double w_fg = static_cast<double>(set.n_bg) / static_cast<double>(set.n_fg);
    const double total_weight = w_fg * set.n_fg + static_cast<double>(set.n_bg);
    const std::size_t n = set.y.size();

    PixelScorer scorer;
    scorer.seed = seed;
    scorer.epochs = epochs;
    scorer.learning_rate = learning_rate;

    for (int epoch = 0; epoch < epochs; ++epoch) {
        double loss = 0.0;
        double grad[7] = {};
        double phi[7];
        for (std::size_t i = 0; i < n; ++i) {
            features(set.x[i * 3], set.x[i * 3 + 1], set.x[i * 3 + 2], phi);
            double z = 0.0;
            for (int j = 0; j < 7; ++j) z += scorer.weights[j] * phi[j];
            const double yi = set.y[i];
            const double wi = set.y[i] ? w_fg : 1.0;
            loss += wi * (softplus(z) - yi * z);
            const double coef = wi * (sigmoid(z) - yi);
            for (int j = 0; j < 7; ++j) grad[j] += coef * phi[j];
        }
        loss /= total_weight;
        if (!std::isfinite(loss)) throw DataError("non-finite training loss at epoch " + std::to_string(epoch));
        scorer.loss_history.push_back(loss);
        for (int j = 0; j < 7; ++j) scorer.weights[j] -= learning_rate * grad[j] / total_weight;
    }

    scorer.trained = true;
    return scorer;
}

double scorer_accuracy(const PixelScorer& scorer, const std::vector<LabeledCrop>& crops) {
    std::size_t correct = 0, total = 0;
    for (const auto& crop : crops) {
        const std::size_t n = crop.image.pixel_count();
        for (std::size_t i = 0; i < n; ++i) {
            const MaskLabel l = crop.mask.labels[i];
            if (l == MaskLabel::Ignore) continue;
            const double s = scorer.score(crop.image.data[i * 3], crop.image.data[i * 3 + 1],
                                          crop.image.data[i * 3 + 2]);
            const bool pred_fg = s >= 0.5;
            if (pred_fg == (l == MaskLabel::Foreground)) ++correct;
            ++total;
        }
    }
    return total == 0 ? 0.0 : static_cast<double>(correct) / total;
}

PixelScorer PixelScorer::load(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw DataError("cannot open scorer '" + file.string() + "'");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw DataError("malformed scorer '" + file.string() + "': " + e.what());
    }
    PixelScorer s;
    try {
        for (int i = 0; i < 7; ++i) s.weights[i] = j.at("weights").at(i).get<double>();
        s.trained = j.at("trained").get<bool>();
        s.seed = j.value("seed", 0ull);
        s.epochs = j.value("epochs", 0);
        s.learning_rate = j.value("learning_rate", 0.0);
        if (j.contains("loss_history")) s.loss_history = j["loss_history"].get<std::vector<double>>();
    } catch (const json::exception& e) {
        throw DataError("malformed scorer '" + file.string() + "': " + e.what());
    }
    for (double w : s.weights) {
        if (!std::isfinite(w)) throw DataError("scorer '" + file.string() + "' has non-finite weights");
    }
    return s;
}

void PixelScorer::save(const std::filesystem::path& file) const {
    json j{{"weights", weights},
           {"trained", trained},
           {"seed", seed},
           {"epochs", epochs},
           {"learning_rate", learning_rate},
           {"loss_history", loss_history}};
    std::ofstream out(file);
    if (!out) throw DataError("cannot write '" + file.string() + "'");
    out << j.dump(2) << "\n";
}

}  // namespace cranberry
