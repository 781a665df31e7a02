#include "cranberry/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <vector>

#include <json.hpp>

#include "cranberry/errors.hpp"

namespace cranberry {

using nlohmann::json;

double luminance(const std::array<double, 3>& rgb) {
    return 0.2126 * rgb[0] + 0.7152 * rgb[1] + 0.0722 * rgb[2];
}

GreyReference GreyReference::load(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw DataError("cannot open grey reference '" + file.string() + "'");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw DataError("malformed grey reference '" + file.string() + "': " + e.what());
    }
    if (!j.is_array() || j.size() != 6) throw DataError("grey reference must be a 6-float JSON array");
    GreyReference ref;
    for (int i = 0; i < 6; ++i) ref.values[i] = j[i].get<double>();
    for (int i = 1; i < 6; ++i) {
        if (ref.values[i] >= ref.values[i - 1]) throw DataError("grey reference not strictly decreasing");
    }
    for (double v : ref.values) {
        if (v < 0.0 || v > 1.0) throw DataError("grey reference values must lie in [0,1]");
    }
    return ref;
}

void GreyReference::save(const std::filesystem::path& file) const {
    std::ofstream out(file);
    if (!out) throw DataError("cannot write '" + file.string() + "'");
    out << json(values).dump() << "\n";
}

GreyPatchMeasurement measure_grey_patches(const Image& card_image, const std::array<Rect, 6>& patch_rects,
                                          const std::string& session_id) {
    GreyPatchMeasurement m;
    m.session_id = session_id;

    for (int p = 0; p < 6; ++p) {
        const Rect& r = patch_rects[p];
        if (r.w <= 0 || r.h <= 0 || r.x < 0 || r.y < 0 ||
            r.x + r.w > card_image.width || r.y + r.h > card_image.height) {
            throw DataError("patch rectangle " + std::to_string(p + 1) + " outside the card image");
        }
        const int n = r.w * r.h;
        std::vector<float> channel(n);
        const int drop = static_cast<int>(n * 0.10);
        const int kept = n - 2 * drop;
        if (kept < 25) {
            throw DataError("patch " + std::to_string(p + 1) + " has only " + std::to_string(kept) +
                            " pixels after trimming (need >= 25)");
        }
        for (int c = 0; c < 3; ++c) {
            int i = 0;
            for (int y = r.y; y < r.y + r.h; ++y) {
                for (int x = r.x; x < r.x + r.w; ++x) channel[i++] = card_image.at(x, y, c);
            }
            std::sort(channel.begin(), channel.end());
            double sum = 0.0;
            for (int j = drop; j < n - drop; ++j) sum += channel[j];
            m.means[p][c] = sum / kept;
        }
        m.pixel_counts[p] = kept;
    }

    for (int p = 1; p < 6; ++p) {
        if (luminance(m.means[p]) >= luminance(m.means[p - 1])) {
            throw DataError("grey patches not ordered lightest to darkest (patch " +
                            std::to_string(p) + " vs " + std::to_string(p + 1) + ")");
        }
    }
    return m;
}

RadiometricCorrection fit_correction(const GreyPatchMeasurement& measured, const GreyReference& reference) {
    RadiometricCorrection corr;
    corr.session_id = measured.session_id;

    double ss_residual = 0.0;
    for (int c = 0; c < 3; ++c) {
        double sm = 0.0, sr = 0.0, smm = 0.0, smr = 0.0;
        for (int i = 0; i < 6; ++i) {
            const double mi = measured.means[i][c];
            const double ri = reference.values[i];
            sm += mi;
            sr += ri;
            smm += mi * mi;
            smr += mi * ri;
        }
        const double denom = 6.0 * smm - sm * sm;
        if (std::abs(denom) < 1e-12) {
            throw DataError("singular fit: channel " + std::to_string(c) + " measurements have no spread");
        }
        const double g = (6.0 * smr - sm * sr) / denom;
        const double o = (sr - g * sm) / 6.0;
        if (g <= 0.0) throw DataError("inverted response: fitted gain for channel " + std::to_string(c) + " is not positive");
        corr.gain[c] = g;
        corr.offset[c] = o;
        for (int i = 0; i < 6; ++i) {
            const double e = g * measured.means[i][c] + o - reference.values[i];
            ss_residual += e * e;
        }
    }
    corr.residual_rms = std::sqrt(ss_residual / 18.0);
    return corr;
}

Image apply_correction(const Image& image, const RadiometricCorrection& corr) {
    if (image.calibrated) throw DataError("image already calibrated; double correction forbidden");
    Image out = image;
    out.calibrated = true;
    const std::size_t n = image.pixel_count();
    for (std::size_t i = 0; i < n; ++i) {
        for (int c = 0; c < 3; ++c) {
            double v = corr.gain[c] * image.data[i * 3 + c] + corr.offset[c];
            if (v < 0.0) v = 0.0;
            if (v > 1.0) v = 1.0;
            out.data[i * 3 + c] = static_cast<float>(v);
        }
    }
    return out;
}

RadiometricCorrection RadiometricCorrection::load(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw DataError("cannot open calibration '" + file.string() + "'");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw DataError("malformed calibration '" + file.string() + "': " + e.what());
    }
    RadiometricCorrection corr;
    try {
        corr.session_id = j.value("session_id", "");
        for (int c = 0; c < 3; ++c) {
            corr.gain[c] = j.at("gain").at(c).get<double>();
            corr.offset[c] = j.at("offset").at(c).get<double>();
        }
        corr.residual_rms = j.at("residual_rms").get<double>();
    } catch (const json::exception& e) {
        throw DataError("malformed calibration '" + file.string() + "': " + e.what());
    }
    for (double g : corr.gain) {
        if (g <= 0.0) throw DataError("calibration '" + file.string() + "' has non-positive gain");
    }
    if (corr.residual_rms < 0.0) throw DataError("calibration '" + file.string() + "' has negative residual");
    return corr;
}

void RadiometricCorrection::save(const std::filesystem::path& file) const {
    json j{{"session_id", session_id},
           {"gain", gain},
           {"offset", offset},
           {"residual_rms", residual_rms}};
    std::ofstream out(file);
    if (!out) throw DataError("cannot write '" + file.string() + "'");
    out << j.dump(2) << "\n";
}

}  // namespace cranberry
