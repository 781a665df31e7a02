#include "cranberry/color_classes.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include <json.hpp>

#include "cranberry/errors.hpp"
#include "cranberry/rng.hpp"

namespace cranberry {

using nlohmann::json;

double redness(const std::array<double, 3>& rgb) {
    constexpr double eps = 1e-6;
    return rgb[0] / (rgb[0] + rgb[1] + rgb[2] + eps);
}

namespace {

inline double dist_sq(const Color& p, const std::array<double, 3>& c) {
    const double dr = p[0] - c[0], dg = p[1] - c[1], db = p[2] - c[2];
    return dr * dr + dg * dg + db * db;
}

int nearest_centroid(const Color& p, const std::vector<std::array<double, 3>>& centroids) {
    int best = 0;
    double best_d = std::numeric_limits<double>::max();
    for (std::size_t c = 0; c < centroids.size(); ++c) {
        const double d = dist_sq(p, centroids[c]);
        if (d < best_d) {
            best_d = d;
            best = static_cast<int>(c);
        }
    }
    return best;
}

// Exact 1-D k-means on sorted values via dynamic programming; returns the
// first index of each of the n_groups contiguous groups.
std::vector<int> partition_1d(const std::vector<double>& sorted_values, int n_groups) {
    const int m = static_cast<int>(sorted_values.size());
    std::vector<double> s(m + 1, 0.0), s2(m + 1, 0.0);
    for (int i = 0; i < m; ++i) {
        s[i + 1] = s[i] + sorted_values[i];
        s2[i + 1] = s2[i] + sorted_values[i] * sorted_values[i];
    }
    auto cost = [&](int i, int j) {  // SSE of values[i..j]
        const int len = j - i + 1;
        const double sum = s[j + 1] - s[i];
        return (s2[j + 1] - s2[i]) - sum * sum / len;
    };

    constexpr double kInf = std::numeric_limits<double>::max();
    std::vector<std::vector<double>> best(n_groups + 1, std::vector<double>(m, kInf));
    std::vector<std::vector<int>> split(n_groups + 1, std::vector<int>(m, 0));
    for (int j = 0; j < m; ++j) best[1][j] = cost(0, j);
    for (int g = 2; g <= n_groups; ++g) {
        for (int j = g - 1; j < m; ++j) {
            for (int i = g - 1; i <= j; ++i) {
                const double c = best[g - 1][i - 1] + cost(i, j);
                if (c < best[g][j]) {
                    best[g][j] = c;
                    split[g][j] = i;
                }
            }
        }
    }

    std::vector<int> starts(n_groups);
    int j = m - 1;
    for (int g = n_groups; g >= 2; --g) {
        starts[g - 1] = split[g][j];
        j = split[g][j] - 1;
    }
    starts[0] = 0;
    return starts;
}

}  // namespace

KMeansResult kmeans_rgb(const std::vector<Color>& points, int k, uint64_t seed, int max_iters, double tol) {
    const std::size_t n = points.size();
    if (k < 1) throw DataError("k must be positive");
    if (n < static_cast<std::size_t>(k)) {
        throw DataError("k-means needs at least k=" + std::to_string(k) + " points, got " + std::to_string(n));
    }

    std::mt19937_64 rng(mix_seed(seed, 0x6b6d6561));
    KMeansResult result;
    result.centroids.reserve(k);

    // k-means++ seeding
    {
        const std::size_t first = bounded(rng, n);
        result.centroids.push_back({points[first][0], points[first][1], points[first][2]});
        std::vector<double> d2(n);
        while (result.centroids.size() < static_cast<std::size_t>(k)) {
            double total = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                double best = std::numeric_limits<double>::max();
                for (const auto& c : result.centroids) best = std::min(best, dist_sq(points[i], c));
                d2[i] = best;
                total += best;
            }
            std::size_t pick;
            if (total <= 0.0) {
                pick = bounded(rng, n);
            } else {
                const double r = u01(rng) * total;
                double acc = 0.0;
                pick = n - 1;
                for (std::size_t i = 0; i < n; ++i) {
                    acc += d2[i];
                    if (acc >= r) {
                        pick = i;
                        break;
                    }
                }
            }
            result.centroids.push_back({points[pick][0], points[pick][1], points[pick][2]});
        }
    }

    result.assignment.assign(n, 0);
    for (int iter = 0; iter < max_iters; ++iter) {
        double objective = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            result.assignment[i] = nearest_centroid(points[i], result.centroids);
            objective += dist_sq(points[i], result.centroids[result.assignment[i]]);
        }
        result.objective_history.push_back(objective);

        std::vector<std::array<double, 3>> sums(k, {0.0, 0.0, 0.0});
        std::vector<std::size_t> counts(k, 0);
        for (std::size_t i = 0; i < n; ++i) {
            const int a = result.assignment[i];
            for (int c = 0; c < 3; ++c) sums[a][c] += points[i][c];
            ++counts[a];
        }

        double movement = 0.0;
        for (int c = 0; c < k; ++c) {
            std::array<double, 3> updated;
            if (counts[c] > 0) {
                for (int ch = 0; ch < 3; ++ch) updated[ch] = sums[c][ch] / counts[c];
            } else {
                // reseed an empty cluster to the point farthest from its centroid
                std::size_t far = 0;
                double far_d = -1.0;
                for (std::size_t i = 0; i < n; ++i) {
                    const double d = dist_sq(points[i], result.centroids[result.assignment[i]]);
                    if (d > far_d) {
                        far_d = d;
                        far = i;
                    }
                }
                updated = {points[far][0], points[far][1], points[far][2]};
            }
            double move_sq = 0.0;
            for (int ch = 0; ch < 3; ++ch) {
                const double d = updated[ch] - result.centroids[c][ch];
                move_sq += d * d;
            }
            movement = std::max(movement, std::sqrt(move_sq));
            result.centroids[c] = updated;
        }
        if (movement < tol) break;
    }

    // final assignment consistent with the returned centroids
    for (std::size_t i = 0; i < n; ++i) result.assignment[i] = nearest_centroid(points[i], result.centroids);
    return result;
}

ColorClassModel build_color_model(const std::vector<Color>& pixels, int k, uint64_t seed) {
    if (k < 5) throw DataError("color model needs k >= 5 clusters, got " + std::to_string(k));
    const KMeansResult km = kmeans_rgb(pixels, k, seed);

    // distinct centroids
    {
        std::vector<std::array<double, 3>> uniq;
        for (const auto& c : km.centroids) {
            bool dup = false;
            for (const auto& u : uniq) {
                const double dr = c[0] - u[0], dg = c[1] - u[1], db = c[2] - u[2];
                if (dr * dr + dg * dg + db * db < 1e-18) {
                    dup = true;
                    break;
                }
            }
            if (!dup) uniq.push_back(c);
        }
        if (uniq.size() < 5) {
            throw DataError("degenerate clustering: < 5 distinct centroids");
        }
    }

    std::vector<int> order(k);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return redness(km.centroids[a]) < redness(km.centroids[b]);
    });

    std::vector<double> rho_sorted(k);
    for (int i = 0; i < k; ++i) rho_sorted[i] = redness(km.centroids[order[i]]);
    const std::vector<int> starts = partition_1d(rho_sorted, 5);

    ColorClassModel model;
    model.centroids = km.centroids;
    model.class_map.assign(k, 0);
    model.seed = seed;
    model.k = k;

    std::vector<std::size_t> member_counts(k, 0);
    for (int a : km.assignment) ++member_counts[a];

    for (int cls = 0; cls < 5; ++cls) {
        const int lo = starts[cls];
        const int hi = cls == 4 ? k : starts[cls + 1];
        std::array<double, 3> weighted{0.0, 0.0, 0.0};
        std::array<double, 3> plain{0.0, 0.0, 0.0};
        double weight = 0.0;
        for (int i = lo; i < hi; ++i) {
            const int ci = order[i];
            model.class_map[ci] = cls + 1;
            const double w = static_cast<double>(member_counts[ci]);
            for (int ch = 0; ch < 3; ++ch) {
                weighted[ch] += w * km.centroids[ci][ch];
                plain[ch] += km.centroids[ci][ch] / (hi - lo);
            }
            weight += w;
        }
        if (weight > 0.0) {
            for (int ch = 0; ch < 3; ++ch) model.class_centroids[cls][ch] = weighted[ch] / weight;
        } else {
            model.class_centroids[cls] = plain;
        }
    }

    for (int cls = 1; cls < 5; ++cls) {
        if (redness(model.class_centroids[cls]) <= redness(model.class_centroids[cls - 1])) {
            throw DataError("class centroids not strictly increasing in redness; input colors too degenerate");
        }
    }
    return model;
}

int ColorClassModel::class_of_color(float r, float g, float b) const {
    return class_map[nearest_centroid({r, g, b}, centroids)];
}

std::vector<Color> sample_berry_pixels(const std::vector<SegmentationMask>& masks,
                                       const std::vector<Image>& images, std::size_t n, uint64_t seed,
                                       std::vector<std::string>* warnings) {
    std::vector<const Image*> ptrs;
    ptrs.reserve(images.size());
    for (const auto& img : images) ptrs.push_back(&img);
    return sample_berry_pixels(masks, ptrs, n, seed, warnings);
}

std::vector<Color> sample_berry_pixels(const std::vector<SegmentationMask>& masks,
                                       const std::vector<const Image*>& images, std::size_t n, uint64_t seed,
                                       std::vector<std::string>* warnings) {
    if (masks.size() != images.size()) throw DataError("sample_berry_pixels: mask/image list lengths differ");
    if (n < 1) throw DataError("sample_berry_pixels: n must be >= 1");

    std::vector<Color> all;
    for (std::size_t m = 0; m < masks.size(); ++m) {
        for (const auto& inst : masks[m].instances) {
            for (const auto& [x, y] : inst.pixels) {
                const auto rgb = images[m]->pixel(x, y);
                all.push_back({rgb[0], rgb[1], rgb[2]});
            }
        }
    }
    if (all.size() <= n) {
        if (all.size() < n && warnings) {
            warnings->push_back("only " + std::to_string(all.size()) + " berry pixels available, requested " +
                                std::to_string(n) + "; returning all");
        }
        return all;
    }

    std::mt19937_64 rng(mix_seed(seed, 0x73616d70));
    std::vector<std::size_t> idx(all.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::vector<Color> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t j = i + bounded(rng, idx.size() - i);
        std::swap(idx[i], idx[j]);
        out.push_back(all[idx[i]]);
    }
    return out;
}

BerryClassification classify_berry(const BerryInstance& instance, const Image& image,
                                   const ColorClassModel& model) {
    if (instance.pixels.empty()) throw DataError("classify_berry: empty instance");

    std::array<std::size_t, 5> votes{};
    for (const auto& [x, y] : instance.pixels) {
        if (!image.in_bounds(x, y)) throw DataError("classify_berry: instance pixel outside the image");
        const auto rgb = image.pixel(x, y);
        ++votes[model.class_of_color(rgb[0], rgb[1], rgb[2]) - 1];
    }

    BerryClassification result;
    const double total = static_cast<double>(instance.pixels.size());
    int best = 0;
    for (int c = 0; c < 5; ++c) {
        result.vote_fractions[c] = votes[c] / total;
        if (votes[c] >= votes[best]) best = c;  // >= so ties go to the redder class
    }
    result.cls = best + 1;
    return result;
}

BerryClassification classify_berry(const BerryInstance& instance, const Image& image,
                                   const ColorClassModel& model, const CaptureMeta& meta) {
    BerryClassification result = classify_berry(instance, image, model);
    result.bog_id = meta.bog_id;
    result.date = meta.date;
    return result;
}

ClassHistogram class_histogram(const std::vector<BerryClassification>& classifications,
                               const CaptureMeta& meta) {
    ClassHistogram hist;
    hist.bog_id = meta.bog_id;
    hist.date = meta.date;
    hist.berry_count = static_cast<int>(classifications.size());
    if (classifications.empty()) return hist;

    std::array<std::size_t, 5> counts{};
    for (const auto& c : classifications) {
        if (c.bog_id != meta.bog_id || !c.date || !(*c.date == meta.date)) {
            throw DataError("class_histogram: mixed bog/date in input");
        }
        if (c.cls < 1 || c.cls > 5) throw DataError("class_histogram: class out of range");
        ++counts[c.cls - 1];
    }
    for (int c = 0; c < 5; ++c) hist.fractions[c] = static_cast<double>(counts[c]) / classifications.size();
    return hist;
}

ColorClassModel ColorClassModel::load(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw DataError("cannot open color model '" + file.string() + "'");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw DataError("malformed color model '" + file.string() + "': " + e.what());
    }
    ColorClassModel m;
    try {
        m.k = j.at("k").get<int>();
        m.seed = j.at("seed").get<uint64_t>();
        for (const auto& c : j.at("centroids")) {
            m.centroids.push_back({c.at(0).get<double>(), c.at(1).get<double>(), c.at(2).get<double>()});
        }
        m.class_map = j.at("class_map").get<std::vector<int>>();
        for (int cls = 0; cls < 5; ++cls) {
            for (int ch = 0; ch < 3; ++ch) {
                m.class_centroids[cls][ch] = j.at("class_centroids").at(cls).at(ch).get<double>();
            }
        }
    } catch (const json::exception& e) {
        throw DataError("malformed color model '" + file.string() + "': " + e.what());
    }
    if (m.centroids.size() != m.class_map.size() || m.centroids.size() != static_cast<std::size_t>(m.k)) {
        throw DataError("color model '" + file.string() + "' is inconsistent");
    }
    std::array<bool, 5> seen{};
    for (int cls : m.class_map) {
        if (cls < 1 || cls > 5) throw DataError("color model '" + file.string() + "' has a class outside 1..5");
        seen[cls - 1] = true;
    }
    for (int cls = 0; cls < 5; ++cls) {
        if (!seen[cls]) {
            throw DataError("color model '" + file.string() + "' leaves class " + std::to_string(cls + 1) +
                            " without a centroid");
        }
    }
    return m;
}

void ColorClassModel::save(const std::filesystem::path& file) const {
    json j;
    j["k"] = k;
    j["seed"] = seed;
    j["centroids"] = json::array();
    for (const auto& c : centroids) j["centroids"].push_back(c);
    j["class_map"] = class_map;
    j["class_centroids"] = json::array();
    for (const auto& c : class_centroids) j["class_centroids"].push_back(c);
    std::ofstream out(file);
    if (!out) throw DataError("cannot write '" + file.string() + "'");
    out << j.dump(2) << "\n";
}

}  // namespace cranberry
