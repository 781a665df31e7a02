#include "cranberry/segmentation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <queue>

#include <json.hpp>

#include "cranberry/errors.hpp"
#include "cranberry/png_io.hpp"

namespace cranberry {

using nlohmann::json;

std::vector<std::pair<double, double>> convex_hull(std::vector<std::pair<double, double>> points) {
    std::sort(points.begin(), points.end());
    points.erase(std::unique(points.begin(), points.end()), points.end());
    const std::size_t n = points.size();
    if (n < 3) return points;

    auto cross = [](const std::pair<double, double>& o, const std::pair<double, double>& a,
                    const std::pair<double, double>& b) {
        return (a.first - o.first) * (b.second - o.second) - (a.second - o.second) * (b.first - o.first);
    };

    std::vector<std::pair<double, double>> hull(2 * n);
    std::size_t k = 0;
    for (std::size_t i = 0; i < n; ++i) {  // lower
        while (k >= 2 && cross(hull[k - 2], hull[k - 1], points[i]) <= 0) --k;
        hull[k++] = points[i];
    }
    for (std::size_t i = n - 1, t = k + 1; i-- > 0;) {  // upper
        while (k >= t && cross(hull[k - 2], hull[k - 1], points[i]) <= 0) --k;
        hull[k++] = points[i];
    }
    hull.resize(k - 1);
    return hull;
}

double polygon_area(const std::vector<std::pair<double, double>>& polygon) {
    const std::size_t n = polygon.size();
    if (n < 3) return 0.0;
    double twice = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const auto& [x0, y0] = polygon[i];
        const auto& [x1, y1] = polygon[(i + 1) % n];
        twice += x0 * y1 - x1 * y0;
    }
    return std::abs(twice) / 2.0;
}

double convexity(const std::vector<std::pair<int, int>>& pixels) {
    const std::size_t n = pixels.size();
    if (n == 0) throw DataError("convexity of an empty pixel set");
    if (n < 3) return 1.0;

    std::vector<std::pair<double, double>> centers;
    centers.reserve(n);
    for (const auto& [x, y] : pixels) centers.emplace_back(static_cast<double>(x), static_cast<double>(y));
    const auto hull = convex_hull(std::move(centers));
    if (hull.size() < 3) return 1.0;  // collinear set, degenerate by convention

    // Pixel centers undershoot the covered region; each hull vertex is a
    // pixel whose unit square pokes out, so compensate one px^2 per vertex.
    const double hull_area = polygon_area(hull) + static_cast<double>(hull.size());
    return std::min(1.0, static_cast<double>(n) / hull_area);
}

std::vector<double> distance_transform_sq(const std::vector<uint8_t>& foreground, int width, int height) {
    constexpr double kInf = 1e20;
    const std::size_t total = static_cast<std::size_t>(width) * height;
    if (foreground.size() != total) throw DataError("distance transform: mask size mismatch");

    std::vector<double> dist(total);
    const int nmax = std::max(width, height);
    std::vector<double> f(nmax), d(nmax), z(nmax + 1);
    std::vector<int> v(nmax);

    auto transform_1d = [&](int n) {
        int k = 0;
        v[0] = 0;
        z[0] = -kInf;
        z[1] = kInf;
        for (int q = 1; q < n; ++q) {
            double s = ((f[q] + q * q) - (f[v[k]] + v[k] * v[k])) / (2.0 * q - 2.0 * v[k]);
            while (s <= z[k]) {
                --k;
                s = ((f[q] + q * q) - (f[v[k]] + v[k] * v[k])) / (2.0 * q - 2.0 * v[k]);
            }
            ++k;
            v[k] = q;
            z[k] = s;
            z[k + 1] = kInf;
        }
        k = 0;
        for (int q = 0; q < n; ++q) {
            while (z[k + 1] < q) ++k;
            d[q] = (q - v[k]) * (q - v[k]) + f[v[k]];
        }
    };

    for (int x = 0; x < width; ++x) {  // columns
        for (int y = 0; y < height; ++y) f[y] = foreground[static_cast<std::size_t>(y) * width + x] ? kInf : 0.0;
        transform_1d(height);
        for (int y = 0; y < height; ++y) dist[static_cast<std::size_t>(y) * width + x] = d[y];
    }
    for (int y = 0; y < height; ++y) {  // rows
        for (int x = 0; x < width; ++x) f[x] = dist[static_cast<std::size_t>(y) * width + x];
        transform_1d(width);
        for (int x = 0; x < width; ++x) dist[static_cast<std::size_t>(y) * width + x] = d[x];
    }
    return dist;
}

namespace {

struct Blob {
    std::vector<std::pair<int, int>> pixels;
};

std::vector<Blob> connected_components(const std::vector<uint8_t>& fg, int width, int height) {
    std::vector<uint8_t> visited(fg.size(), 0);
    std::vector<Blob> blobs;
    std::vector<std::pair<int, int>> stack;
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            const std::size_t i = static_cast<std::size_t>(y) * width + x;
            if (!fg[i] || visited[i]) continue;
            Blob blob;
            stack.push_back({x, y});
            visited[i] = 1;
            while (!stack.empty()) {
                auto [cx, cy] = stack.back();
                stack.pop_back();
                blob.pixels.push_back({cx, cy});
                const int nx[4] = {cx - 1, cx + 1, cx, cx};
                const int ny[4] = {cy, cy, cy - 1, cy + 1};
                for (int k = 0; k < 4; ++k) {
                    if (nx[k] < 0 || nx[k] >= width || ny[k] < 0 || ny[k] >= height) continue;
                    const std::size_t j = static_cast<std::size_t>(ny[k]) * width + nx[k];
                    if (fg[j] && !visited[j]) {
                        visited[j] = 1;
                        stack.push_back({nx[k], ny[k]});
                    }
                }
            }
            blobs.push_back(std::move(blob));
        }
    }
    return blobs;
}

// Watershed seeds: distance-transform local maxima (8-neighborhood), kept
// greedily in descending-distance order subject to a minimum separation.
std::vector<std::pair<int, int>> pick_seeds(const Blob& blob, const std::vector<double>& dist,
                                            int width, int height, int min_separation) {
    struct Candidate {
        double d;
        int x, y;
    };
    std::vector<Candidate> candidates;
    std::vector<uint8_t> in_blob(static_cast<std::size_t>(width) * height, 0);
    for (const auto& [x, y] : blob.pixels) in_blob[static_cast<std::size_t>(y) * width + x] = 1;

    for (const auto& [x, y] : blob.pixels) {
        const double d0 = dist[static_cast<std::size_t>(y) * width + x];
        bool is_max = true;
        for (int dy = -1; dy <= 1 && is_max; ++dy) {
            for (int dx = -1; dx <= 1; ++dx) {
                if (dx == 0 && dy == 0) continue;
                const int nx = x + dx, ny = y + dy;
                if (nx < 0 || nx >= width || ny < 0 || ny >= height) continue;
                const std::size_t j = static_cast<std::size_t>(ny) * width + nx;
                if (in_blob[j] && dist[j] > d0) {
                    is_max = false;
                    break;
                }
            }
        }
        if (is_max) candidates.push_back({d0, x, y});
    }
    std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
        if (a.d != b.d) return a.d > b.d;
        if (a.y != b.y) return a.y < b.y;
        return a.x < b.x;
    });

    std::vector<std::pair<int, int>> seeds;
    const int sep2 = min_separation * min_separation;
    for (const auto& c : candidates) {
        bool clear = true;
        for (const auto& [sx, sy] : seeds) {
            const int d2 = (c.x - sx) * (c.x - sx) + (c.y - sy) * (c.y - sy);
            if (d2 < sep2) {
                clear = false;
                break;
            }
        }
        if (clear) seeds.push_back({c.x, c.y});
    }
    return seeds;
}

// Multi-source flood in descending distance order; deterministic tie-break on
// raster position.
std::vector<Blob> watershed_split(const Blob& blob, const std::vector<double>& dist,
                                  int width, int height, int min_separation) {
    const auto seeds = pick_seeds(blob, dist, width, height, min_separation);
    if (seeds.size() <= 1) return {blob};

    struct Node {
        double d;
        int x, y;
        int label;
    };
    auto later = [](const Node& a, const Node& b) {
        if (a.d != b.d) return a.d < b.d;  // max-heap on distance
        if (a.y != b.y) return a.y > b.y;
        return a.x > b.x;
    };
    std::priority_queue<Node, std::vector<Node>, decltype(later)> frontier(later);

    std::vector<int> label(static_cast<std::size_t>(width) * height, -1);
    std::vector<uint8_t> in_blob(static_cast<std::size_t>(width) * height, 0);
    for (const auto& [x, y] : blob.pixels) in_blob[static_cast<std::size_t>(y) * width + x] = 1;

    for (std::size_t s = 0; s < seeds.size(); ++s) {
        const auto& [x, y] = seeds[s];
        const std::size_t i = static_cast<std::size_t>(y) * width + x;
        label[i] = static_cast<int>(s);
        frontier.push({dist[i], x, y, static_cast<int>(s)});
    }
    while (!frontier.empty()) {
        const Node node = frontier.top();
        frontier.pop();
        const int nx[4] = {node.x - 1, node.x + 1, node.x, node.x};
        const int ny[4] = {node.y, node.y, node.y - 1, node.y + 1};
        for (int k = 0; k < 4; ++k) {
            if (nx[k] < 0 || nx[k] >= width || ny[k] < 0 || ny[k] >= height) continue;
            const std::size_t j = static_cast<std::size_t>(ny[k]) * width + nx[k];
            if (!in_blob[j] || label[j] >= 0) continue;
            label[j] = node.label;
            frontier.push({dist[j], nx[k], ny[k], node.label});
        }
    }

    std::vector<Blob> parts(seeds.size());
    for (const auto& [x, y] : blob.pixels) {
        parts[label[static_cast<std::size_t>(y) * width + x]].pixels.push_back({x, y});
    }
    return parts;
}

BerryInstance make_instance(std::vector<std::pair<int, int>> pixels, const Image& image, double conv) {
    BerryInstance inst;
    inst.area = static_cast<int>(pixels.size());
    double sx = 0.0, sy = 0.0, sr = 0.0, sg = 0.0, sb = 0.0;
    for (const auto& [x, y] : pixels) {
        sx += x;
        sy += y;
        const auto rgb = image.pixel(x, y);
        sr += rgb[0];
        sg += rgb[1];
        sb += rgb[2];
    }
    inst.centroid_x = sx / inst.area;
    inst.centroid_y = sy / inst.area;
    inst.mean_rgb = {static_cast<float>(sr / inst.area), static_cast<float>(sg / inst.area),
                     static_cast<float>(sb / inst.area)};
    inst.convexity = conv;
    inst.pixels = std::move(pixels);
    return inst;
}

}  // namespace

SegmentationMask segment(const Image& image, const PixelScorer& scorer, const SegParams& params) {
    if (!scorer.trained) throw DataError("segment called with an untrained scorer");
    if (!image.calibrated) throw DataError("segment requires a calibrated image");
    if (params.min_area < 1 || params.kappa <= 0.0 || params.kappa > 1.0) {
        throw DataError("invalid segmentation parameters");
    }

    const int w = image.width, h = image.height;
    std::vector<uint8_t> fg(static_cast<std::size_t>(w) * h, 0);
    for (std::size_t i = 0; i < fg.size(); ++i) {
        const double s = scorer.score(image.data[i * 3], image.data[i * 3 + 1], image.data[i * 3 + 2]);
        fg[i] = s >= params.tau ? 1 : 0;
    }

    const auto blobs = connected_components(fg, w, h);

    std::vector<double> dist;  // computed lazily, only when a blob needs splitting
    std::vector<BerryInstance> instances;
    for (const auto& blob : blobs) {
        if (static_cast<int>(blob.pixels.size()) < params.min_area) continue;
        const double conv = convexity(blob.pixels);
        if (conv >= params.kappa) {
            instances.push_back(make_instance(blob.pixels, image, conv));
            continue;
        }
        if (dist.empty()) dist = distance_transform_sq(fg, w, h);
        for (auto& part : watershed_split(blob, dist, w, h, params.seed_min_separation)) {
            if (static_cast<int>(part.pixels.size()) < params.min_area) continue;
            const double part_conv = convexity(part.pixels);
            if (part_conv < params.kappa) continue;
            instances.push_back(make_instance(std::move(part.pixels), image, part_conv));
        }
    }

    std::sort(instances.begin(), instances.end(), [](const BerryInstance& a, const BerryInstance& b) {
        if (a.centroid_y != b.centroid_y) return a.centroid_y < b.centroid_y;
        if (a.centroid_x != b.centroid_x) return a.centroid_x < b.centroid_x;
        return a.pixels.front() < b.pixels.front();
    });
    if (instances.size() > 65535) throw DataError("more than 65535 instances in one mask");

    SegmentationMask mask;
    mask.width = w;
    mask.height = h;
    mask.ids.assign(static_cast<std::size_t>(w) * h, 0);
    mask.instances = std::move(instances);
    for (std::size_t i = 0; i < mask.instances.size(); ++i) {
        for (const auto& [x, y] : mask.instances[i].pixels) {
            mask.ids[static_cast<std::size_t>(y) * w + x] = static_cast<uint16_t>(i + 1);
        }
    }
    return mask;
}

int count(const SegmentationMask& mask) {
    return static_cast<int>(mask.instances.size());
}

void SegmentationMask::validate() const {
    const std::size_t total = static_cast<std::size_t>(width) * height;
    if (ids.size() != total) throw DataError("mask raster size mismatch");

    std::vector<uint16_t> rebuilt(total, 0);
    for (std::size_t i = 0; i < instances.size(); ++i) {
        const auto& inst = instances[i];
        if (inst.area != static_cast<int>(inst.pixels.size())) {
            throw DataError("instance " + std::to_string(i + 1) + " area disagrees with its pixel set");
        }
        for (const auto& [x, y] : inst.pixels) {
            if (x < 0 || x >= width || y < 0 || y >= height) {
                throw DataError("instance " + std::to_string(i + 1) + " pixel out of bounds");
            }
            uint16_t& cell = rebuilt[static_cast<std::size_t>(y) * width + x];
            if (cell != 0) throw DataError("instances overlap at (" + std::to_string(x) + "," + std::to_string(y) + ")");
            cell = static_cast<uint16_t>(i + 1);
        }
        // 4-connectivity of the pixel set
        if (!inst.pixels.empty()) {
            std::vector<std::pair<int, int>> sorted = inst.pixels;
            std::sort(sorted.begin(), sorted.end());
            std::vector<uint8_t> seen(sorted.size(), 0);
            std::vector<std::size_t> stack{0};
            seen[0] = 1;
            std::size_t reached = 1;
            auto find = [&](int x, int y) {
                auto it = std::lower_bound(sorted.begin(), sorted.end(), std::make_pair(x, y));
                return (it != sorted.end() && *it == std::make_pair(x, y))
                           ? static_cast<long>(it - sorted.begin()) : -1L;
            };
            while (!stack.empty()) {
                const auto [x, y] = sorted[stack.back()];
                stack.pop_back();
                const int nx[4] = {x - 1, x + 1, x, x};
                const int ny[4] = {y, y, y - 1, y + 1};
                for (int k = 0; k < 4; ++k) {
                    const long j = find(nx[k], ny[k]);
                    if (j >= 0 && !seen[j]) {
                        seen[j] = 1;
                        ++reached;
                        stack.push_back(static_cast<std::size_t>(j));
                    }
                }
            }
            if (reached != sorted.size()) {
                throw DataError("instance " + std::to_string(i + 1) + " is not 4-connected");
            }
        }
    }
    if (rebuilt != ids) throw DataError("instance list does not reconstruct the id raster");
}

void SegmentationMask::save(const std::filesystem::path& png_file, const std::filesystem::path& json_file) const {
    write_png_gray16(png_file, ids, width, height);
    json j;
    j["width"] = width;
    j["height"] = height;
    j["instances"] = json::array();
    for (std::size_t i = 0; i < instances.size(); ++i) {
        const auto& inst = instances[i];
        j["instances"].push_back({{"id", i + 1},
                                  {"centroid", {inst.centroid_x, inst.centroid_y}},
                                  {"area", inst.area},
                                  {"convexity", inst.convexity},
                                  {"mean_rgb", inst.mean_rgb}});
    }
    std::ofstream out(json_file);
    if (!out) throw DataError("cannot write '" + json_file.string() + "'");
    out << j.dump(2) << "\n";
}

SegmentationMask SegmentationMask::load(const std::filesystem::path& png_file, const std::filesystem::path& json_file) {
    SegmentationMask mask;
    mask.ids = read_png_gray16(png_file, mask.width, mask.height);

    std::ifstream in(json_file);
    if (!in) throw DataError("cannot open '" + json_file.string() + "'");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw DataError("malformed mask table '" + json_file.string() + "': " + e.what());
    }
    if (j.at("width").get<int>() != mask.width || j.at("height").get<int>() != mask.height) {
        throw DataError("mask table '" + json_file.string() + "' disagrees with the id raster shape");
    }

    mask.instances.resize(j.at("instances").size());
    for (const auto& item : j.at("instances")) {
        const std::size_t id = item.at("id").get<std::size_t>();
        if (id < 1 || id > mask.instances.size()) throw DataError("mask table has out-of-range instance id");
        BerryInstance& inst = mask.instances[id - 1];
        inst.centroid_x = item.at("centroid").at(0).get<double>();
        inst.centroid_y = item.at("centroid").at(1).get<double>();
        inst.area = item.at("area").get<int>();
        inst.convexity = item.at("convexity").get<double>();
        for (int c = 0; c < 3; ++c) inst.mean_rgb[c] = item.at("mean_rgb").at(c).get<float>();
    }
    for (int y = 0; y < mask.height; ++y) {
        for (int x = 0; x < mask.width; ++x) {
            const uint16_t id = mask.ids[static_cast<std::size_t>(y) * mask.width + x];
            if (id == 0) continue;
            if (id > mask.instances.size()) throw DataError("id raster references a missing instance");
            mask.instances[id - 1].pixels.push_back({x, y});
        }
    }
    mask.validate();
    return mask;
}

std::string EvalReport::to_json() const {
    json j;
    j["miou"] = miou;
    j["count_mae"] = count_mae;
    j["per_image"] = json::array();
    for (const auto& p : per_image) {
        j["per_image"].push_back({{"image_id", p.image_id}, {"iou", p.iou}, {"count_error", p.count_error}});
    }
    return j.dump(2);
}

EvalReport evaluate(const std::vector<SegmentationMask>& preds, const std::vector<SegmentationMask>& truths) {
    if (preds.size() != truths.size()) throw DataError("evaluate: prediction/truth list lengths differ");
    if (preds.empty()) throw DataError("evaluate: empty input");

    EvalReport report;
    double iou_sum = 0.0, err_sum = 0.0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        const auto& p = preds[i];
        const auto& t = truths[i];
        if (p.width != t.width || p.height != t.height) {
            throw DataError("evaluate: shape mismatch at pair " + std::to_string(i));
        }
        std::size_t inter = 0, uni = 0;
        for (std::size_t k = 0; k < p.ids.size(); ++k) {
            const bool pf = p.ids[k] != 0, tf = t.ids[k] != 0;
            inter += pf && tf;
            uni += pf || tf;
        }
        const double iou = uni == 0 ? 1.0 : static_cast<double>(inter) / uni;
        const int err = std::abs(static_cast<int>(p.instances.size()) - static_cast<int>(t.instances.size()));
        report.per_image.push_back({std::to_string(i), iou, err});
        iou_sum += iou;
        err_sum += err;
    }
    report.miou = iou_sum / preds.size();
    report.count_mae = err_sum / preds.size();
    return report;
}

}  // namespace cranberry
