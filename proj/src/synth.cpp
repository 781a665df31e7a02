#include "cranberry/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "cranberry/errors.hpp"
#include "cranberry/png_io.hpp"
#include "cranberry/rng.hpp"

namespace cranberry {

using nlohmann::json;
namespace fs = std::filesystem;

const std::array<std::array<float, 3>, 5>& class_palette() {
    // green -> deep red; redness 0.33, 0.44, 0.53, 0.62, 0.72
    static const std::array<std::array<float, 3>, 5> palette{{
        {0.45f, 0.62f, 0.28f},
        {0.62f, 0.58f, 0.22f},
        {0.72f, 0.42f, 0.22f},
        {0.72f, 0.26f, 0.18f},
        {0.62f, 0.12f, 0.12f},
    }};
    return palette;
}

std::array<float, 3> foliage_base() { return {0.16f, 0.34f, 0.14f}; }

std::array<std::array<float, 3>, 5> load_palette(const fs::path& file) {
    std::ifstream in(file);
    if (!in) throw DataError("cannot open palette '" + file.string() + "'");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw DataError("malformed palette '" + file.string() + "': " + e.what());
    }
    if (!j.is_array() || j.size() != 5) throw DataError("palette must be a JSON array of five [r,g,b] rows");
    std::array<std::array<float, 3>, 5> palette;
    for (int c = 0; c < 5; ++c) {
        for (int ch = 0; ch < 3; ++ch) palette[c][ch] = j.at(c).at(ch).get<float>();
    }
    for (int c = 1; c < 5; ++c) {
        if (redness({palette[c][0], palette[c][1], palette[c][2]}) <=
            redness({palette[c - 1][0], palette[c - 1][1], palette[c - 1][2]})) {
            throw DataError("palette '" + file.string() + "' is not strictly increasing in redness");
        }
    }
    return palette;
}

namespace {

void validate_mixture(const std::array<double, 5>& mix) {
    double sum = 0.0;
    for (double m : mix) {
        if (m < 0.0) throw DataError("class mixture has a negative entry");
        sum += m;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw DataError("class mixture does not sum to 1");
}

// Largest-remainder apportionment of n berries over the mixture.
std::array<int, 5> apportion(const std::array<double, 5>& mix, int n) {
    std::array<int, 5> counts{};
    std::array<double, 5> remainder{};
    int assigned = 0;
    for (int c = 0; c < 5; ++c) {
        const double exact = mix[c] * n;
        counts[c] = static_cast<int>(std::floor(exact + 1e-9));
        remainder[c] = exact - counts[c];
        assigned += counts[c];
    }
    std::array<int, 5> order{0, 1, 2, 3, 4};
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return remainder[a] > remainder[b]; });
    for (int i = 0; assigned < n; ++i) {
        ++counts[order[i % 5]];
        ++assigned;
    }
    return counts;
}

struct PlacedBerry {
    double cx, cy, a, b, theta;
};

}  // namespace

SyntheticScene generate_scene(const SceneSpec& spec) {
    validate_mixture(spec.class_mixture);
    if (spec.n_berries < 0) throw DataError("berry count must be >= 0");
    if (spec.width < 32 || spec.height < 32) throw DataError("scene too small");
    if (spec.radius_min < 2.0 || spec.radius_max < spec.radius_min) throw DataError("bad radius range");
    if (spec.jitter < 0.0 || spec.occlusion_rate < 0.0 || spec.occlusion_rate > 1.0) {
        throw DataError("bad jitter or occlusion rate");
    }
    for (int c = 1; c < 5; ++c) {
        if (redness({spec.palette[c][0], spec.palette[c][1], spec.palette[c][2]}) <=
            redness({spec.palette[c - 1][0], spec.palette[c - 1][1], spec.palette[c - 1][2]})) {
            throw DataError("scene palette is not strictly increasing in redness");
        }
    }

    std::mt19937_64 rng(mix_seed(spec.seed, 0x7363656e));
    const int w = spec.width, h = spec.height;

    SyntheticScene scene;
    scene.seed = spec.seed;
    scene.image = Image(w, h);
    scene.image.calibrated = true;  // painted colors are ground-truth albedo

    // low-frequency foliage: random lattice every 16 px, bilinear in between
    {
        const int step = 16;
        const int gw = w / step + 2, gh = h / step + 2;
        std::vector<std::array<float, 3>> lattice(static_cast<std::size_t>(gw) * gh);
        const auto base = foliage_base();
        for (auto& node : lattice) {
            for (int c = 0; c < 3; ++c) {
                node[c] = base[c] + static_cast<float>(uniform(rng, -0.05, 0.05));
            }
        }
        for (int y = 0; y < h; ++y) {
            const int gy = y / step;
            const float fy = static_cast<float>(y % step) / step;
            for (int x = 0; x < w; ++x) {
                const int gx = x / step;
                const float fx = static_cast<float>(x % step) / step;
                for (int c = 0; c < 3; ++c) {
                    const float top = lattice[gy * gw + gx][c] * (1 - fx) + lattice[gy * gw + gx + 1][c] * fx;
                    const float bot = lattice[(gy + 1) * gw + gx][c] * (1 - fx) + lattice[(gy + 1) * gw + gx + 1][c] * fx;
                    float v = top * (1 - fy) + bot * fy;
                    scene.image.at(x, y, c) = std::clamp(v, 0.0f, 1.0f);
                }
            }
        }
    }

    // class assignment: apportioned counts, shuffled for spatial mixing
    std::vector<int> classes;
    {
        const auto counts = apportion(spec.class_mixture, spec.n_berries);
        for (int c = 0; c < 5; ++c) classes.insert(classes.end(), counts[c], c + 1);
        for (std::size_t i = classes.size(); i > 1; --i) {
            std::swap(classes[i - 1], classes[bounded(rng, i)]);
        }
    }

    const int n = spec.n_berries;
    // at least one free-standing berry so occluders have a target
    const int n_overlap = n > 0 ? std::min(static_cast<int>(n * spec.occlusion_rate), n - 1) : 0;
    const int n_base = n - n_overlap;

    std::vector<PlacedBerry> placed;
    std::vector<uint8_t> target_used(std::max(n, 1), 0);  // one occluder per target
    const auto& palette = spec.palette;
    const int max_attempts = 1000;

    for (int i = 0; i < n; ++i) {
        const double radius = uniform(rng, spec.radius_min, spec.radius_max);
        const double b_axis = radius * uniform(rng, 0.88, 1.0);
        const double theta = uniform(rng, 0.0, 3.14159265358979323846);

        PlacedBerry berry{0, 0, radius, b_axis, theta};
        bool ok = false;
        if (i < n_base) {
            const double margin = radius + 2.0;
            if (2.0 * margin >= w || 2.0 * margin >= h) throw DataError("scene too small for the berry radius");
            for (int attempt = 0; attempt < max_attempts && !ok; ++attempt) {
                berry.cx = uniform(rng, margin, w - margin);
                berry.cy = uniform(rng, margin, h - margin);
                ok = true;
                for (const auto& other : placed) {
                    const double dx = berry.cx - other.cx, dy = berry.cy - other.cy;
                    const double need = berry.a + other.a + 2.0;
                    if (dx * dx + dy * dy < need * need) {
                        ok = false;
                        break;
                    }
                }
            }
        } else {
            for (int attempt = 0; attempt < max_attempts && !ok; ++attempt) {
                const int t = static_cast<int>(bounded(rng, placed.size()));
                if (target_used[t]) continue;
                const double angle = uniform(rng, 0.0, 2.0 * 3.14159265358979323846);
                const double d = 0.75 * (berry.a + placed[t].a);
                berry.cx = placed[t].cx + d * std::cos(angle);
                berry.cy = placed[t].cy + d * std::sin(angle);
                const double margin = berry.a + 2.0;
                if (berry.cx < margin || berry.cx > w - margin || berry.cy < margin || berry.cy > h - margin) continue;
                ok = true;
                for (int o = 0; o < static_cast<int>(placed.size()); ++o) {
                    if (o == t) continue;
                    const double dx = berry.cx - placed[o].cx, dy = berry.cy - placed[o].cy;
                    const double need = berry.a + placed[o].a + 2.0;
                    if (dx * dx + dy * dy < need * need) {
                        ok = false;
                        break;
                    }
                }
                if (ok) target_used[t] = 1;
            }
        }
        if (!ok) {
            throw DataError("could not place berry " + std::to_string(i + 1) + " of " + std::to_string(n) +
                            " within " + std::to_string(max_attempts) + " attempts");
        }
        placed.push_back(berry);

        BerrySpec bs;
        bs.center_x = berry.cx;
        bs.center_y = berry.cy;
        bs.radius = radius;
        bs.cls = classes[i];
        for (int c = 0; c < 3; ++c) {
            bs.base_rgb[c] = std::clamp(
                palette[bs.cls - 1][c] + static_cast<float>(uniform(rng, -spec.jitter / 2, spec.jitter / 2)),
                0.0f, 1.0f);
        }
        scene.berry_specs.push_back(bs);
    }

    // paint in index order; later berries occlude earlier ones
    std::vector<int> owner(static_cast<std::size_t>(w) * h, -1);
    for (int i = 0; i < n; ++i) {
        const auto& berry = placed[i];
        const auto& bs = scene.berry_specs[i];
        const double ct = std::cos(berry.theta), st = std::sin(berry.theta);
        const double reach = berry.a + 1.5;
        const int x0 = std::max(0, static_cast<int>(std::floor(berry.cx - reach)));
        const int x1 = std::min(w - 1, static_cast<int>(std::ceil(berry.cx + reach)));
        const int y0 = std::max(0, static_cast<int>(std::floor(berry.cy - reach)));
        const int y1 = std::min(h - 1, static_cast<int>(std::ceil(berry.cy + reach)));
        const double edge_scale = (berry.a + berry.b) / 2.0;
        for (int y = y0; y <= y1; ++y) {
            for (int x = x0; x <= x1; ++x) {
                const double dx = x - berry.cx, dy = y - berry.cy;
                const double u = (dx * ct + dy * st) / berry.a;
                const double v = (-dx * st + dy * ct) / berry.b;
                const double rho = std::sqrt(u * u + v * v);
                const double alpha = std::clamp((1.0 - rho) * edge_scale + 0.5, 0.0, 1.0);
                if (alpha <= 0.0) continue;
                for (int c = 0; c < 3; ++c) {
                    const float jittered = std::clamp(
                        bs.base_rgb[c] + static_cast<float>(uniform(rng, -spec.jitter / 2, spec.jitter / 2)),
                        0.0f, 1.0f);
                    const float prev = scene.image.at(x, y, c);
                    scene.image.at(x, y, c) = static_cast<float>(alpha * jittered + (1.0 - alpha) * prev);
                }
                if (alpha >= 0.5) owner[static_cast<std::size_t>(y) * w + x] = i;
            }
        }
    }

    // truth mask, one instance per berry spec
    scene.truth_mask.width = w;
    scene.truth_mask.height = h;
    scene.truth_mask.ids.assign(static_cast<std::size_t>(w) * h, 0);
    scene.truth_mask.instances.resize(n);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const int o = owner[static_cast<std::size_t>(y) * w + x];
            if (o < 0) continue;
            scene.truth_mask.ids[static_cast<std::size_t>(y) * w + x] = static_cast<uint16_t>(o + 1);
            scene.truth_mask.instances[o].pixels.push_back({x, y});
        }
    }
    for (int i = 0; i < n; ++i) {
        BerryInstance& inst = scene.truth_mask.instances[i];
        if (inst.pixels.empty()) throw DataError("berry " + std::to_string(i + 1) + " was fully occluded");
        inst.area = static_cast<int>(inst.pixels.size());
        double sx = 0, sy = 0, sr = 0, sg = 0, sb = 0;
        for (const auto& [x, y] : inst.pixels) {
            sx += x;
            sy += y;
            const auto rgb = scene.image.pixel(x, y);
            sr += rgb[0];
            sg += rgb[1];
            sb += rgb[2];
        }
        inst.centroid_x = sx / inst.area;
        inst.centroid_y = sy / inst.area;
        inst.mean_rgb = {static_cast<float>(sr / inst.area), static_cast<float>(sg / inst.area),
                         static_cast<float>(sb / inst.area)};
        inst.convexity = convexity(inst.pixels);

        const int px = static_cast<int>(std::lround(scene.berry_specs[i].center_x));
        const int py = static_cast<int>(std::lround(scene.berry_specs[i].center_y));
        if (owner[static_cast<std::size_t>(py) * w + px] != i) {
            throw DataError("berry center (" + std::to_string(px) + "," + std::to_string(py) +
                            ") not inside its own instance");
        }
        scene.points.points.push_back({px, py});
    }
    return scene;
}

void SeasonScript::save(const fs::path& file) const {
    json j;
    j["bog_id"] = bog_id;
    j["variety"] = cranberry::to_string(variety);
    j["dates"] = json::array();
    for (const auto& d : dates) j["dates"].push_back(d.to_string());
    j["mixtures"] = json::array();
    for (const auto& m : mixtures) j["mixtures"].push_back(m);
    std::ofstream out(file);
    if (!out) throw DataError("cannot write '" + file.string() + "'");
    out << j.dump(2) << "\n";
}

SeasonScript SeasonScript::load(const fs::path& file) {
    std::ifstream in(file);
    if (!in) throw DataError("cannot open season script '" + file.string() + "'");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw DataError("malformed season script '" + file.string() + "': " + e.what());
    }
    SeasonScript script;
    try {
        script.bog_id = j.at("bog_id").get<std::string>();
        script.variety = variety_from_string(j.at("variety").get<std::string>());
        for (const auto& d : j.at("dates")) script.dates.push_back(Date::parse(d.get<std::string>()));
        for (const auto& m : j.at("mixtures")) {
            std::array<double, 5> mix{};
            for (int c = 0; c < 5; ++c) mix[c] = m.at(c).get<double>();
            script.mixtures.push_back(mix);
        }
    } catch (const json::exception& e) {
        throw DataError("malformed season script '" + file.string() + "': " + e.what());
    }
    if (script.dates.size() != script.mixtures.size()) {
        throw DataError("season script '" + file.string() + "' has mismatched dates/mixtures");
    }
    return script;
}

std::vector<std::pair<SyntheticScene, CaptureMeta>> generate_season(const SeasonScript& script,
                                                                    const SceneSpec& scene_spec,
                                                                    uint64_t seed) {
    if (script.dates.size() != script.mixtures.size()) throw DataError("season script dates/mixtures mismatch");
    for (const auto& m : script.mixtures) validate_mixture(m);

    std::vector<std::pair<SyntheticScene, CaptureMeta>> season;
    for (std::size_t d = 0; d < script.dates.size(); ++d) {
        SceneSpec spec = scene_spec;
        spec.class_mixture = script.mixtures[d];
        spec.seed = mix_seed(seed, d);
        CaptureMeta meta;
        meta.bog_id = script.bog_id;
        meta.variety = script.variety;
        meta.date = script.dates[d];
        meta.source_frame = "frame_000.png";
        season.emplace_back(generate_scene(spec), std::move(meta));
    }
    return season;
}

double scripted_red_mass(const std::array<double, 5>& mixture) { return mixture[3] + mixture[4]; }

OracleReport oracle_evaluate(const RipenessSeries& pipeline_output, const SeasonScript& script) {
    if (pipeline_output.bog_id != script.bog_id) throw DataError("oracle_evaluate: bog mismatch");
    if (pipeline_output.dates.size() != script.dates.size()) throw DataError("oracle_evaluate: date count mismatch");
    for (std::size_t d = 0; d < script.dates.size(); ++d) {
        if (!(pipeline_output.dates[d] == script.dates[d])) throw DataError("oracle_evaluate: date mismatch");
    }
    const double final_mass = scripted_red_mass(script.mixtures.back());
    if (final_mass <= 0.0) throw DataError("oracle_evaluate: script has zero final red mass");

    OracleReport report;
    for (std::size_t d = 0; d < script.dates.size(); ++d) {
        const double analytic = scripted_red_mass(script.mixtures[d]) / final_mass;
        const double err = std::abs(pipeline_output.ratios[d] - analytic);
        report.per_date_errors.push_back(err);
        report.max_ratio_error = std::max(report.max_ratio_error, err);
    }
    return report;
}

int write_season_dataset(const fs::path& root, const SeasonScript& script, const SceneSpec& scene_spec,
                         uint64_t seed, int frames_per_date) {
    if (frames_per_date < 1) throw DataError("frames_per_date must be >= 1");
    const fs::path bog_dir = root / script.bog_id;
    fs::create_directories(bog_dir);
    {
        std::ofstream meta(bog_dir / "meta.json");
        if (!meta) throw DataError("cannot write '" + (bog_dir / "meta.json").string() + "'");
        meta << json{{"variety", cranberry::to_string(script.variety)}}.dump(2) << "\n";
    }
    script.save(bog_dir / "script.json");

    int written = 0;
    for (std::size_t d = 0; d < script.dates.size(); ++d) {
        const fs::path date_dir = bog_dir / script.dates[d].to_string();
        const fs::path frames_dir = date_dir / "frames";
        const fs::path truth_dir = date_dir / "truth";
        fs::create_directories(frames_dir);
        fs::create_directories(truth_dir);

        json annotations = json::array();
        for (int f = 0; f < frames_per_date; ++f) {
            SceneSpec spec = scene_spec;
            spec.class_mixture = script.mixtures[d];
            spec.seed = mix_seed(seed, d * 1000 + f);
            const SyntheticScene scene = generate_scene(spec);

            char name[32];
            std::snprintf(name, sizeof name, "frame_%03d", f);
            const std::string image_id = name;
            write_png_rgb(frames_dir / (image_id + ".png"), scene.image);
            scene.truth_mask.save(truth_dir / (image_id + "_ids.png"), truth_dir / (image_id + ".json"));

            json pts = json::array();
            for (const auto& [x, y] : scene.points.points) pts.push_back({x, y});
            annotations.push_back({{"image_id", image_id}, {"points", pts}});
            ++written;
        }
        std::ofstream ann(date_dir / "annotations.json");
        if (!ann) throw DataError("cannot write annotations under '" + date_dir.string() + "'");
        ann << annotations.dump(2) << "\n";
    }
    return written;
}

}  // namespace cranberry
