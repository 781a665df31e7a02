// Acceptance suite: one pass/fail line per criterion, nonzero exit when any
// criterion fails. Criteria 5 and 6 drive the real CLI binary.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cranberry/calibration.hpp"
#include "cranberry/color_classes.hpp"
#include "cranberry/pipeline.hpp"
#include "cranberry/pixel_scorer.hpp"
#include "cranberry/pseudo_mask.hpp"
#include "cranberry/report.hpp"
#include "cranberry/ripeness.hpp"
#include "cranberry/rng.hpp"
#include "cranberry/segmentation.hpp"
#include "cranberry/synth.hpp"

using namespace cranberry;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Criterion {
    int number;
    std::string name;
    std::function<bool(std::string&)> body;
};

fs::path fresh_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("cranberry_acceptance_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& file) {
    std::ifstream in(file);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(CRANBERRY_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    return WEXITSTATUS(std::system(cmd.c_str()));
}

PixelScorer train_mixed_scorer(int n_scenes, uint64_t seed_base, int epochs) {
    SceneSpec spec;
    spec.class_mixture = {0.25, 0.20, 0.10, 0.20, 0.25};
    std::vector<LabeledCrop> crops;
    for (int s = 0; s < n_scenes; ++s) {
        spec.seed = seed_base + s;
        const SyntheticScene scene = generate_scene(spec);
        LabeledCrop crop;
        crop.mask = build_pseudo_mask(scene.points, scene.image.width, scene.image.height, 6, 4);
        crop.image = scene.image;
        crops.push_back(std::move(crop));
    }
    return train_scorer(crops, epochs, 0.5, 0);
}

// ---- criterion 1 -----------------------------------------------------------

bool calibration_round_trip(std::string& detail) {
    std::mt19937_64 rng(20240801);
    const GreyReference ref;
    double worst_residual = 0.0;
    double worst_pixel_err = 0.0;

    Image original(64, 48);
    for (float& v : original.data) v = static_cast<float>(u01(rng));
    original.calibrated = true;

    for (int trial = 0; trial < 100; ++trial) {
        std::array<double, 3> a, b;
        for (int c = 0; c < 3; ++c) {
            a[c] = uniform(rng, 0.5, 2.0);
            b[c] = uniform(rng, -0.1, 0.1);
        }
        GreyPatchMeasurement m;
        m.session_id = "acceptance";
        for (int i = 0; i < 6; ++i) {
            for (int c = 0; c < 3; ++c) m.means[i][c] = a[c] * ref.values[i] + b[c];
            m.pixel_counts[i] = 100;
        }
        const RadiometricCorrection corr = fit_correction(m, ref);
        worst_residual = std::max(worst_residual, corr.residual_rms);

        Image distorted(64, 48);
        for (int c = 0; c < 3; ++c) {
            for (std::size_t i = c; i < original.data.size(); i += 3) {
                distorted.data[i] = static_cast<float>(a[c] * original.data[i] + b[c]);
            }
        }
        const Image recovered = apply_correction(distorted, corr);
        for (std::size_t i = 0; i < original.data.size(); ++i) {
            worst_pixel_err = std::max(worst_pixel_err,
                                       static_cast<double>(std::abs(recovered.data[i] - original.data[i])));
        }
    }

    char buf[160];
    std::snprintf(buf, sizeof buf, "max residual_rms %.2e (< 1e-9), max round-trip pixel error %.2e (<= 1e-6)",
                  worst_residual, worst_pixel_err);
    detail = buf;
    return worst_residual < 1e-9 && worst_pixel_err <= 1e-6;
}

// ---- criterion 2 -----------------------------------------------------------

bool segmentation_oracle(std::string& detail) {
    const PixelScorer scorer = train_mixed_scorer(6, 100, 150);

    SceneSpec spec;
    spec.class_mixture = {0.25, 0.20, 0.10, 0.20, 0.25};

    std::vector<SegmentationMask> preds, truths;
    double true_count_sum = 0.0;
    int green_total = 0, green_hit = 0, red_total = 0, red_hit = 0;
    for (int s = 0; s < 20; ++s) {
        spec.seed = 200 + s;
        spec.n_berries = 80 + s * 4;  // spans 80..156
        const SyntheticScene scene = generate_scene(spec);
        SegmentationMask pred = segment(scene.image, scorer, SegParams{});

        for (std::size_t b = 0; b < scene.berry_specs.size(); ++b) {
            const int cls = scene.berry_specs[b].cls;
            if (cls == 3) continue;
            const auto& pixels = scene.truth_mask.instances[b].pixels;
            std::size_t covered = 0;
            for (const auto& [x, y] : pixels) covered += pred.id_at(x, y) != 0;
            const bool detected = covered * 2 >= pixels.size();
            if (cls <= 2) {
                ++green_total;
                green_hit += detected;
            } else {
                ++red_total;
                red_hit += detected;
            }
        }
        true_count_sum += static_cast<double>(scene.berry_specs.size());
        preds.push_back(std::move(pred));
        truths.push_back(scene.truth_mask);
    }

    const EvalReport report = evaluate(preds, truths);
    const double mean_true = true_count_sum / 20.0;
    const double green_recall = static_cast<double>(green_hit) / green_total;
    const double red_recall = static_cast<double>(red_hit) / red_total;

    char buf[200];
    std::snprintf(buf, sizeof buf,
                  "mIOU %.3f (>= 0.70), count MAE %.2f (<= %.2f), recall green %.3f red %.3f (>= 0.9)",
                  report.miou, report.count_mae, 0.10 * mean_true, green_recall, red_recall);
    detail = buf;
    return report.miou >= 0.70 && report.count_mae <= 0.10 * mean_true && green_recall >= 0.9 &&
           red_recall >= 0.9;
}

// ---- criterion 3 -----------------------------------------------------------

bool albedo_fidelity(std::string& detail) {
    SceneSpec spec;
    spec.jitter = 0.03;
    spec.class_mixture = {0.20, 0.20, 0.20, 0.20, 0.20};

    std::vector<SyntheticScene> scenes;
    std::vector<SegmentationMask> masks;
    std::vector<Image> images;
    for (uint64_t s = 0; s < 3; ++s) {
        spec.seed = 300 + s;
        scenes.push_back(generate_scene(spec));
        masks.push_back(scenes.back().truth_mask);
        images.push_back(scenes.back().image);
    }
    const auto pixels = sample_berry_pixels(masks, images, 20000, 3);
    const ColorClassModel model = build_color_model(pixels, 10, 3);

    int total = 0, correct = 0;
    std::array<int, 5> painted{}, classified{};
    for (const auto& scene : scenes) {
        for (std::size_t b = 0; b < scene.berry_specs.size(); ++b) {
            const auto result = classify_berry(scene.truth_mask.instances[b], scene.image, model);
            ++total;
            correct += result.cls == scene.berry_specs[b].cls;
            ++painted[scene.berry_specs[b].cls - 1];
            ++classified[result.cls - 1];
        }
    }
    const double accuracy = static_cast<double>(correct) / total;
    double worst_gap = 0.0;
    for (int c = 0; c < 5; ++c) {
        worst_gap = std::max(worst_gap, std::abs(painted[c] - classified[c]) / static_cast<double>(total));
    }

    char buf[160];
    std::snprintf(buf, sizeof buf, "painted-class accuracy %.3f (>= 0.95), worst histogram gap %.3f (<= 0.05)",
                  accuracy, worst_gap);
    detail = buf;
    return accuracy >= 0.95 && worst_gap <= 0.05;
}

// ---- criterion 4 -----------------------------------------------------------

bool ripeness_exactness(std::string& detail) {
    const std::vector<std::pair<std::string, std::vector<double>>> table{
        {"A5", {0.007, 0.082, 0.331, 0.497, 0.902, 1.0}},
        {"I15", {0.001, 0.108, 0.167, 0.409, 0.874, 1.0}},
        {"J12", {0.002, 0.088, 0.419, 0.609, 0.968, 1.0}},
        {"K4", {0.012, 0.151, 0.339, 0.433, 0.872, 1.0}},
        {"A4", {0.127, 0.453, 0.926, 1.118, 0.808, 1.0}},
        {"B7", {0.035, 0.217, 0.622, 0.798, 1.119, 1.0}},
        {"I3", {0.010, 0.079, 0.347, 0.678, 1.121, 1.0}},
    };
    const std::vector<std::string> dates{"2022-08-02", "2022-08-16", "2022-08-25",
                                         "2022-08-31", "2022-09-09", "2022-09-14"};
    const double f = 0.51;  // arbitrary final-date red fraction

    double worst = 0.0;
    bool finals_exact = true;
    bool over_unity_seen = false;
    for (const auto& [bog, ratios] : table) {
        std::vector<ClassHistogram> hists;
        for (std::size_t i = 0; i < ratios.size(); ++i) {
            ClassHistogram h;
            h.bog_id = bog;
            h.date = Date::parse(dates[i]);
            const double red = ratios[i] * f;
            h.fractions = {1.0 - red, 0.0, 0.0, 0.0, red};
            h.berry_count = 1000;
            hists.push_back(h);
        }
        const RipenessSeries series = ripeness_series(hists, RiskConfig{});
        for (std::size_t i = 0; i < ratios.size(); ++i) {
            worst = std::max(worst, std::abs(series.ratios[i] - ratios[i]));
            if (series.ratios[i] > 1.0) over_unity_seen = true;
        }
        finals_exact = finals_exact && series.ratios.back() == 1.0;
    }

    char buf[160];
    std::snprintf(buf, sizeof buf,
                  "max |ratio error| %.2e (< 5e-4), final dates exact: %s, >1 entries preserved: %s",
                  worst, finals_exact ? "yes" : "no", over_unity_seen ? "yes" : "no");
    detail = buf;
    return worst < 5e-4 && finals_exact && over_unity_seen;
}

// ---- criteria 5 and 6 ------------------------------------------------------

struct CsvTable {
    std::vector<std::string> dates;
    std::map<std::string, std::vector<double>> rows;
};

CsvTable parse_ripeness_csv(const fs::path& file) {
    CsvTable table;
    std::ifstream in(file);
    std::string line;
    if (!std::getline(in, line)) return table;
    std::stringstream header(line);
    std::string field;
    std::getline(header, field, ',');  // "bog"
    while (std::getline(header, field, ',')) table.dates.push_back(field);
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream row(line);
        std::string bog;
        std::getline(row, bog, ',');
        std::vector<double> ratios;
        while (std::getline(row, field, ',')) ratios.push_back(std::stod(field));
        table.rows[bog] = ratios;
    }
    return table;
}

bool end_to_end_oracle(std::string& detail) {
    const fs::path root = fresh_dir("e2e_data");
    const fs::path out = fresh_dir("e2e_out");

    if (run_cli("synth --out " + root.string() + " --bogs 2 --dates 6 --berries 120 --seed 4242") != 0) {
        detail = "synth invocation failed";
        return false;
    }
    if (run_cli("run --data " + root.string() + " --out " + out.string() +
                " --train --epochs 150 --seed 7 --jobs 2") != 0) {
        detail = "run invocation failed";
        return false;
    }

    const CsvTable table = parse_ripeness_csv(out / "ripeness.csv");
    if (table.rows.size() != 2) {
        detail = "expected 2 bog rows in ripeness.csv";
        return false;
    }

    double worst = 0.0;
    int worst_risk_shift = 0;
    for (const auto& [bog, ratios] : table.rows) {
        const SeasonScript script = SeasonScript::load(root / bog / "script.json");
        if (ratios.size() != script.dates.size()) {
            detail = "date count mismatch for " + bog;
            return false;
        }
        const double final_mass = scripted_red_mass(script.mixtures.back());
        int analytic_first = -1, pipeline_first = -1;
        for (std::size_t d = 0; d < ratios.size(); ++d) {
            const double analytic = scripted_red_mass(script.mixtures[d]) / final_mass;
            worst = std::max(worst, std::abs(ratios[d] - analytic));
            if (analytic >= 0.6 && analytic_first < 0) analytic_first = static_cast<int>(d);
            if (ratios[d] >= 0.6 && pipeline_first < 0) pipeline_first = static_cast<int>(d);
        }
        worst_risk_shift = std::max(worst_risk_shift, std::abs(analytic_first - pipeline_first));
    }

    char buf[160];
    std::snprintf(buf, sizeof buf, "max |ratio - oracle| %.3f (<= 0.05), first-risk shift %d dates (<= 1)",
                  worst, worst_risk_shift);
    detail = buf;
    return worst <= 0.05 && worst_risk_shift <= 1;
}

bool determinism(std::string& detail) {
    const fs::path root = fresh_dir("det_data");
    const fs::path out = fresh_dir("det_out");

    if (run_cli("synth --out " + root.string() + " --bogs 1 --dates 4 --berries 60 --width 304 "
                "--height 304 --seed 99") != 0) {
        detail = "synth invocation failed";
        return false;
    }
    const std::string run_args =
        "run --data " + root.string() + " --out " + out.string() + " --train --epochs 100 --seed 5";
    if (run_cli(run_args) != 0) {
        detail = "first run failed";
        return false;
    }
    const std::vector<std::string> reports{"ripeness.csv", "histograms.csv", "risk.json", "manifest.json"};
    std::map<std::string, std::string> first;
    for (const auto& name : reports) first[name] = slurp(out / name);

    if (run_cli(run_args) != 0) {
        detail = "second run failed";
        return false;
    }
    for (const auto& name : reports) {
        if (slurp(out / name) != first[name]) {
            detail = name + " differs between identical runs";
            return false;
        }
    }
    detail = "CSV/JSON reports byte-identical across reruns";
    return true;
}

// ---- criterion 7 -----------------------------------------------------------

bool invariant_suites(std::string& detail) {
    std::mt19937_64 rng(777);

    // k-means objective monotone per Lloyd iteration
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<Color> pts;
        const int n = 20 + static_cast<int>(bounded(rng, 150));
        for (int i = 0; i < n; ++i) {
            pts.push_back({static_cast<float>(u01(rng)), static_cast<float>(u01(rng)),
                           static_cast<float>(u01(rng))});
        }
        const KMeansResult km = kmeans_rgb(pts, 2 + static_cast<int>(bounded(rng, 6)), rng());
        for (std::size_t i = 1; i < km.objective_history.size(); ++i) {
            if (km.objective_history[i] > km.objective_history[i - 1] + 1e-9) {
                detail = "k-means objective increased";
                return false;
            }
        }
    }

    // every emitted instance clears kappa, across randomized scenes and params
    {
        SceneSpec base;
        base.width = 160;
        base.height = 200;
        base.n_berries = 15;
        base.occlusion_rate = 0.25;
        base.seed = 4;
        const SyntheticScene train_scene = generate_scene(base);
        LabeledCrop crop;
        crop.mask = build_pseudo_mask(train_scene.points, base.width, base.height, 6, 4);
        crop.image = train_scene.image;
        const PixelScorer scorer = train_scorer({crop}, 120, 0.5, 0);

        for (int trial = 0; trial < 100; ++trial) {
            SceneSpec spec = base;
            spec.seed = 1000 + trial;
            const SyntheticScene scene = generate_scene(spec);
            SegParams params;
            params.kappa = uniform(rng, 0.70, 0.95);
            const SegmentationMask mask = segment(scene.image, scorer, params);
            for (const auto& inst : mask.instances) {
                if (inst.convexity < params.kappa) {
                    detail = "instance below kappa escaped the convexity step";
                    return false;
                }
            }
        }
    }

    // raising tau never grows the thresholded foreground
    {
        Image img(50, 40);
        for (float& v : img.data) v = static_cast<float>(u01(rng));
        for (int trial = 0; trial < 100; ++trial) {
            PixelScorer scorer;
            scorer.trained = true;
            for (double& w : scorer.weights) w = uniform(rng, -4.0, 4.0);
            const double lo = uniform(rng, 0.05, 0.9);
            const double hi = lo + uniform(rng, 0.0, 0.95 - lo);
            std::size_t fg_lo = 0, fg_hi = 0;
            for (int y = 0; y < img.height; ++y) {
                for (int x = 0; x < img.width; ++x) {
                    const auto p = img.pixel(x, y);
                    const double s = scorer.score(p[0], p[1], p[2]);
                    fg_lo += s >= lo;
                    fg_hi += s >= hi;
                }
            }
            if (fg_hi > fg_lo) {
                detail = "foreground grew when tau was raised";
                return false;
            }
        }
    }

    // ratio scale invariance
    for (int trial = 0; trial < 100; ++trial) {
        const int n_dates = 3 + static_cast<int>(bounded(rng, 4));
        std::vector<double> reds;
        for (int i = 0; i < n_dates; ++i) reds.push_back(uniform(rng, 0.05, 0.45));
        const double c = uniform(rng, 0.1, 2.0);  // scaled reds stay under 0.9

        auto series_of = [&](double scale) {
            std::vector<ClassHistogram> hists;
            for (int i = 0; i < n_dates; ++i) {
                ClassHistogram h;
                h.bog_id = "X";
                h.date = Date{2022, 8, 2 + i * 3};
                const double red = scale * reds[i];
                h.fractions = {1.0 - red, 0.0, 0.0, 0.0, red};
                h.berry_count = 100;
                hists.push_back(h);
            }
            return ripeness_series(hists, RiskConfig{});
        };
        const RipenessSeries base = series_of(1.0);
        const RipenessSeries scaled = series_of(c);
        for (std::size_t i = 0; i < base.ratios.size(); ++i) {
            if (std::abs(base.ratios[i] - scaled.ratios[i]) > 1e-12) {
                detail = "ratios changed under scaling";
                return false;
            }
        }
        if (base.risk_dates != scaled.risk_dates) {
            detail = "risk dates changed under scaling";
            return false;
        }
    }

    detail = "k-means monotone, convexity >= kappa, tau-monotone, scale-invariant (100 cases each)";
    return true;
}

}  // namespace

int main() {
    std::vector<Criterion> criteria{
        {1, "calibration round-trip (100 random affine distortions)", calibration_round_trip},
        {2, "segmentation oracle (20 synthetic scenes)", segmentation_oracle},
        {3, "albedo fidelity (palette-painted scenes)", albedo_fidelity},
        {4, "ripeness-ratio exactness (reference table rows)", ripeness_exactness},
        {5, "end-to-end oracle (cmd_run on a 6-date, 2-bog season)", end_to_end_oracle},
        {6, "determinism (byte-identical reports)", determinism},
        {7, "invariant suites (100 randomized cases each)", invariant_suites},
    };
    const std::vector<double> budgets_s{5.0, 60.0, 0.0, 0.0, 180.0, 0.0, 0.0};  // 0 = no stated budget

    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const auto& criterion = criteria[i];
        std::string detail;
        bool ok = false;
        const auto start = std::chrono::steady_clock::now();
        try {
            ok = criterion.body(detail);
        } catch (const std::exception& e) {
            detail = std::string("exception: ") + e.what();
            ok = false;
        }
        const double seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (budgets_s[i] > 0.0 && seconds >= budgets_s[i]) {
            ok = false;
            detail += " — exceeded the " + std::to_string(static_cast<int>(budgets_s[i])) + " s budget";
        }
        std::printf("[%s] criterion %d: %s — %s (%.1f s)\n", ok ? "PASS" : "FAIL", criterion.number,
                    criterion.name.c_str(), detail.c_str(), seconds);
        failures += !ok;
    }
    if (failures > 0) {
        std::printf("%d of %zu criteria failed\n", failures, criteria.size());
        return 1;
    }
    std::printf("all %zu criteria passed\n", criteria.size());
    return 0;
}
