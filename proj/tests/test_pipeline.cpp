#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "cranberry/calibration.hpp"
#include "cranberry/dataset.hpp"
#include "cranberry/errors.hpp"
#include "cranberry/pipeline.hpp"
#include "cranberry/png_io.hpp"
#include "cranberry/synth.hpp"
#include "test_helpers.hpp"

using namespace cranberry;
using cranberry::testing::fresh_dir;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

SeasonScript small_script(int dates) {
    SeasonScript script;
    script.bog_id = "bog-01";
    script.variety = Variety::Haines;
    const std::array<std::array<double, 5>, 4> mixtures{{
        {0.50, 0.30, 0.00, 0.10, 0.10},
        {0.30, 0.20, 0.10, 0.20, 0.20},
        {0.20, 0.15, 0.10, 0.25, 0.30},
        {0.10, 0.10, 0.10, 0.30, 0.40},
    }};
    const char* date_strs[4] = {"2022-08-02", "2022-08-09", "2022-08-16", "2022-08-23"};
    for (int d = 0; d < dates; ++d) {
        script.dates.push_back(Date::parse(date_strs[d]));
        script.mixtures.push_back(mixtures[d]);
    }
    return script;
}

PipelineConfig small_config(const fs::path& root, const fs::path& out) {
    PipelineConfig cfg;
    cfg.dataset_root = root;
    cfg.output_dir = out;
    cfg.train = true;
    cfg.train_epochs = 120;
    cfg.seed = 3;
    return cfg;
}

std::ostringstream null_log;

}  // namespace

TEST_CASE("pipeline runs a small season end to end") {
    const auto root = fresh_dir("pipe_small");
    const auto out = fresh_dir("pipe_small_out");
    SceneSpec spec;
    spec.width = 240;
    spec.height = 304;
    spec.n_berries = 30;
    write_season_dataset(root, small_script(4), spec, 17);

    const PipelineResult result = run_pipeline(small_config(root, out), null_log);
    CHECK(!result.empty_dataset);
    REQUIRE(result.series.size() == 1);
    CHECK(result.series[0].bog_id == "bog-01");
    CHECK(result.series[0].ratios.back() == 1.0);
    CHECK(fs::exists(out / "ripeness.csv"));
    CHECK(fs::exists(out / "manifest.json"));
    CHECK(load_index(out / "index.json").entries.size() == 4);  // cached dataset index

    // the scripted red masses are 0.2, 0.4, 0.55, 0.7 -> analytic ratios
    const OracleReport oracle = oracle_evaluate(result.series[0], SeasonScript::load(root / "bog-01" / "script.json"));
    CHECK(oracle.max_ratio_error <= 0.1);  // small scenes, coarse statistics
}

TEST_CASE("oversized frames are tiled into crops before segmentation") {
    // two 240x304 scenes pasted side by side form one 480x304 frame; with a
    // 240x304 crop grid the pipeline must see both halves
    const auto root = fresh_dir("pipe_tile");
    const auto out = fresh_dir("pipe_tile_out");

    SceneSpec spec;
    spec.width = 240;
    spec.height = 304;
    spec.n_berries = 24;
    spec.class_mixture = {0.2, 0.2, 0.2, 0.2, 0.2};
    spec.seed = 31;
    const SyntheticScene left = generate_scene(spec);
    spec.seed = 32;
    const SyntheticScene right = generate_scene(spec);

    Image frame(480, 304);
    for (int y = 0; y < 304; ++y) {
        for (int x = 0; x < 240; ++x) {
            for (int c = 0; c < 3; ++c) {
                frame.at(x, y, c) = left.image.at(x, y, c);
                frame.at(x + 240, y, c) = right.image.at(x, y, c);
            }
        }
    }

    for (const char* date : {"2022-08-02", "2022-08-09"}) {
        fs::create_directories(root / "bog-01" / date / "frames");
        write_png_rgb(root / "bog-01" / date / "frames" / "frame_000.png", frame);
        json ann = json::array();
        json pts = json::array();
        for (const auto& [x, y] : left.points.points) pts.push_back({x, y});
        for (const auto& [x, y] : right.points.points) pts.push_back({x + 240, y});
        ann.push_back({{"image_id", "frame_000"}, {"points", pts}});
        std::ofstream(root / "bog-01" / date / "annotations.json") << ann.dump();
    }

    PipelineConfig cfg = small_config(root, out);
    cfg.crop_w = 240;
    cfg.crop_h = 304;
    std::ostringstream log;
    const PipelineResult result = run_pipeline(cfg, log);
    CHECK(log.str().find("4 work items from 2 frames") != std::string::npos);

    // both halves contribute berries: the per-date histogram counts roughly
    // the full 48 planted berries
    const auto hists = read_histogram_csv(out / "histograms.csv");
    REQUIRE(hists.size() == 2);
    for (const auto& h : hists) {
        CHECK(h.berry_count >= 40);
        CHECK(h.berry_count <= 52);
    }
    (void)result;
}

TEST_CASE("per-session calibration files are applied before segmentation") {
    // distort every frame of one date with a known transform and drop the
    // matching calibration.json next to it; reports must match the clean run
    const auto root_clean = fresh_dir("pipe_calib_clean");
    const auto root_dist = fresh_dir("pipe_calib_dist");
    const auto out_clean = fresh_dir("pipe_calib_clean_out");
    const auto out_dist = fresh_dir("pipe_calib_dist_out");

    SceneSpec spec;
    spec.width = 240;
    spec.height = 304;
    spec.n_berries = 30;
    write_season_dataset(root_clean, small_script(2), spec, 23);
    write_season_dataset(root_dist, small_script(2), spec, 23);

    const double a = 0.7, b = 0.05;
    const GreyReference ref;
    for (const char* date : {"2022-08-02", "2022-08-09"}) {
        const fs::path frame = root_dist / "bog-01" / date / "frames" / "frame_000.png";
        Image img = read_png_rgb(frame);
        for (float& v : img.data) v = static_cast<float>(a * v + b);
        write_png_rgb(frame, img);

        GreyPatchMeasurement m;
        m.session_id = std::string("bog-01/") + date;
        for (int i = 0; i < 6; ++i) {
            for (int c = 0; c < 3; ++c) m.means[i][c] = a * ref.values[i] + b;
            m.pixel_counts[i] = 100;
        }
        fit_correction(m, ref).save(root_dist / "bog-01" / date / "calibration.json");
    }

    const PipelineResult clean = run_pipeline(small_config(root_clean, out_clean), null_log);
    const PipelineResult corrected = run_pipeline(small_config(root_dist, out_dist), null_log);
    REQUIRE(clean.series.size() == 1);
    REQUIRE(corrected.series.size() == 1);
    REQUIRE(clean.series[0].ratios.size() == corrected.series[0].ratios.size());
    for (std::size_t i = 0; i < clean.series[0].ratios.size(); ++i) {
        CHECK(std::abs(clean.series[0].ratios[i] - corrected.series[0].ratios[i]) < 0.12);
    }
    // and the distorted run actually went through the correction path
    bool warned_missing = false;
    for (const auto& w : corrected.warnings) warned_missing |= w.find("no calibration.json") != std::string::npos;
    CHECK(!warned_missing);
}

TEST_CASE("stage failure aborts with the stage name and removes partial outputs") {
    // a single-date season cannot form a ripeness series
    const auto root = fresh_dir("pipe_fail");
    const auto out = fresh_dir("pipe_fail_out");
    SceneSpec spec;
    spec.width = 240;
    spec.height = 304;
    spec.n_berries = 24;
    write_season_dataset(root, small_script(1), spec, 29);

    bool threw = false;
    try {
        run_pipeline(small_config(root, out), null_log);
    } catch (const PipelineError& e) {
        threw = true;
        CHECK(e.stage == "series");
    }
    CHECK(threw);
    CHECK(!fs::exists(out / "ripeness.csv"));
    CHECK(!fs::exists(out / "histograms.csv"));
    CHECK(!fs::exists(out / "scorer.json"));      // written earlier, then removed
    CHECK(!fs::exists(out / "color_model.json"));
}

TEST_CASE("config validation failures are data errors, not stage failures") {
    PipelineConfig cfg;
    CHECK_THROWS_AS(static_cast<void>(run_pipeline(cfg, null_log)), DataError);

    cfg = small_config("/nonexistent/root", fresh_dir("pipe_cfg_out"));
    cfg.train = false;
    cfg.scorer_file.clear();
    CHECK_THROWS_AS(static_cast<void>(run_pipeline(cfg, null_log)), DataError);
}

TEST_CASE("pipeline config JSON round trip preserves every field") {
    const auto dir = fresh_dir("pipe_cfg");
    PipelineConfig cfg;
    cfg.dataset_root = "/data/root";
    cfg.output_dir = "/data/out";
    cfg.train = true;
    cfg.train_epochs = 99;
    cfg.train_lr = 0.25;
    cfg.seg.tau = 0.6;
    cfg.seg.kappa = 0.85;
    cfg.seg.min_area = 40;
    cfg.seg.r_fg = 5;
    cfg.seg.r_ig = 3;
    cfg.risk.threshold = 0.7;
    cfg.crop_w = 300;
    cfg.crop_h = 400;
    cfg.k = 12;
    cfg.seed = 1234;
    cfg.sample_pixels = 5000;
    cfg.jobs = 3;
    cfg.save_masks = true;

    std::ofstream(dir / "config.json") << cfg.to_json();
    const PipelineConfig back = PipelineConfig::from_json_file(dir / "config.json");
    CHECK(back.dataset_root == cfg.dataset_root);
    CHECK(back.output_dir == cfg.output_dir);
    CHECK(back.train == cfg.train);
    CHECK(back.train_epochs == cfg.train_epochs);
    CHECK(back.train_lr == cfg.train_lr);
    CHECK(back.seg.tau == cfg.seg.tau);
    CHECK(back.seg.kappa == cfg.seg.kappa);
    CHECK(back.seg.min_area == cfg.seg.min_area);
    CHECK(back.seg.r_fg == cfg.seg.r_fg);
    CHECK(back.seg.r_ig == cfg.seg.r_ig);
    CHECK(back.risk.threshold == cfg.risk.threshold);
    CHECK(back.crop_w == cfg.crop_w);
    CHECK(back.crop_h == cfg.crop_h);
    CHECK(back.k == cfg.k);
    CHECK(back.seed == cfg.seed);
    CHECK(back.sample_pixels == cfg.sample_pixels);
    CHECK(back.jobs == cfg.jobs);
    CHECK(back.save_masks == cfg.save_masks);
    CHECK(back.to_json() == cfg.to_json());
}
