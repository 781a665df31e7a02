#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>

#include "cranberry/dataset.hpp"
#include "cranberry/errors.hpp"
#include "cranberry/synth.hpp"
#include "test_helpers.hpp"

using namespace cranberry;
using cranberry::testing::fresh_dir;

namespace {

SeasonScript three_date_script() {
    SeasonScript script;
    script.bog_id = "bog-01";
    script.variety = Variety::Haines;
    script.dates = {Date::parse("2022-08-02"), Date::parse("2022-08-16"), Date::parse("2022-08-25")};
    // red masses 0.2, 0.4, 0.5 -> analytic ratios 0.4, 0.8, 1.0
    script.mixtures = {{0.5, 0.3, 0.0, 0.1, 0.1},
                       {0.3, 0.2, 0.1, 0.2, 0.2},
                       {0.2, 0.2, 0.1, 0.25, 0.25}};
    return script;
}

// histograms straight from the painted classes; bypasses segmentation
std::vector<ClassHistogram> truth_histograms(const std::vector<std::pair<SyntheticScene, CaptureMeta>>& season) {
    std::vector<ClassHistogram> hists;
    for (const auto& [scene, meta] : season) {
        ClassHistogram h;
        h.bog_id = meta.bog_id;
        h.date = meta.date;
        h.berry_count = static_cast<int>(scene.berry_specs.size());
        for (const auto& spec : scene.berry_specs) h.fractions[spec.cls - 1] += 1.0 / h.berry_count;
        hists.push_back(h);
    }
    return hists;
}

}  // namespace

TEST_CASE("palette redness increases strictly from class 1 to 5") {
    const auto& palette = class_palette();
    for (int c = 1; c < 5; ++c) {
        CHECK(redness({palette[c][0], palette[c][1], palette[c][2]}) >
              redness({palette[c - 1][0], palette[c - 1][1], palette[c - 1][2]}));
    }
}

TEST_CASE("zero berries yields a background-only scene") {
    SceneSpec spec;
    spec.width = 160;
    spec.height = 120;
    spec.n_berries = 0;
    const SyntheticScene scene = generate_scene(spec);
    CHECK(scene.berry_specs.empty());
    CHECK(scene.points.points.empty());
    CHECK(scene.truth_mask.instances.empty());
    for (uint16_t id : scene.truth_mask.ids) CHECK(id == 0);
    // the background is green-ish everywhere
    for (int y = 0; y < scene.image.height; y += 7) {
        for (int x = 0; x < scene.image.width; x += 7) {
            const auto p = scene.image.pixel(x, y);
            CHECK(p[1] > p[0]);
            CHECK(p[1] > p[2]);
        }
    }
}

TEST_CASE("scene generation is deterministic for a fixed seed") {
    SceneSpec spec;
    spec.n_berries = 137;
    spec.seed = 77;
    const SyntheticScene a = generate_scene(spec);
    const SyntheticScene b = generate_scene(spec);
    CHECK(a.image.data == b.image.data);
    CHECK(a.truth_mask.ids == b.truth_mask.ids);
    REQUIRE(a.berry_specs.size() == b.berry_specs.size());
    for (std::size_t i = 0; i < a.berry_specs.size(); ++i) {
        CHECK(a.berry_specs[i].center_x == b.berry_specs[i].center_x);
        CHECK(a.berry_specs[i].cls == b.berry_specs[i].cls);
    }

    SceneSpec other = spec;
    other.seed = 78;
    CHECK(generate_scene(other).image.data != a.image.data);
}

TEST_CASE("pure class-5 mixture paints every berry from the class-5 palette color") {
    SceneSpec spec;
    spec.width = 300;
    spec.height = 300;
    spec.n_berries = 40;
    spec.class_mixture = {0.0, 0.0, 0.0, 0.0, 1.0};
    spec.jitter = 0.02;
    const SyntheticScene scene = generate_scene(spec);
    const auto& red = class_palette()[4];
    for (const auto& berry : scene.berry_specs) {
        CHECK(berry.cls == 5);
        for (int c = 0; c < 3; ++c) CHECK(std::abs(berry.base_rgb[c] - red[c]) <= spec.jitter);
    }
}

TEST_CASE("class counts follow the mixture exactly on a twentieth grid") {
    SceneSpec spec;
    spec.n_berries = 120;
    spec.class_mixture = {0.10, 0.20, 0.25, 0.30, 0.15};
    spec.seed = 5;
    const SyntheticScene scene = generate_scene(spec);
    std::array<int, 5> counts{};
    for (const auto& b : scene.berry_specs) ++counts[b.cls - 1];
    CHECK(counts == std::array<int, 5>{12, 24, 30, 36, 18});
}

TEST_CASE("every berry center lies inside its own truth instance") {
    SceneSpec spec;
    spec.n_berries = 100;
    spec.occlusion_rate = 0.2;
    spec.seed = 9;
    const SyntheticScene scene = generate_scene(spec);
    REQUIRE(scene.points.points.size() == scene.truth_mask.instances.size());
    for (std::size_t i = 0; i < scene.points.points.size(); ++i) {
        const auto [x, y] = scene.points.points[i];
        CHECK(scene.truth_mask.id_at(x, y) == i + 1);
    }
}

TEST_CASE("truth instances are round enough for the default kappa") {
    SceneSpec spec;
    spec.n_berries = 80;
    spec.occlusion_rate = 0.0;
    spec.seed = 13;
    const SyntheticScene scene = generate_scene(spec);
    for (const auto& inst : scene.truth_mask.instances) {
        CHECK(inst.convexity >= 0.9);
    }
}

TEST_CASE("truth masks reconstruct and stay 4-connected under heavy occlusion") {
    for (uint64_t s = 0; s < 25; ++s) {
        SceneSpec spec;
        spec.width = 300;
        spec.height = 300;
        spec.n_berries = 40;
        spec.occlusion_rate = 0.3;
        spec.seed = 40 + s;
        const SyntheticScene scene = generate_scene(spec);
        CHECK_NOTHROW(scene.truth_mask.validate());
    }
}

TEST_CASE("full occlusion still keeps a free-standing target berry") {
    SceneSpec spec;
    spec.width = 240;
    spec.height = 240;
    spec.n_berries = 8;
    spec.occlusion_rate = 1.0;
    spec.seed = 3;
    const SyntheticScene scene = generate_scene(spec);
    CHECK(scene.berry_specs.size() == 8);
    for (const auto& inst : scene.truth_mask.instances) CHECK(inst.area > 0);
}

TEST_CASE("invalid scene specs are rejected") {
    SceneSpec spec;
    spec.class_mixture = {0.5, 0.5, 0.5, 0.0, 0.0};
    CHECK_THROWS_AS(static_cast<void>(generate_scene(spec)), DataError);
    spec = SceneSpec{};
    spec.n_berries = -1;
    CHECK_THROWS_AS(static_cast<void>(generate_scene(spec)), DataError);
    spec = SceneSpec{};
    spec.width = 40;
    spec.height = 40;
    spec.n_berries = 400;  // cannot fit
    CHECK_THROWS_WITH_AS(static_cast<void>(generate_scene(spec)), doctest::Contains("place"), DataError);
}

TEST_CASE("truth-mask bypass reproduces the scripted mixtures") {
    SceneSpec spec;
    spec.n_berries = 120;
    const auto season = generate_season(three_date_script(), spec, 21);
    REQUIRE(season.size() == 3);
    const auto hists = truth_histograms(season);
    for (std::size_t d = 0; d < hists.size(); ++d) {
        for (int c = 0; c < 5; ++c) {
            CHECK(std::abs(hists[d].fractions[c] - three_date_script().mixtures[d][c]) <= 0.02);
        }
    }
}

TEST_CASE("season red mass rises with the scripted green-to-red shift") {
    SceneSpec spec;
    spec.n_berries = 120;
    const auto season = generate_season(three_date_script(), spec, 33);
    const auto hists = truth_histograms(season);
    double prev = -1.0;
    for (const auto& h : hists) {
        const double red = h.fractions[3] + h.fractions[4];
        CHECK(red > prev);
        prev = red;
    }
}

TEST_CASE("single-date script yields a single scene") {
    SeasonScript script;
    script.bog_id = "solo";
    script.dates = {Date::parse("2022-09-14")};
    script.mixtures = {{0.2, 0.2, 0.2, 0.2, 0.2}};
    SceneSpec spec;
    spec.width = 160;
    spec.height = 120;
    spec.n_berries = 10;
    CHECK(generate_season(script, spec, 1).size() == 1);
}

TEST_CASE("oracle_evaluate: truth bypass matches analytic ratios") {
    const SeasonScript script = three_date_script();
    SceneSpec spec;
    spec.n_berries = 120;
    const auto season = generate_season(script, spec, 55);
    const auto series = ripeness_series(truth_histograms(season), RiskConfig{}, script.variety);

    const OracleReport report = oracle_evaluate(series, script);
    CHECK(report.max_ratio_error <= 1e-9);
    REQUIRE(report.per_date_errors.size() == 3);

    // analytic ratios by hand: red masses 0.2, 0.4, 0.5 -> 0.4, 0.8, 1.0
    CHECK(series.ratios[0] == doctest::Approx(0.4));
    CHECK(series.ratios[1] == doctest::Approx(0.8));
    CHECK(series.ratios[2] == 1.0);
}

TEST_CASE("oracle_evaluate flags garbage ratios without crashing") {
    const SeasonScript script = three_date_script();
    RipenessSeries garbage;
    garbage.bog_id = script.bog_id;
    garbage.dates = script.dates;
    garbage.red_fractions = {0.9, 0.9, 0.9};
    garbage.ratios = {1.0, 1.0, 1.0};
    const OracleReport report = oracle_evaluate(garbage, script);
    CHECK(report.max_ratio_error > 0.5);  // scripted first ratio is 0.4
}

TEST_CASE("oracle_evaluate rejects mismatched dates") {
    const SeasonScript script = three_date_script();
    RipenessSeries series;
    series.bog_id = script.bog_id;
    series.dates = {script.dates[0], script.dates[1]};
    series.ratios = {0.4, 1.0};
    CHECK_THROWS_AS(static_cast<void>(oracle_evaluate(series, script)), DataError);
}

TEST_CASE("palette overrides load and must increase in redness") {
    const auto dir = fresh_dir("palette_override");
    {
        std::ofstream out(dir / "palette.json");
        out << "[[0.40,0.70,0.30],[0.55,0.55,0.25],[0.65,0.40,0.20],[0.70,0.25,0.15],[0.65,0.10,0.10]]";
    }
    const auto palette = load_palette(dir / "palette.json");
    CHECK(palette[0][1] == doctest::Approx(0.70f));

    SceneSpec spec;
    spec.width = 160;
    spec.height = 120;
    spec.n_berries = 6;
    spec.palette = palette;
    const SyntheticScene scene = generate_scene(spec);
    CHECK(scene.berry_specs.size() == 6);

    {
        std::ofstream out(dir / "bad.json");
        out << "[[0.70,0.25,0.15],[0.55,0.55,0.25],[0.65,0.40,0.20],[0.40,0.70,0.30],[0.65,0.10,0.10]]";
    }
    CHECK_THROWS_WITH_AS(static_cast<void>(load_palette(dir / "bad.json")), doctest::Contains("redness"),
                         DataError);

    spec.palette = class_palette();
    std::swap(spec.palette[0], spec.palette[4]);
    CHECK_THROWS_AS(static_cast<void>(generate_scene(spec)), DataError);
}

TEST_CASE("season script JSON round trip") {
    const auto dir = fresh_dir("script_roundtrip");
    const SeasonScript script = three_date_script();
    script.save(dir / "script.json");
    const SeasonScript back = SeasonScript::load(dir / "script.json");
    CHECK(back.bog_id == script.bog_id);
    CHECK(back.variety == script.variety);
    REQUIRE(back.dates.size() == script.dates.size());
    for (std::size_t i = 0; i < script.dates.size(); ++i) {
        CHECK(back.dates[i] == script.dates[i]);
        CHECK(back.mixtures[i] == script.mixtures[i]);
    }
}

TEST_CASE("written season datasets load through the standard ingestion path") {
    const auto root = fresh_dir("season_dataset");
    SceneSpec spec;
    spec.width = 160;
    spec.height = 208;
    spec.n_berries = 12;
    const SeasonScript script = three_date_script();
    const int written = write_season_dataset(root, script, spec, 99, 2);
    CHECK(written == 6);  // 3 dates x 2 frames

    const DatasetIndex index = load_dataset(root);
    REQUIRE(index.entries.size() == 6);
    for (const auto& entry : index.entries) {
        CHECK(entry.meta.bog_id == "bog-01");
        CHECK(entry.meta.variety == Variety::Haines);
        REQUIRE(entry.annotation.has_value());
        CHECK(entry.annotation->points.size() == 12);
    }

    // truth masks sit alongside and load cleanly
    const auto truth = SegmentationMask::load(root / "bog-01" / "2022-08-02" / "truth" / "frame_000_ids.png",
                                              root / "bog-01" / "2022-08-02" / "truth" / "frame_000.json");
    CHECK(truth.instances.size() == 12);

    // and the script is recoverable for oracle checks
    const SeasonScript back = SeasonScript::load(root / "bog-01" / "script.json");
    CHECK(back.dates.size() == 3);
}
