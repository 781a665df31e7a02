#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

#include "cranberry/dataset.hpp"
#include "cranberry/image.hpp"
#include "cranberry/meta.hpp"
#include "cranberry/ripeness.hpp"
#include "cranberry/segmentation.hpp"

namespace cranberry {

// Canonical per-class berry colors, strictly increasing in redness.
const std::array<std::array<float, 3>, 5>& class_palette();
std::array<float, 3> foliage_base();

// Loads a palette override (JSON array of five [r,g,b] rows); rejects rows
// whose redness is not strictly increasing.
std::array<std::array<float, 3>, 5> load_palette(const std::filesystem::path& file);

struct SceneSpec {
    int width = 456;
    int height = 608;
    int n_berries = 120;
    double radius_min = 5.0;
    double radius_max = 9.0;
    std::array<double, 5> class_mixture{0.2, 0.2, 0.2, 0.2, 0.2};
    double jitter = 0.02;          // max per-channel RGB deviation from the palette color
    double occlusion_rate = 0.05;  // fraction of berries placed overlapping another
    uint64_t seed = 0;
    std::array<std::array<float, 3>, 5> palette = class_palette();
};

struct BerrySpec {
    double center_x = 0.0;
    double center_y = 0.0;
    double radius = 0.0;   // semi-major axis, px
    int cls = 0;           // painted class 1..5
    std::array<float, 3> base_rgb{};
};

struct SyntheticScene {
    Image image;
    SegmentationMask truth_mask;  // instance i+1 <-> berry_specs[i]
    PointAnnotation points;
    std::vector<BerrySpec> berry_specs;
    uint64_t seed = 0;
};

// Leaf-textured background (low-frequency green noise) with anti-aliased
// elliptical berries. Class counts follow the mixture by largest-remainder
// apportionment, so the realized composition matches the script exactly up
// to rounding. Deterministic by seed.
SyntheticScene generate_scene(const SceneSpec& spec);

struct SeasonScript {
    std::string bog_id;
    Variety variety = Variety::MullicaQueen;
    std::vector<Date> dates;
    std::vector<std::array<double, 5>> mixtures;  // one simplex per date

    void save(const std::filesystem::path& file) const;
    static SeasonScript load(const std::filesystem::path& file);
};

std::vector<std::pair<SyntheticScene, CaptureMeta>> generate_season(const SeasonScript& script,
                                                                    const SceneSpec& scene_spec,
                                                                    uint64_t seed);

struct OracleReport {
    double max_ratio_error = 0.0;
    std::vector<double> per_date_errors;
};

// Analytic ripeness ratios follow directly from the scripted mixtures
// (classes 4+5 mass over the final date's mass); reports |pipeline - analytic|.
OracleReport oracle_evaluate(const RipenessSeries& pipeline_output, const SeasonScript& script);

// The analytic red mass of one scripted date.
double scripted_red_mass(const std::array<double, 5>& mixture);

// Writes a season in the standard dataset layout: frames, annotations,
// per-bog meta.json, truth masks under truth/, and the script alongside the
// bog directory for oracle checks. Returns the number of scenes written.
int write_season_dataset(const std::filesystem::path& root, const SeasonScript& script,
                         const SceneSpec& scene_spec, uint64_t seed, int frames_per_date = 1);

}  // namespace cranberry
