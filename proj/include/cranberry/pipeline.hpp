#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "cranberry/report.hpp"
#include "cranberry/ripeness.hpp"
#include "cranberry/segmentation.hpp"

namespace cranberry {

struct PipelineConfig {
    std::filesystem::path dataset_root;
    std::filesystem::path output_dir;
    std::filesystem::path scorer_file;          // load when set; otherwise --train must be on
    std::filesystem::path color_model_file;     // load when set; otherwise built from the run
    std::filesystem::path grey_reference_file;  // optional override of the bundled defaults
    bool train = false;
    int train_epochs = 150;
    double train_lr = 0.5;
    SegParams seg;
    RiskConfig risk;
    int crop_w = 456;  // frames larger than one crop are tiled before segmentation
    int crop_h = 608;
    int k = 10;
    uint64_t seed = 0;
    std::size_t sample_pixels = 20000;
    int jobs = 1;
    bool save_masks = false;

    std::string to_json() const;  // canonical form used for hashing and the manifest
    static PipelineConfig from_json_file(const std::filesystem::path& file);
};

struct ReportPaths {
    std::filesystem::path ripeness_csv;
    std::filesystem::path histogram_csv;
    std::filesystem::path risk_json;
    std::filesystem::path manifest_json;
    std::vector<std::filesystem::path> svg_files;
};

struct PipelineResult {
    ReportPaths reports;
    std::vector<RipenessSeries> series;
    std::vector<std::string> warnings;
    bool empty_dataset = false;
};

// calibrate -> tile -> segment -> classify -> histogram -> series -> reports.
// Stage failures surface as PipelineError carrying the stage name; partial
// outputs are removed. Stage timings go to the log stream.
PipelineResult run_pipeline(const PipelineConfig& config, std::ostream& log);

}  // namespace cranberry
