#include "cranberry/pipeline.hpp"

#include <atomic>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <map>
#include <mutex>
#include <ostream>
#include <set>
#include <thread>

#include <json.hpp>

#include "cranberry/calibration.hpp"
#include "cranberry/color_classes.hpp"
#include "cranberry/dataset.hpp"
#include "cranberry/errors.hpp"
#include "cranberry/pixel_scorer.hpp"
#include "cranberry/png_io.hpp"
#include "cranberry/pseudo_mask.hpp"

namespace cranberry {

using nlohmann::json;
namespace fs = std::filesystem;

std::string PipelineConfig::to_json() const {
    json j;
    j["dataset_root"] = dataset_root.string();
    j["output_dir"] = output_dir.string();
    j["scorer_file"] = scorer_file.string();
    j["color_model_file"] = color_model_file.string();
    j["grey_reference_file"] = grey_reference_file.string();
    j["train"] = train;
    j["train_epochs"] = train_epochs;
    j["train_lr"] = train_lr;
    j["seg"] = {{"tau", seg.tau},
                {"kappa", seg.kappa},
                {"min_area", seg.min_area},
                {"rfg", seg.r_fg},
                {"rig", seg.r_ig},
                {"seed_min_separation", seg.seed_min_separation}};
    j["risk"] = {{"threshold", risk.threshold}, {"red_classes", risk.red_classes}};
    j["crop_w"] = crop_w;
    j["crop_h"] = crop_h;
    j["k"] = k;
    j["seed"] = seed;
    j["sample_pixels"] = sample_pixels;
    j["jobs"] = jobs;
    j["save_masks"] = save_masks;
    return j.dump();
}

PipelineConfig PipelineConfig::from_json_file(const fs::path& file) {
    std::ifstream in(file);
    if (!in) throw DataError("cannot open config '" + file.string() + "'");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw DataError("malformed config '" + file.string() + "': " + e.what());
    }
    PipelineConfig cfg;
    cfg.dataset_root = j.value("dataset_root", std::string{});
    cfg.output_dir = j.value("output_dir", std::string{});
    cfg.scorer_file = j.value("scorer_file", std::string{});
    cfg.color_model_file = j.value("color_model_file", std::string{});
    cfg.grey_reference_file = j.value("grey_reference_file", std::string{});
    cfg.train = j.value("train", false);
    cfg.train_epochs = j.value("train_epochs", 150);
    cfg.train_lr = j.value("train_lr", 0.5);
    if (j.contains("seg")) {
        const auto& s = j["seg"];
        cfg.seg.tau = s.value("tau", cfg.seg.tau);
        cfg.seg.kappa = s.value("kappa", cfg.seg.kappa);
        cfg.seg.min_area = s.value("min_area", cfg.seg.min_area);
        cfg.seg.r_fg = s.value("rfg", cfg.seg.r_fg);
        cfg.seg.r_ig = s.value("rig", cfg.seg.r_ig);
        cfg.seg.seed_min_separation = s.value("seed_min_separation", cfg.seg.seed_min_separation);
    }
    if (j.contains("risk")) {
        cfg.risk.threshold = j["risk"].value("threshold", cfg.risk.threshold);
        if (j["risk"].contains("red_classes")) {
            cfg.risk.red_classes = j["risk"]["red_classes"].get<std::vector<int>>();
        }
    }
    cfg.crop_w = j.value("crop_w", 456);
    cfg.crop_h = j.value("crop_h", 608);
    cfg.k = j.value("k", 10);
    cfg.seed = j.value("seed", 0ull);
    cfg.sample_pixels = j.value("sample_pixels", std::size_t{20000});
    cfg.jobs = j.value("jobs", 1);
    cfg.save_masks = j.value("save_masks", false);
    return cfg;
}

namespace {

struct OutputTracker {
    std::vector<fs::path> files;
    fs::path track(const fs::path& p) {
        files.push_back(p);
        return p;
    }
    void remove_all() {
        for (const auto& p : files) {
            std::error_code ec;
            fs::remove(p, ec);
        }
    }
};

std::string sanitize(const std::string& s) {
    std::string out = s;
    for (char& c : out) {
        if (c == '/' || c == '\\' || c == ' ') c = '_';
    }
    return out;
}

}  // namespace

PipelineResult run_pipeline(const PipelineConfig& config, std::ostream& log) {
    // config validation happens before any stage runs; these are data errors,
    // not stage failures
    if (config.dataset_root.empty() || config.output_dir.empty()) {
        throw DataError("pipeline config needs dataset_root and output_dir");
    }
    if (!fs::is_directory(config.dataset_root)) {
        throw DataError("dataset root '" + config.dataset_root.string() + "' is not a directory");
    }
    if (!config.train) {
        if (config.scorer_file.empty()) throw DataError("no scorer: pass a trained scorer file or --train");
        if (!fs::exists(config.scorer_file)) {
            throw DataError("scorer file '" + config.scorer_file.string() + "' does not exist");
        }
    }
    if (!config.color_model_file.empty() && !fs::exists(config.color_model_file)) {
        throw DataError("color model file '" + config.color_model_file.string() + "' does not exist");
    }
    if (config.seg.tau <= 0.0 || config.seg.tau >= 1.0) throw DataError("tau must lie in (0,1)");
    if (config.risk.threshold <= 0.0 || config.risk.threshold > 1.5) {
        throw DataError("risk threshold must lie in (0, 1.5]");
    }

    PipelineResult result;
    OutputTracker outputs;
    std::string current_stage = "setup";

    const auto run_stage = [&](const std::string& name, auto&& body) {
        current_stage = name;
        const auto start = std::chrono::steady_clock::now();
        body();
        const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                            std::chrono::steady_clock::now() - start).count();
        log << "[stage] " << name << ": " << ms << " ms\n";
    };

    try {
        DatasetIndex index;
        run_stage("load", [&] {
            index = load_dataset(config.dataset_root);
            result.warnings = index.warnings;
            fs::create_directories(config.output_dir);
            save_index(index, outputs.track(config.output_dir / "index.json"));
        });

        ReportPaths& reports = result.reports;
        reports.ripeness_csv = config.output_dir / "ripeness.csv";
        reports.histogram_csv = config.output_dir / "histograms.csv";
        reports.risk_json = config.output_dir / "risk.json";
        reports.manifest_json = config.output_dir / "manifest.json";

        if (index.entries.empty()) {
            run_stage("report", [&] {
                write_ripeness_csv(outputs.track(reports.ripeness_csv), {});
                write_histogram_csv(outputs.track(reports.histogram_csv), {});
                write_risk_json(outputs.track(reports.risk_json), {}, config.risk);
                write_manifest(outputs.track(reports.manifest_json), config.to_json(), {});
            });
            result.warnings.push_back("empty dataset: reports contain no rows");
            result.empty_dataset = true;
            for (const auto& w : result.warnings) log << "[warn] " << w << "\n";
            return result;
        }

        const std::size_t n_frames = index.entries.size();
        std::vector<Image> images(n_frames);
        std::vector<ManifestInput> manifest_inputs;

        run_stage("calibrate", [&] {
            std::map<std::pair<std::string, std::string>, RadiometricCorrection> corrections;
            std::map<std::pair<std::string, std::string>, bool> missing_warned;
            for (std::size_t i = 0; i < n_frames; ++i) {
                const auto& entry = index.entries[i];
                const auto session = std::make_pair(entry.meta.bog_id, entry.meta.date.to_string());
                Image img = read_png_rgb(entry.frame_path);
                const fs::path corr_file =
                    config.dataset_root / entry.meta.bog_id / entry.meta.date.to_string() / "calibration.json";
                if (corrections.count(session)) {
                    img = apply_correction(img, corrections.at(session));
                } else if (fs::exists(corr_file)) {
                    corrections.emplace(session, RadiometricCorrection::load(corr_file));
                    img = apply_correction(img, corrections.at(session));
                } else {
                    if (!missing_warned[session]) {
                        result.warnings.push_back("no calibration.json for " + session.first + "/" +
                                                  session.second + "; treating frames as calibrated");
                        missing_warned[session] = true;
                    }
                    img.calibrated = true;
                }
                images[i] = std::move(img);
            }
            for (const auto& [session, corr] : corrections) {
                (void)corr;
                const fs::path f = config.dataset_root / session.first / session.second / "calibration.json";
                manifest_inputs.push_back({fs::relative(f, config.dataset_root).string(),
                                           fs::file_size(f), fnv1a_file(f)});
            }
            std::set<fs::path> annotation_files;
            for (const auto& entry : index.entries) {
                manifest_inputs.push_back({fs::relative(entry.frame_path, config.dataset_root).string(),
                                           fs::file_size(entry.frame_path), fnv1a_file(entry.frame_path)});
                const fs::path ann = entry.frame_path.parent_path().parent_path() / "annotations.json";
                if (fs::exists(ann)) annotation_files.insert(ann);
            }
            for (const auto& ann : annotation_files) {
                manifest_inputs.push_back({fs::relative(ann, config.dataset_root).string(),
                                           fs::file_size(ann), fnv1a_file(ann)});
            }
        });

        PixelScorer scorer;
        run_stage("train", [&] {
            if (config.train) {
                std::vector<LabeledCrop> crops;
                for (std::size_t i = 0; i < n_frames; ++i) {
                    const auto& entry = index.entries[i];
                    if (!entry.annotation) continue;
                    LabeledCrop crop;
                    crop.mask = build_pseudo_mask(*entry.annotation, images[i].width, images[i].height,
                                                  config.seg.r_fg, config.seg.r_ig);
                    crop.image = images[i];
                    crops.push_back(std::move(crop));
                }
                if (crops.empty()) throw DataError("--train requested but the dataset has no annotations");
                scorer = train_scorer(crops, config.train_epochs, config.train_lr, config.seed);
                scorer.save(outputs.track(config.output_dir / "scorer.json"));
            } else {
                scorer = PixelScorer::load(config.scorer_file);
                manifest_inputs.push_back({config.scorer_file.string(), fs::file_size(config.scorer_file),
                                           fnv1a_file(config.scorer_file)});
            }
        });

        // frames larger than one crop shatter into the non-overlapping grid;
        // frames at or below crop size pass through whole
        struct WorkItem {
            Image image;
            std::size_t entry = 0;
            std::string crop_id;
        };
        std::vector<WorkItem> items;
        run_stage("tile", [&] {
            for (std::size_t i = 0; i < n_frames; ++i) {
                Image& frame = images[i];
                const bool exact = frame.width == config.crop_w && frame.height == config.crop_h;
                if (!exact && frame.width >= config.crop_w && frame.height >= config.crop_h) {
                    const CropGrid grid = CropGrid::fit(frame.width, frame.height, config.crop_w, config.crop_h);
                    auto crops = tile_frame(frame, grid);
                    for (std::size_t c = 0; c < crops.size(); ++c) {
                        char suffix[24];
                        std::snprintf(suffix, sizeof suffix, "_r%02d_c%02d",
                                      static_cast<int>(c) / grid.cols, static_cast<int>(c) % grid.cols);
                        items.push_back({std::move(crops[c].image), i, suffix});
                    }
                } else {
                    items.push_back({std::move(frame), i, ""});
                }
            }
            images.clear();
            log << "[stage] tile: " << items.size() << " work items from " << n_frames << " frames\n";
        });

        const std::size_t n_items = items.size();
        std::vector<SegmentationMask> masks(n_items);
        run_stage("segment", [&] {
            const int jobs = std::max(1, config.jobs);
            std::atomic<std::size_t> next{0};
            std::vector<std::thread> workers;
            std::atomic<bool> failed{false};
            std::string error_message;
            std::mutex error_mutex;
            auto work = [&] {
                for (;;) {
                    const std::size_t i = next.fetch_add(1);
                    if (i >= n_items || failed.load()) break;
                    try {
                        masks[i] = segment(items[i].image, scorer, config.seg);
                    } catch (const std::exception& e) {
                        std::lock_guard<std::mutex> lock(error_mutex);
                        error_message = e.what();
                        failed.store(true);
                        break;
                    }
                }
            };
            if (jobs == 1) {
                work();
            } else {
                for (int t = 0; t < jobs; ++t) workers.emplace_back(work);
                for (auto& t : workers) t.join();
            }
            if (failed.load()) throw DataError(error_message);

            if (config.save_masks) {
                const fs::path mask_dir = config.output_dir / "masks";
                fs::create_directories(mask_dir);
                for (std::size_t i = 0; i < n_items; ++i) {
                    const auto& entry = index.entries[items[i].entry];
                    const std::string stem = sanitize(entry.meta.bog_id) + "_" + entry.meta.date.to_string() +
                                             "_" + entry.frame_path.stem().string() + items[i].crop_id;
                    masks[i].save(outputs.track(mask_dir / (stem + "_ids.png")),
                                  outputs.track(mask_dir / (stem + ".json")));
                }
            }
        });

        ColorClassModel model;
        run_stage("model", [&] {
            if (!config.color_model_file.empty()) {
                model = ColorClassModel::load(config.color_model_file);
                manifest_inputs.push_back({config.color_model_file.string(),
                                           fs::file_size(config.color_model_file),
                                           fnv1a_file(config.color_model_file)});
            } else {
                std::vector<const Image*> item_images;
                item_images.reserve(n_items);
                for (const auto& item : items) item_images.push_back(&item.image);
                const auto pixels = sample_berry_pixels(masks, item_images, config.sample_pixels, config.seed,
                                                        &result.warnings);
                model = build_color_model(pixels, config.k, config.seed);
                model.save(outputs.track(config.output_dir / "color_model.json"));
            }
        });

        std::map<std::pair<std::string, Date>, std::pair<CaptureMeta, std::vector<BerryClassification>>> groups;
        run_stage("classify", [&] {
            for (std::size_t i = 0; i < n_items; ++i) {
                const auto& meta = index.entries[items[i].entry].meta;
                auto& group = groups[{meta.bog_id, meta.date}];
                group.first = meta;
                for (const auto& inst : masks[i].instances) {
                    group.second.push_back(classify_berry(inst, items[i].image, model, meta));
                }
            }
        });

        std::vector<ClassHistogram> histograms;
        std::map<std::string, Variety> bog_variety;
        run_stage("histogram", [&] {
            for (const auto& [key, group] : groups) {
                histograms.push_back(class_histogram(group.second, group.first));
                bog_variety[key.first] = group.first.variety;
            }
        });

        run_stage("series", [&] {
            std::map<std::string, std::vector<ClassHistogram>> by_bog;
            for (const auto& h : histograms) by_bog[h.bog_id].push_back(h);
            for (const auto& [bog, hists] : by_bog) {
                result.series.push_back(ripeness_series(hists, config.risk, bog_variety.at(bog)));
            }
        });

        run_stage("report", [&] {
            write_histogram_csv(outputs.track(reports.histogram_csv), histograms);
            write_ripeness_csv(outputs.track(reports.ripeness_csv), result.series);
            write_risk_json(outputs.track(reports.risk_json), result.series, config.risk);
            std::map<std::string, std::vector<ClassHistogram>> by_bog;
            for (const auto& h : histograms) by_bog[h.bog_id].push_back(h);
            for (const auto& [bog, hists] : by_bog) {
                const fs::path svg = config.output_dir / ("albedo_" + sanitize(bog) + ".svg");
                write_albedo_svg(outputs.track(svg), bog, hists);
                reports.svg_files.push_back(svg);
            }
            write_manifest(outputs.track(reports.manifest_json), config.to_json(), manifest_inputs);
        });
    } catch (const PipelineError&) {
        outputs.remove_all();
        throw;
    } catch (const std::exception& e) {
        outputs.remove_all();
        throw PipelineError(current_stage, e.what());
    }

    for (const auto& w : result.warnings) log << "[warn] " << w << "\n";
    return result;
}

}  // namespace cranberry
