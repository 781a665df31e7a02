// cranberry: photometric calibration, point-supervised berry segmentation,
// 5-class albedo classification and per-bog ripeness timelines, end to end.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>

#include <CLI11.hpp>
#include <json.hpp>

#include "cranberry/calibration.hpp"
#include "cranberry/color_classes.hpp"
#include "cranberry/dataset.hpp"
#include "cranberry/errors.hpp"
#include "cranberry/pipeline.hpp"
#include "cranberry/pixel_scorer.hpp"
#include "cranberry/png_io.hpp"
#include "cranberry/pseudo_mask.hpp"
#include "cranberry/report.hpp"
#include "cranberry/ripeness.hpp"
#include "cranberry/rng.hpp"
#include "cranberry/segmentation.hpp"
#include "cranberry/synth.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace cranberry;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitPipeline = 1;
constexpr int kExitData = 2;
constexpr int kExitUsage = 64;

std::array<Rect, 6> load_rects(const fs::path& file) {
    std::ifstream in(file);
    if (!in) throw DataError("cannot open patch rectangles '" + file.string() + "'");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw DataError("malformed patch rectangles '" + file.string() + "': " + e.what());
    }
    if (!j.is_array() || j.size() != 6) throw DataError("patch rectangles must be a JSON array of 6 [x,y,w,h]");
    std::array<Rect, 6> rects;
    for (int i = 0; i < 6; ++i) {
        rects[i] = {j[i].at(0).get<int>(), j[i].at(1).get<int>(), j[i].at(2).get<int>(), j[i].at(3).get<int>()};
    }
    return rects;
}

std::array<double, 5> parse_mixture(const std::string& csv) {
    std::array<double, 5> mix{};
    if (std::sscanf(csv.c_str(), "%lf,%lf,%lf,%lf,%lf", &mix[0], &mix[1], &mix[2], &mix[3], &mix[4]) != 5) {
        throw CLI::ValidationError("mixture", "expected 5 comma-separated fractions");
    }
    double sum = 0.0;
    for (double m : mix) {
        if (m < 0.0) throw CLI::ValidationError("mixture", "fractions must be non-negative");
        sum += m;
    }
    if (std::abs(sum - 1.0) > 1e-6) throw CLI::ValidationError("mixture", "fractions must sum to 1");
    return mix;
}

// Snap a mixture onto twentieths so a 120-berry scene realizes it exactly.
std::array<double, 5> snap_mixture(const std::array<double, 5>& mix) {
    std::array<int, 5> ticks{};
    std::array<double, 5> rem{};
    int assigned = 0;
    for (int c = 0; c < 5; ++c) {
        const double exact = mix[c] * 20.0;
        ticks[c] = static_cast<int>(exact);
        rem[c] = exact - ticks[c];
        assigned += ticks[c];
    }
    std::array<int, 5> order{0, 1, 2, 3, 4};
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return rem[a] > rem[b]; });
    for (int i = 0; assigned < 20; ++i) {
        ++ticks[order[i % 5]];
        ++assigned;
    }
    std::array<double, 5> snapped{};
    for (int c = 0; c < 5; ++c) snapped[c] = ticks[c] / 20.0;
    return snapped;
}

// Green-to-red season progression; speed echoes how fast each variety ripens.
SeasonScript make_script(const std::string& bog_id, Variety variety, const Date& start, int n_dates,
                         int interval_days, const std::array<double, 5>& start_mix,
                         const std::array<double, 5>& end_mix) {
    double speed = 1.0;
    switch (variety) {
        case Variety::Haines: speed = 1.35; break;
        case Variety::CrimsonQueen: speed = 1.2; break;
        case Variety::MullicaQueen: speed = 1.0; break;
        case Variety::Stevens: speed = 0.85; break;
    }
    SeasonScript script;
    script.bog_id = bog_id;
    script.variety = variety;
    Date d = start;
    for (int i = 0; i < n_dates; ++i) {
        const double p = n_dates == 1 ? 1.0 : std::min(1.0, speed * i / (n_dates - 1));
        std::array<double, 5> mix{};
        for (int c = 0; c < 5; ++c) mix[c] = (1.0 - p) * start_mix[c] + p * end_mix[c];
        script.dates.push_back(d);
        script.mixtures.push_back(snap_mixture(mix));

        // walk forward day by day; intervals are short
        for (int step = 0; step < interval_days; ++step) {
            static const int md[12] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
            int dim = md[d.month - 1];
            if (d.month == 2 && ((d.year % 4 == 0 && d.year % 100 != 0) || d.year % 400 == 0)) dim = 29;
            if (++d.day > dim) {
                d.day = 1;
                if (++d.month > 12) {
                    d.month = 1;
                    ++d.year;
                }
            }
        }
    }
    return script;
}

int cmd_calibrate(const fs::path& card, const fs::path& rects_file, const fs::path& reference_file,
                  const std::string& session, const fs::path& out_file) {
    const Image card_image = read_png_rgb(card);
    const auto rects = load_rects(rects_file);
    GreyReference reference;
    if (!reference_file.empty()) reference = GreyReference::load(reference_file);

    const auto measured = measure_grey_patches(card_image, rects, session);
    const auto corr = fit_correction(measured, reference);
    corr.save(out_file);
    std::printf("session %s: gain (%.6f, %.6f, %.6f) offset (%.6f, %.6f, %.6f) residual_rms %.3e\n",
                session.c_str(), corr.gain[0], corr.gain[1], corr.gain[2], corr.offset[0], corr.offset[1],
                corr.offset[2], corr.residual_rms);
    return kExitOk;
}

int cmd_synth(const fs::path& out_root, int bogs, int dates, int berries, int width, int height,
              double radius_min, double radius_max, double jitter, double occlusion, uint64_t seed,
              int frames_per_date, const std::string& start_date, int interval_days,
              const std::array<double, 5>& start_mix, const std::array<double, 5>& end_mix,
              const fs::path& palette_file) {
    static const Variety cycle[4] = {Variety::MullicaQueen, Variety::Haines, Variety::Stevens,
                                     Variety::CrimsonQueen};
    SceneSpec spec;
    spec.width = width;
    spec.height = height;
    spec.n_berries = berries;
    spec.radius_min = radius_min;
    spec.radius_max = radius_max;
    spec.jitter = jitter;
    spec.occlusion_rate = occlusion;
    if (!palette_file.empty()) spec.palette = load_palette(palette_file);

    const Date start = Date::parse(start_date);
    int scenes = 0;
    for (int b = 0; b < bogs; ++b) {
        char bog_id[16];
        std::snprintf(bog_id, sizeof bog_id, "bog-%02d", b + 1);
        const SeasonScript script =
            make_script(bog_id, cycle[b % 4], start, dates, interval_days, start_mix, end_mix);
        scenes += write_season_dataset(out_root, script, spec, mix_seed(seed, 7000 + b), frames_per_date);
    }
    std::printf("wrote %d scenes (%d bogs x %d dates) under %s\n", scenes, bogs, dates,
                out_root.string().c_str());
    return kExitOk;
}

int cmd_train(const fs::path& root, const fs::path& out_file, int epochs, double lr, uint64_t seed,
              int r_fg, int r_ig) {
    const DatasetIndex index = load_dataset(root);
    for (const auto& w : index.warnings) std::fprintf(stderr, "[warn] %s\n", w.c_str());

    std::vector<LabeledCrop> crops;
    for (const auto& entry : index.entries) {
        if (!entry.annotation) continue;
        LabeledCrop crop;
        crop.image = read_png_rgb(entry.frame_path);
        crop.mask = build_pseudo_mask(*entry.annotation, crop.image.width, crop.image.height, r_fg, r_ig);
        crops.push_back(std::move(crop));
    }
    if (crops.empty()) throw DataError("no annotated frames under '" + root.string() + "'");

    const PixelScorer scorer = train_scorer(crops, epochs, lr, seed);
    scorer.save(out_file);
    std::printf("trained on %zu crops, %d epochs: final loss %.6f, accuracy %.4f -> %s\n", crops.size(),
                epochs, scorer.loss_history.empty() ? 0.0 : scorer.loss_history.back(),
                scorer_accuracy(scorer, crops), out_file.string().c_str());
    return kExitOk;
}

int cmd_segment(const std::vector<fs::path>& image_files, const fs::path& scorer_file,
                const fs::path& calibration_file, const fs::path& out_dir, const SegParams& params) {
    const PixelScorer scorer = PixelScorer::load(scorer_file);
    fs::create_directories(out_dir);
    for (const auto& file : image_files) {
        Image img = read_png_rgb(file);
        if (!calibration_file.empty()) {
            img = apply_correction(img, RadiometricCorrection::load(calibration_file));
        } else {
            img.calibrated = true;
        }
        const SegmentationMask mask = segment(img, scorer, params);
        const std::string stem = file.stem().string();
        mask.save(out_dir / (stem + "_ids.png"), out_dir / (stem + ".json"));
        std::printf("%s: %d instances\n", file.string().c_str(), count(mask));
    }
    return kExitOk;
}

int cmd_classify(const fs::path& image_file, const fs::path& mask_png, const fs::path& mask_json,
                 const fs::path& model_file, const std::string& bog, const std::string& date_str,
                 const fs::path& out_file) {
    const Image img = read_png_rgb(image_file);
    const SegmentationMask mask = SegmentationMask::load(mask_png, mask_json);
    const ColorClassModel model = ColorClassModel::load(model_file);

    CaptureMeta meta;
    meta.bog_id = bog.empty() ? "unknown" : bog;
    meta.date = date_str.empty() ? Date{1970, 1, 1} : Date::parse(date_str);
    meta.source_frame = image_file.filename().string();

    std::vector<BerryClassification> classifications;
    for (const auto& inst : mask.instances) {
        classifications.push_back(classify_berry(inst, img, model, meta));
    }
    const ClassHistogram hist = class_histogram(classifications, meta);

    json j;
    j["image"] = image_file.string();
    j["berries"] = json::array();
    for (std::size_t i = 0; i < classifications.size(); ++i) {
        j["berries"].push_back({{"id", i + 1},
                                {"class", classifications[i].cls},
                                {"vote_fractions", classifications[i].vote_fractions}});
    }
    j["histogram"] = {{"bog", hist.bog_id},
                      {"date", hist.date.to_string()},
                      {"fractions", hist.fractions},
                      {"count", hist.berry_count}};
    if (out_file.empty()) {
        std::cout << j.dump(2) << "\n";
    } else {
        std::ofstream out(out_file);
        if (!out) throw DataError("cannot write '" + out_file.string() + "'");
        out << j.dump(2) << "\n";
    }
    return kExitOk;
}

std::vector<fs::path> find_mask_tables(const fs::path& dir) {
    std::vector<fs::path> out;
    for (const auto& entry : fs::recursive_directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        const std::string name = entry.path().filename().string();
        if (name.size() > 8 && name.ends_with("_ids.png")) out.push_back(entry.path());
    }
    std::sort(out.begin(), out.end());
    return out;
}

int cmd_eval(const fs::path& pred_dir, const fs::path& truth_dir) {
    const auto pred_files = find_mask_tables(pred_dir);
    const auto truth_files = find_mask_tables(truth_dir);
    if (pred_files.size() != truth_files.size()) {
        std::fprintf(stderr, "error: %zu prediction masks vs %zu truth masks\n", pred_files.size(),
                     truth_files.size());
        return kExitData;
    }
    if (pred_files.empty()) {
        std::fprintf(stderr, "error: no *_ids.png masks found\n");
        return kExitData;
    }
    auto table_for = [](const fs::path& ids_png) {
        std::string stem = ids_png.filename().string();
        stem.resize(stem.size() - 8);  // strip _ids.png
        return ids_png.parent_path() / (stem + ".json");
    };
    std::vector<SegmentationMask> preds, truths;
    for (std::size_t i = 0; i < pred_files.size(); ++i) {
        preds.push_back(SegmentationMask::load(pred_files[i], table_for(pred_files[i])));
        truths.push_back(SegmentationMask::load(truth_files[i], table_for(truth_files[i])));
    }
    EvalReport report = evaluate(preds, truths);
    for (std::size_t i = 0; i < report.per_image.size(); ++i) {
        report.per_image[i].image_id = fs::relative(pred_files[i], pred_dir).string();
    }
    std::cout << report.to_json() << "\n";
    return kExitOk;
}

int cmd_report(const fs::path& histograms_csv, const fs::path& out_dir, double threshold,
               const std::vector<std::string>& variety_specs) {
    std::map<std::string, Variety> varieties;
    for (const auto& spec : variety_specs) {
        const auto eq = spec.find('=');
        if (eq == std::string::npos) throw DataError("variety spec must be bog=Name: '" + spec + "'");
        varieties[spec.substr(0, eq)] = variety_from_string(spec.substr(eq + 1));
    }

    const auto hists = read_histogram_csv(histograms_csv);
    RiskConfig cfg;
    cfg.threshold = threshold;

    std::map<std::string, std::vector<ClassHistogram>> by_bog;
    for (const auto& h : hists) by_bog[h.bog_id].push_back(h);

    fs::create_directories(out_dir);
    std::vector<RipenessSeries> all_series;
    for (auto& [bog, bog_hists] : by_bog) {
        std::sort(bog_hists.begin(), bog_hists.end(),
                  [](const ClassHistogram& a, const ClassHistogram& b) { return a.date < b.date; });
        const Variety v = varieties.count(bog) ? varieties.at(bog) : Variety::MullicaQueen;
        all_series.push_back(ripeness_series(bog_hists, cfg, v));
        write_albedo_svg(out_dir / ("albedo_" + bog + ".svg"), bog, bog_hists);
    }
    write_ripeness_csv(out_dir / "ripeness.csv", all_series);
    write_risk_json(out_dir / "risk.json", all_series, cfg);

    std::vector<std::string> warnings;
    const auto ranking = variety_comparison(all_series, cfg, &warnings);
    for (const auto& w : warnings) std::fprintf(stderr, "[warn] %s\n", w.c_str());
    for (const auto& r : ranking) {
        std::printf("%s: mean first-risk offset %.1f days over %d series\n", to_string(r.variety),
                    r.mean_first_risk_offset_days, r.series_count);
    }
    std::printf("reports under %s\n", out_dir.string().c_str());
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"cranberry ripening assessment pipeline"};
    app.require_subcommand(0, 1);
    bool show_version = false;
    bool show_manifest = false;
    app.add_flag("--version", show_version, "print version and exit");
    app.add_flag("--manifest", show_manifest, "print build provenance and exit");

    // calibrate
    auto* calibrate = app.add_subcommand("calibrate", "fit a radiometric correction from grey patches");
    fs::path card_file, rects_file, reference_file, calib_out = "calibration.json";
    std::string session_id = "session";
    calibrate->add_option("--card", card_file, "color-checker card PNG")->required();
    calibrate->add_option("--rects", rects_file, "JSON with 6 patch rectangles [x,y,w,h]")->required();
    calibrate->add_option("--reference", reference_file, "grey reference JSON (6 floats)");
    calibrate->add_option("--session", session_id, "session identifier");
    calibrate->add_option("--out", calib_out, "output calibration.json");

    // synth
    auto* synth = app.add_subcommand("synth", "write a ground-truthed synthetic season dataset");
    fs::path synth_out;
    int synth_bogs = 2, synth_dates = 6, synth_berries = 120, synth_w = 456, synth_h = 608;
    int synth_frames = 1, synth_interval = 7;
    double synth_rmin = 5.0, synth_rmax = 9.0, synth_jitter = 0.02, synth_occlusion = 0.05;
    uint64_t synth_seed = 42;
    std::string synth_start = "2022-08-02";
    std::string start_mix_csv = "0.60,0.20,0.10,0.05,0.05";
    std::string end_mix_csv = "0.05,0.05,0.10,0.35,0.45";
    synth->add_option("--out", synth_out, "dataset root to create")->required();
    synth->add_option("--bogs", synth_bogs, "number of bogs");
    synth->add_option("--dates", synth_dates, "collection dates per bog");
    synth->add_option("--berries", synth_berries, "berries per scene");
    synth->add_option("--width", synth_w, "scene width, px");
    synth->add_option("--height", synth_h, "scene height, px");
    synth->add_option("--radius-min", synth_rmin, "minimum berry radius, px");
    synth->add_option("--radius-max", synth_rmax, "maximum berry radius, px");
    synth->add_option("--jitter", synth_jitter, "max RGB jitter around the palette color");
    synth->add_option("--occlusion", synth_occlusion, "fraction of berries placed overlapping");
    synth->add_option("--seed", synth_seed, "generation seed");
    synth->add_option("--frames-per-date", synth_frames, "frames per bog/date");
    synth->add_option("--start-date", synth_start, "first collection date (YYYY-MM-DD)");
    synth->add_option("--interval-days", synth_interval, "days between collections");
    synth->add_option("--start-mixture", start_mix_csv, "first-date class mixture, 5 fractions");
    synth->add_option("--end-mixture", end_mix_csv, "final-date class mixture, 5 fractions");
    fs::path synth_palette;
    synth->add_option("--palette", synth_palette, "palette JSON (five [r,g,b] rows, green to red)");

    // train
    auto* train = app.add_subcommand("train", "train the pixel scorer from point annotations");
    fs::path train_root, train_out = "scorer.json";
    int train_epochs = 150, train_rfg = 6, train_rig = 4;
    double train_lr = 0.5;
    uint64_t train_seed = 0;
    train->add_option("--data", train_root, "dataset root")->required();
    train->add_option("--out", train_out, "output scorer JSON");
    train->add_option("--epochs", train_epochs, "training epochs");
    train->add_option("--lr", train_lr, "learning rate");
    train->add_option("--seed", train_seed, "training seed");
    train->add_option("--rfg", train_rfg, "pseudo-mask foreground radius, px");
    train->add_option("--rig", train_rig, "pseudo-mask ignore annulus width, px");

    // segment
    auto* seg_cmd = app.add_subcommand("segment", "segment berry instances in images");
    std::vector<fs::path> seg_images;
    fs::path seg_scorer, seg_calibration, seg_out = "masks";
    SegParams seg_params;
    seg_cmd->add_option("--image", seg_images, "input PNG (repeatable)")->required();
    seg_cmd->add_option("--scorer", seg_scorer, "trained scorer JSON")->required();
    seg_cmd->add_option("--calibration", seg_calibration, "calibration.json to apply first");
    seg_cmd->add_option("--out-dir", seg_out, "output directory for masks");
    seg_cmd->add_option("--tau", seg_params.tau, "score threshold");
    seg_cmd->add_option("--kappa", seg_params.kappa, "minimum convexity");
    seg_cmd->add_option("--min-area", seg_params.min_area, "minimum instance area, px^2");
    seg_cmd->add_option("--rfg", seg_params.r_fg, "pseudo-mask foreground radius, px");
    seg_cmd->add_option("--rig", seg_params.r_ig, "pseudo-mask ignore annulus width, px");

    // classify
    auto* classify = app.add_subcommand("classify", "classify segmented berries by albedo class");
    fs::path cls_image, cls_mask_png, cls_mask_json, cls_model, cls_out;
    std::string cls_bog, cls_date;
    classify->add_option("--image", cls_image, "input PNG")->required();
    classify->add_option("--mask-png", cls_mask_png, "instance id raster (16-bit PNG)")->required();
    classify->add_option("--mask-json", cls_mask_json, "instance table JSON")->required();
    classify->add_option("--model", cls_model, "color class model JSON")->required();
    classify->add_option("--bog", cls_bog, "bog id for the histogram row");
    classify->add_option("--date", cls_date, "capture date (YYYY-MM-DD)");
    classify->add_option("--out", cls_out, "write JSON here instead of stdout");

    // run
    auto* run = app.add_subcommand("run", "run the full pipeline and emit reports");
    fs::path run_config_file;
    PipelineConfig run_cfg;
    run->add_option("--config", run_config_file, "pipeline config JSON");
    auto* opt_data = run->add_option("--data", run_cfg.dataset_root, "dataset root");
    auto* opt_out = run->add_option("--out", run_cfg.output_dir, "output directory");
    auto* opt_train = run->add_flag("--train", run_cfg.train, "train the scorer from annotations");
    auto* opt_scorer = run->add_option("--scorer", run_cfg.scorer_file, "trained scorer JSON");
    auto* opt_model = run->add_option("--model", run_cfg.color_model_file, "color class model JSON");
    auto* opt_grey = run->add_option("--grey-reference", run_cfg.grey_reference_file, "grey reference JSON");
    auto* opt_epochs = run->add_option("--epochs", run_cfg.train_epochs, "training epochs");
    auto* opt_lr = run->add_option("--lr", run_cfg.train_lr, "learning rate");
    auto* opt_tau = run->add_option("--tau", run_cfg.seg.tau, "score threshold");
    auto* opt_kappa = run->add_option("--kappa", run_cfg.seg.kappa, "minimum convexity");
    auto* opt_min_area = run->add_option("--min-area", run_cfg.seg.min_area, "minimum instance area");
    auto* opt_rfg = run->add_option("--rfg", run_cfg.seg.r_fg, "pseudo-mask foreground radius");
    auto* opt_rig = run->add_option("--rig", run_cfg.seg.r_ig, "pseudo-mask ignore width");
    auto* opt_threshold = run->add_option("--threshold", run_cfg.risk.threshold, "ripeness risk threshold");
    auto* opt_crop_w = run->add_option("--crop-w", run_cfg.crop_w, "tiling crop width, px");
    auto* opt_crop_h = run->add_option("--crop-h", run_cfg.crop_h, "tiling crop height, px");
    auto* opt_k = run->add_option("--k", run_cfg.k, "raw color clusters");
    auto* opt_seed = run->add_option("--seed", run_cfg.seed, "run seed");
    auto* opt_sample = run->add_option("--sample-pixels", run_cfg.sample_pixels, "berry pixels sampled for the model");
    auto* opt_jobs = run->add_option("--jobs", run_cfg.jobs, "worker threads for per-image stages");
    auto* opt_save_masks = run->add_flag("--save-masks", run_cfg.save_masks, "persist per-frame masks");

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "compare predicted masks against truth masks");
    fs::path eval_pred, eval_truth;
    eval_cmd->add_option("pred_dir", eval_pred, "directory with predicted *_ids.png masks")->required();
    eval_cmd->add_option("truth_dir", eval_truth, "directory with truth *_ids.png masks")->required();

    // report
    auto* report_cmd = app.add_subcommand("report", "build ripeness reports from a histogram CSV");
    fs::path rep_hist, rep_out = "reports";
    double rep_threshold = 0.6;
    std::vector<std::string> rep_varieties;
    report_cmd->add_option("--histograms", rep_hist, "histogram CSV (bog,date,c1..c5,count)")->required();
    report_cmd->add_option("--out-dir", rep_out, "output directory");
    report_cmd->add_option("--threshold", rep_threshold, "ripeness risk threshold");
    report_cmd->add_option("--variety", rep_varieties, "bog=VarietyName (repeatable)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == static_cast<int>(CLI::ExitCodes::Success)) return app.exit(e);
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (show_version) {
            std::printf("cranberry %s\n", kVersion);
            return kExitOk;
        }
        if (show_manifest) {
            json j{{"tool", "cranberry"}, {"version", kVersion}, {"cxx_standard", __cplusplus}};
#if defined(__GNUC__)
            j["compiler"] = "gcc " + std::to_string(__GNUC__) + "." + std::to_string(__GNUC_MINOR__);
#endif
            std::cout << j.dump(2) << "\n";
            return kExitOk;
        }

        if (calibrate->parsed()) {
            return cmd_calibrate(card_file, rects_file, reference_file, session_id, calib_out);
        }
        if (synth->parsed()) {
            const auto start_mix = parse_mixture(start_mix_csv);
            const auto end_mix = parse_mixture(end_mix_csv);
            return cmd_synth(synth_out, synth_bogs, synth_dates, synth_berries, synth_w, synth_h,
                             synth_rmin, synth_rmax, synth_jitter, synth_occlusion, synth_seed,
                             synth_frames, synth_start, synth_interval, start_mix, end_mix,
                             synth_palette);
        }
        if (train->parsed()) {
            return cmd_train(train_root, train_out, train_epochs, train_lr, train_seed, train_rfg, train_rig);
        }
        if (seg_cmd->parsed()) {
            return cmd_segment(seg_images, seg_scorer, seg_calibration, seg_out, seg_params);
        }
        if (classify->parsed()) {
            return cmd_classify(cls_image, cls_mask_png, cls_mask_json, cls_model, cls_bog, cls_date, cls_out);
        }
        if (run->parsed()) {
            if (!run_config_file.empty()) {
                PipelineConfig from_file = PipelineConfig::from_json_file(run_config_file);
                // explicit flags override the config file
                if (!*opt_data) run_cfg.dataset_root = from_file.dataset_root;
                if (!*opt_out) run_cfg.output_dir = from_file.output_dir;
                if (!*opt_train) run_cfg.train = from_file.train;
                if (!*opt_scorer) run_cfg.scorer_file = from_file.scorer_file;
                if (!*opt_model) run_cfg.color_model_file = from_file.color_model_file;
                if (!*opt_grey) run_cfg.grey_reference_file = from_file.grey_reference_file;
                if (!*opt_epochs) run_cfg.train_epochs = from_file.train_epochs;
                if (!*opt_lr) run_cfg.train_lr = from_file.train_lr;
                if (!*opt_tau) run_cfg.seg.tau = from_file.seg.tau;
                if (!*opt_kappa) run_cfg.seg.kappa = from_file.seg.kappa;
                if (!*opt_min_area) run_cfg.seg.min_area = from_file.seg.min_area;
                if (!*opt_rfg) run_cfg.seg.r_fg = from_file.seg.r_fg;
                if (!*opt_rig) run_cfg.seg.r_ig = from_file.seg.r_ig;
                if (!*opt_threshold) run_cfg.risk.threshold = from_file.risk.threshold;
                if (!*opt_crop_w) run_cfg.crop_w = from_file.crop_w;
                if (!*opt_crop_h) run_cfg.crop_h = from_file.crop_h;
                if (!*opt_k) run_cfg.k = from_file.k;
                if (!*opt_seed) run_cfg.seed = from_file.seed;
                if (!*opt_sample) run_cfg.sample_pixels = from_file.sample_pixels;
                if (!*opt_jobs) run_cfg.jobs = from_file.jobs;
                if (!*opt_save_masks) run_cfg.save_masks = from_file.save_masks;
                run_cfg.risk.red_classes = from_file.risk.red_classes;
            }
            if (run_cfg.dataset_root.empty() || run_cfg.output_dir.empty()) {
                std::fprintf(stderr, "error: run needs --data and --out (or a config file providing them)\n");
                return kExitUsage;
            }
            const PipelineResult result = run_pipeline(run_cfg, std::cerr);
            (void)result;
            std::printf("reports under %s\n", run_cfg.output_dir.string().c_str());
            return kExitOk;
        }
        if (eval_cmd->parsed()) {
            return cmd_eval(eval_pred, eval_truth);
        }
        if (report_cmd->parsed()) {
            return cmd_report(rep_hist, rep_out, rep_threshold, rep_varieties);
        }

        std::cout << app.help();
        return kExitUsage;
    } catch (const CLI::ValidationError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitUsage;
    } catch (const PipelineError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitPipeline;
    } catch (const DataError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitData;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitPipeline;
    }
}
