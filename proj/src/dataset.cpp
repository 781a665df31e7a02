#include "cranberry/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>

#include <json.hpp>

#include "cranberry/errors.hpp"
#include "cranberry/png_io.hpp"

namespace cranberry {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json load_json_file(const fs::path& file) {
    std::ifstream in(file);
    if (!in) throw DataError("cannot open '" + file.string() + "'");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw DataError("malformed JSON in '" + file.string() + "': " + e.what());
    }
    return j;
}

std::vector<fs::path> sorted_children(const fs::path& dir, bool dirs_only) {
    std::vector<fs::path> out;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (dirs_only && !entry.is_directory()) continue;
        if (!dirs_only && !entry.is_regular_file()) continue;
        out.push_back(entry.path());
    }
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace

std::vector<PointAnnotation> load_annotations(const fs::path& file) {
    json j = load_json_file(file);
    if (!j.is_array()) throw DataError("annotation file '" + file.string() + "' is not a JSON array");
    std::vector<PointAnnotation> out;
    for (const auto& item : j) {
        try {
            PointAnnotation ann;
            ann.image_id = item.at("image_id").get<std::string>();
            for (const auto& p : item.at("points")) {
                ann.points.emplace_back(p.at(0).get<int>(), p.at(1).get<int>());
            }
            out.push_back(std::move(ann));
        } catch (const json::exception& e) {
            throw DataError("malformed annotation in '" + file.string() + "': " + e.what());
        }
    }
    return out;
}

DatasetIndex load_dataset(const fs::path& root) {
    if (!fs::is_directory(root)) throw DataError("dataset root '" + root.string() + "' is not a directory");

    DatasetIndex index;
    const auto bog_dirs = sorted_children(root, true);
    for (const fs::path& bog_dir : bog_dirs) {
        const std::string bog_id = bog_dir.filename().string();
        Variety variety = Variety::MullicaQueen;
        const fs::path meta_file = bog_dir / "meta.json";
        if (fs::exists(meta_file)) {
            json m = load_json_file(meta_file);
            if (m.contains("variety")) variety = variety_from_string(m["variety"].get<std::string>());
        }

        for (const fs::path& date_dir : sorted_children(bog_dir, true)) {
            Date date;
            try {
                date = Date::parse(date_dir.filename().string());
            } catch (const DataError&) {
                index.warnings.push_back("skipping non-date directory '" + date_dir.string() + "'");
                continue;
            }

            const fs::path frames_dir = date_dir / "frames";
            if (!fs::is_directory(frames_dir)) {
                index.warnings.push_back("no frames/ directory under '" + date_dir.string() + "'");
                continue;
            }

            std::map<std::string, PointAnnotation> by_id;
            std::set<std::string> unmatched;
            const fs::path ann_file = date_dir / "annotations.json";
            if (fs::exists(ann_file)) {
                for (auto& ann : load_annotations(ann_file)) {
                    unmatched.insert(ann.image_id);
                    by_id[ann.image_id] = std::move(ann);
                }
            }

            for (const fs::path& frame : sorted_children(frames_dir, false)) {
                if (frame.extension() != ".png") continue;
                DatasetEntry entry;
                entry.frame_path = frame;
                entry.meta.bog_id = bog_id;
                entry.meta.variety = variety;
                entry.meta.date = date;
                entry.meta.source_frame = frame.filename().string();

                const std::string image_id = frame.stem().string();
                auto it = by_id.find(image_id);
                if (it != by_id.end()) {
                    auto [w, h] = read_png_dimensions(frame);
                    std::set<std::pair<int, int>> seen;
                    for (const auto& [x, y] : it->second.points) {
                        if (x < 0 || x >= w || y < 0 || y >= h) {
                            throw DataError("annotation point (" + std::to_string(x) + "," + std::to_string(y) +
                                            ") outside " + std::to_string(w) + "x" + std::to_string(h) +
                                            " bounds of image '" + image_id + "'");
                        }
                        if (!seen.insert({x, y}).second) {
                            throw DataError("duplicate annotation point (" + std::to_string(x) + "," +
                                            std::to_string(y) + ") on image '" + image_id + "'");
                        }
                    }
                    entry.annotation = it->second;
                    unmatched.erase(image_id);
                }
                index.entries.push_back(std::move(entry));
            }
            for (const auto& id : unmatched) {
                index.warnings.push_back("annotation for '" + id + "' under '" + date_dir.string() +
                                         "' matches no frame");
            }
        }
    }
    if (index.entries.empty()) index.warnings.push_back("dataset root '" + root.string() + "' holds no frames");
    return index;
}

void save_index(const DatasetIndex& index, const fs::path& file) {
    json j = json::array();
    for (const auto& e : index.entries) {
        json item{{"frame", e.frame_path.string()},
                  {"bog", e.meta.bog_id},
                  {"variety", to_string(e.meta.variety)},
                  {"date", e.meta.date.to_string()},
                  {"source_frame", e.meta.source_frame}};
        if (e.annotation) {
            json pts = json::array();
            for (const auto& [x, y] : e.annotation->points) pts.push_back({x, y});
            item["points"] = pts;
        }
        j.push_back(item);
    }
    std::ofstream out(file);
    if (!out) throw DataError("cannot write '" + file.string() + "'");
    out << j.dump(2) << "\n";
}

DatasetIndex load_index(const fs::path& file) {
    json j = load_json_file(file);
    DatasetIndex index;
    for (const auto& item : j) {
        DatasetEntry e;
        e.frame_path = item.at("frame").get<std::string>();
        e.meta.bog_id = item.at("bog").get<std::string>();
        e.meta.variety = variety_from_string(item.at("variety").get<std::string>());
        e.meta.date = Date::parse(item.at("date").get<std::string>());
        e.meta.source_frame = item.at("source_frame").get<std::string>();
        if (item.contains("points")) {
            PointAnnotation ann;
            ann.image_id = e.frame_path.stem().string();
            for (const auto& p : item["points"]) ann.points.emplace_back(p.at(0).get<int>(), p.at(1).get<int>());
            e.annotation = std::move(ann);
        }
        index.entries.push_back(std::move(e));
    }
    return index;
}

}  // namespace cranberry
