#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cranberry/meta.hpp"

namespace cranberry {

// One click per berry instance; the only supervision signal.
struct PointAnnotation {
    std::string image_id;
    std::vector<std::pair<int, int>> points;
};

struct DatasetEntry {
    std::filesystem::path frame_path;
    CaptureMeta meta;
    std::optional<PointAnnotation> annotation;  // absent = unlabeled frame
};

struct DatasetIndex {
    std::vector<DatasetEntry> entries;
    std::vector<std::string> warnings;
};

// Walks root/<bog_id>/<date>/frames/*.png with sibling annotations.json and
// optional per-bog meta.json ({"variety": ...}). Entries are ordered
// lexicographically by bog, date, filename. Missing root is fatal; a
// malformed annotation file or an out-of-bounds/duplicate point raises a
// DataError naming the offending file or image.
DatasetIndex load_dataset(const std::filesystem::path& root);

// Parses the annotations.json schema: [{"image_id": str, "points": [[x,y],...]}].
std::vector<PointAnnotation> load_annotations(const std::filesystem::path& file);

// Index cache (JSON) so repeat runs can skip the directory walk.
void save_index(const DatasetIndex& index, const std::filesystem::path& file);
DatasetIndex load_index(const std::filesystem::path& file);

}  // namespace cranberry
