#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "cranberry/color_classes.hpp"
#include "cranberry/ripeness.hpp"

namespace cranberry {

inline constexpr const char* kVersion = "0.1.0";

// rows: bog,date,c1,c2,c3,c4,c5,count
void write_histogram_csv(const std::filesystem::path& file, const std::vector<ClassHistogram>& hists);
std::vector<ClassHistogram> read_histogram_csv(const std::filesystem::path& file);

// Ripeness-table shape: header bog,<date...>, one ratio row per bog.
void write_ripeness_csv(const std::filesystem::path& file, const std::vector<RipenessSeries>& series);

// [{bog, variety, first_risk_date, threshold}, ...]
void write_risk_json(const std::filesystem::path& file, const std::vector<RipenessSeries>& series,
                     const RiskConfig& cfg);

// One grid per bog: a panel per date, five class bars per panel.
void write_albedo_svg(const std::filesystem::path& file, const std::string& bog_id,
                      const std::vector<ClassHistogram>& bog_hists);

uint64_t fnv1a(const void* data, std::size_t size, uint64_t h = 0xcbf29ce484222325ULL);
uint64_t fnv1a_string(const std::string& s);
uint64_t fnv1a_file(const std::filesystem::path& file);

struct ManifestInput {
    std::string path;  // relative to the dataset root
    std::uintmax_t bytes = 0;
    uint64_t hash = 0;
};

// Run provenance: tool version, canonical config, and input content hashes.
// The run hash changes exactly when the config or an input changes.
void write_manifest(const std::filesystem::path& file, const std::string& config_json,
                    const std::vector<ManifestInput>& inputs);

}  // namespace cranberry
