#include "cranberry/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "cranberry/errors.hpp"

namespace cranberry {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string fixed6(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

std::ofstream open_out(const fs::path& file) {
    std::ofstream out(file);
    if (!out) throw DataError("cannot write '" + file.string() + "'");
    return out;
}

}  // namespace

void write_histogram_csv(const fs::path& file, const std::vector<ClassHistogram>& hists) {
    auto out = open_out(file);
    out << "bog,date,c1,c2,c3,c4,c5,count\n";
    for (const auto& h : hists) {
        out << h.bog_id << ',' << h.date.to_string();
        for (int c = 0; c < 5; ++c) out << ',' << fixed6(h.fractions[c]);
        out << ',' << h.berry_count << '\n';
    }
}

std::vector<ClassHistogram> read_histogram_csv(const fs::path& file) {
    std::ifstream in(file);
    if (!in) throw DataError("cannot open '" + file.string() + "'");
    std::vector<ClassHistogram> hists;
    std::string line;
    if (!std::getline(in, line)) throw DataError("empty histogram CSV '" + file.string() + "'");
    if (line != "bog,date,c1,c2,c3,c4,c5,count") {
        throw DataError("unexpected histogram CSV header in '" + file.string() + "'");
    }
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string field;
        std::vector<std::string> fields;
        while (std::getline(ss, field, ',')) fields.push_back(field);
        if (fields.size() != 8) throw DataError("bad histogram CSV row: '" + line + "'");
        ClassHistogram h;
        h.bog_id = fields[0];
        h.date = Date::parse(fields[1]);
        try {
            for (int c = 0; c < 5; ++c) h.fractions[c] = std::stod(fields[2 + c]);
            h.berry_count = std::stoi(fields[7]);
        } catch (const std::exception&) {
            throw DataError("non-numeric histogram CSV row: '" + line + "'");
        }
        if (h.berry_count > 0) {
            double sum = 0.0;
            for (double f : h.fractions) {
                if (f < 0.0) throw DataError("negative fraction in histogram CSV row: '" + line + "'");
                sum += f;
            }
            if (std::abs(sum - 1.0) > 1e-6) {
                throw DataError("histogram CSV fractions do not sum to 1: '" + line + "'");
            }
        }
        hists.push_back(std::move(h));
    }
    return hists;
}

void write_ripeness_csv(const fs::path& file, const std::vector<RipenessSeries>& series) {
    std::set<Date> all_dates;
    for (const auto& s : series) all_dates.insert(s.dates.begin(), s.dates.end());

    auto out = open_out(file);
    out << "bog";
    for (const auto& d : all_dates) out << ',' << d.to_string();
    out << '\n';
    for (const auto& s : series) {
        out << s.bog_id;
        for (const auto& d : all_dates) {
            out << ',';
            const auto it = std::find(s.dates.begin(), s.dates.end(), d);
            if (it != s.dates.end()) out << fixed6(s.ratios[it - s.dates.begin()]);
        }
        out << '\n';
    }
}

void write_risk_json(const fs::path& file, const std::vector<RipenessSeries>& series, const RiskConfig& cfg) {
    json j = json::array();
    for (const auto& s : series) {
        const auto risk = first_risk_date(s, cfg);
        j.push_back({{"bog", s.bog_id},
                     {"variety", to_string(s.variety)},
                     {"first_risk_date", risk ? json(risk->to_string()) : json(nullptr)},
                     {"threshold", cfg.threshold}});
    }
    auto out = open_out(file);
    out << j.dump(2) << "\n";
}

void write_albedo_svg(const fs::path& file, const std::string& bog_id,
                      const std::vector<ClassHistogram>& bog_hists) {
    static const char* kClassColors[5] = {"#73a148", "#a29338", "#b86a38", "#b84330", "#9e1f1f"};
    const int panel_w = 120, panel_h = 100, bar_w = 18, gap = 4, top = 30, bottom = 24;
    const int width = static_cast<int>(bog_hists.size()) * (panel_w + gap) + gap;
    const int height = top + panel_h + bottom;

    auto out = open_out(file);
    out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
        << "\" viewBox=\"0 0 " << width << ' ' << height << "\">\n";
    out << "  <text x=\"" << gap << "\" y=\"18\" font-family=\"sans-serif\" font-size=\"14\">bog "
        << bog_id << "</text>\n";

    int px = gap;
    for (const auto& h : bog_hists) {
        out << "  <g class=\"panel\" data-date=\"" << h.date.to_string() << "\">\n";
        out << "    <line x1=\"" << px << "\" y1=\"" << top + panel_h << "\" x2=\"" << px + panel_w
            << "\" y2=\"" << top + panel_h << "\" stroke=\"#444\" stroke-width=\"1\"/>\n";
        for (int c = 0; c < 5; ++c) {
            const int bh = static_cast<int>(h.fractions[c] * panel_h + 0.5);
            const int bx = px + 6 + c * (bar_w + 4);
            out << "    <rect class=\"bar\" x=\"" << bx << "\" y=\"" << top + panel_h - bh
                << "\" width=\"" << bar_w << "\" height=\"" << bh << "\" fill=\"" << kClassColors[c]
                << "\"/>\n";
        }
        out << "    <text x=\"" << px + 6 << "\" y=\"" << top + panel_h + 16
            << "\" font-family=\"sans-serif\" font-size=\"10\">" << h.date.to_string() << " (n="
            << h.berry_count << ")</text>\n";
        out << "  </g>\n";
        px += panel_w + gap;
    }
    out << "</svg>\n";
}

uint64_t fnv1a(const void* data, std::size_t size, uint64_t h) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < size; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

uint64_t fnv1a_string(const std::string& s) { return fnv1a(s.data(), s.size()); }

uint64_t fnv1a_file(const fs::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw DataError("cannot open '" + file.string() + "'");
    uint64_t h = 0xcbf29ce484222325ULL;
    char buf[1 << 16];
    while (in.read(buf, sizeof buf) || in.gcount() > 0) {
        h = fnv1a(buf, static_cast<std::size_t>(in.gcount()), h);
    }
    return h;
}

void write_manifest(const fs::path& file, const std::string& config_json,
                    const std::vector<ManifestInput>& inputs) {
    char hex[32];
    json j;
    j["tool"] = "cranberry";
    j["version"] = kVersion;
    j["config"] = json::parse(config_json);
    std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(fnv1a_string(config_json)));
    j["config_hash"] = hex;

    uint64_t combined = fnv1a_string(config_json);
    j["inputs"] = json::array();
    for (const auto& input : inputs) {
        std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(input.hash));
        j["inputs"].push_back({{"path", input.path}, {"bytes", input.bytes}, {"hash", hex}});
        combined = fnv1a(&input.hash, sizeof input.hash, combined);
        combined = fnv1a(input.path.data(), input.path.size(), combined);
    }
    std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(combined));
    j["run_hash"] = hex;

    auto out = open_out(file);
    out << j.dump(2) << "\n";
}

}  // namespace cranberry
