#pragma once

#include <compare>
#include <string>

namespace cranberry {

enum class Variety { MullicaQueen, Stevens, CrimsonQueen, Haines };

const char* to_string(Variety v);
Variety variety_from_string(const std::string& s);

// Calendar date, parsed from ISO-8601 (YYYY-MM-DD) directory names.
struct Date {
    int year = 0;
    int month = 0;
    int day = 0;

    static Date parse(const std::string& iso);
    std::string to_string() const;

    // Days since 1970-01-01; used for day-offset arithmetic between collections.
    long day_number() const;

    auto operator<=>(const Date&) const = default;
};

struct CaptureMeta {
    std::string bog_id;
    Variety variety = Variety::MullicaQueen;
    Date date;
    std::string source_frame;
};

}  // namespace cranberry
