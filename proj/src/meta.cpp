#include "cranberry/meta.hpp"

#include <cstdio>

#include "cranberry/errors.hpp"

namespace cranberry {

const char* to_string(Variety v) {
    switch (v) {
        case Variety::MullicaQueen: return "MullicaQueen";
        case Variety::Stevens: return "Stevens";
        case Variety::CrimsonQueen: return "CrimsonQueen";
        case Variety::Haines: return "Haines";
    }
    return "MullicaQueen";
}

Variety variety_from_string(const std::string& s) {
    if (s == "MullicaQueen") return Variety::MullicaQueen;
    if (s == "Stevens") return Variety::Stevens;
    if (s == "CrimsonQueen") return Variety::CrimsonQueen;
    if (s == "Haines") return Variety::Haines;
    throw DataError("unknown variety: " + s);
}

namespace {

bool leap(int y) { return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0; }

int days_in_month(int y, int m) {
    static const int d[12] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
    if (m == 2 && leap(y)) return 29;
    return d[m - 1];
}

}  // namespace

Date Date::parse(const std::string& iso) {
    Date out;
    char sep1 = 0, sep2 = 0;
    if (std::sscanf(iso.c_str(), "%d%c%d%c%d", &out.year, &sep1, &out.month, &sep2, &out.day) != 5 ||
        sep1 != '-' || sep2 != '-' || iso.size() != 10) {
        throw DataError("date not ISO-8601 (YYYY-MM-DD): '" + iso + "'");
    }
    if (out.month < 1 || out.month > 12 || out.day < 1 || out.day > days_in_month(out.year, out.month)) {
        throw DataError("invalid calendar date: '" + iso + "'");
    }
    return out;
}

std::string Date::to_string() const {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02d-%02d", year, month, day);
    return buf;
}

long Date::day_number() const {
    // days-from-civil, Gregorian, epoch 1970-01-01
    int y = year - (month <= 2);
    const int era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153u * (month + (month > 2 ? -3 : 9)) + 2u) / 5u + day - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097L + static_cast<long>(doe) - 719468L;
}

}  // namespace cranberry
