#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cranberry/color_classes.hpp"
#include "cranberry/meta.hpp"

namespace cranberry {

struct RiskConfig {
    double threshold = 0.6;            // ripeness ratio marking high overheating risk
    std::vector<int> red_classes{4, 5};
};

// Per-bog time series: red fractions per date and their ratio to the final
// date's red fraction. Ratios may exceed 1 before the final collection.
struct RipenessSeries {
    std::string bog_id;
    Variety variety = Variety::MullicaQueen;
    std::vector<Date> dates;
    std::vector<double> red_fractions;
    std::vector<double> ratios;
    std::vector<Date> risk_dates;  // dates with ratio >= threshold
};

// Sum of the histogram fractions over the configured red classes.
double red_fraction(const ClassHistogram& hist, const RiskConfig& cfg);

// Requires >= 2 strictly increasing dates from one bog and a positive
// final-date red fraction (the ratio is undefined otherwise).
RipenessSeries ripeness_series(const std::vector<ClassHistogram>& hists, const RiskConfig& cfg,
                               Variety variety = Variety::MullicaQueen);

std::optional<Date> first_risk_date(const RipenessSeries& series, const RiskConfig& cfg);

struct VarietyRanking {
    Variety variety;
    double mean_first_risk_offset_days = 0.0;  // days from each series' first date
    int series_count = 0;
};

// Varieties ordered fastest-ripening first (ascending mean first-risk
// offset); ties break alphabetically. Varieties that never cross the
// threshold are excluded with a warning.
std::vector<VarietyRanking> variety_comparison(const std::vector<RipenessSeries>& all_series,
                                               const RiskConfig& cfg,
                                               std::vector<std::string>* warnings = nullptr);

}  // namespace cranberry
