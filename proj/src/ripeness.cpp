#include "cranberry/ripeness.hpp"

#include <algorithm>
#include <cstring>
#include <map>

#include "cranberry/errors.hpp"

namespace cranberry {

double red_fraction(const ClassHistogram& hist, const RiskConfig& cfg) {
    double sum = 0.0;
    for (int cls : cfg.red_classes) {
        if (cls < 1 || cls > 5) throw DataError("red class outside 1..5");
        sum += hist.fractions[cls - 1];
    }
    return sum;
}

RipenessSeries ripeness_series(const std::vector<ClassHistogram>& hists, const RiskConfig& cfg,
                               Variety variety) {
    if (cfg.threshold <= 0.0 || cfg.threshold > 1.5) throw DataError("risk threshold must lie in (0, 1.5]");
    if (hists.size() < 2) throw DataError("ripeness series needs at least two dates");

    RipenessSeries series;
    series.bog_id = hists.front().bog_id;
    series.variety = variety;
    for (const auto& h : hists) {
        if (h.bog_id != series.bog_id) throw DataError("ripeness series spans more than one bog");
        if (!series.dates.empty() && !(series.dates.back() < h.date)) {
            throw DataError("ripeness series dates not strictly increasing");
        }
        series.dates.push_back(h.date);
        series.red_fractions.push_back(red_fraction(h, cfg));
    }

    const double final_red = series.red_fractions.back();
    if (final_red <= 0.0) {
        throw DataError("undefined ratio: final-date red fraction is zero for bog '" + series.bog_id + "'");
    }
    for (std::size_t i = 0; i < series.red_fractions.size(); ++i) {
        series.ratios.push_back(series.red_fractions[i] / final_red);
        if (series.ratios.back() >= cfg.threshold) series.risk_dates.push_back(series.dates[i]);
    }
    return series;
}

std::optional<Date> first_risk_date(const RipenessSeries& series, const RiskConfig& cfg) {
    for (std::size_t i = 0; i < series.ratios.size(); ++i) {
        if (series.ratios[i] >= cfg.threshold) return series.dates[i];
    }
    return std::nullopt;
}

std::vector<VarietyRanking> variety_comparison(const std::vector<RipenessSeries>& all_series,
                                               const RiskConfig& cfg,
                                               std::vector<std::string>* warnings) {
    std::map<Variety, std::pair<double, int>> sums;  // variety -> (offset sum, count)
    for (const auto& series : all_series) {
        const auto risk = first_risk_date(series, cfg);
        if (!risk) {
            if (warnings) {
                warnings->push_back("bog '" + series.bog_id + "' (" + to_string(series.variety) +
                                    ") never crosses the risk threshold; excluded");
            }
            continue;
        }
        const double offset = static_cast<double>(risk->day_number() - series.dates.front().day_number());
        auto& [sum, count] = sums[series.variety];
        sum += offset;
        ++count;
    }

    std::vector<VarietyRanking> ranking;
    for (const auto& [variety, acc] : sums) {
        ranking.push_back({variety, acc.first / acc.second, acc.second});
    }
    std::sort(ranking.begin(), ranking.end(), [](const VarietyRanking& a, const VarietyRanking& b) {
        if (a.mean_first_risk_offset_days != b.mean_first_risk_offset_days) {
            return a.mean_first_risk_offset_days < b.mean_first_risk_offset_days;
        }
        return std::strcmp(to_string(a.variety), to_string(b.variety)) < 0;
    });
    return ranking;
}

}  // namespace cranberry
