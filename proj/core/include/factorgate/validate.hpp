#pragma once

#include "factorgate/market.hpp"

#include <map>
#include <string>
#include <vector>

namespace factorgate {

enum class CalendarMode {
    panel_dates,  // trading days are exactly the dates present; never reports gaps
    strict,       // every calendar day between first and last date is expected
};

struct Violation {
    Date date{};
    std::string ticker;
    std::string message;
};

struct MissingCell {
    Date date{};
    std::string ticker;
    Field field{};
};

struct ValidationReport {
    std::vector<Violation> violations;
    std::vector<MissingCell> missing;            // NaN cells inside present rows
    std::map<std::string, double> missing_density;  // per field, over all date x ticker cells
    std::vector<Date> gaps;                      // expected but absent dates

    bool clean() const { return violations.empty() && missing.empty() && gaps.empty(); }
};

ValidationReport validate_panel(const MarketPanel& panel, CalendarMode mode = CalendarMode::panel_dates);

}  // namespace factorgate
