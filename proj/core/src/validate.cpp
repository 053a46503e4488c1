#include "factorgate/validate.hpp"

namespace factorgate {

ValidationReport validate_panel(const MarketPanel& panel, CalendarMode mode) {
    ValidationReport report;
    const std::size_t cells = panel.num_dates() * panel.num_tickers();
    std::map<Field, std::size_t> missing_count;
    for (std::size_t d = 0; d < panel.num_dates(); ++d) {
        for (std::size_t t = 0; t < panel.num_tickers(); ++t) {
            if (!panel.present(d, t)) {
                for (Field f : kAllFields) ++missing_count[f];
                continue;
            }
            DailyBar bar = panel.bar(d, t);
            if (auto v = check_bar(bar)) report.violations.push_back({bar.date, bar.ticker, *v});
            for (Field f : kAllFields) {
                if (is_missing(panel.value(f, d, t))) {
                    ++missing_count[f];
                    report.missing.push_back({bar.date, bar.ticker, f});
                }
            }
        }
    }
    for (Field f : kAllFields) {
        report.missing_density[std::string(field_name(f))] =
            cells == 0 ? 0.0 : static_cast<double>(missing_count[f]) / static_cast<double>(cells);
    }
    if (mode == CalendarMode::strict) {
        const auto& dates = panel.dates();
        for (std::size_t i = 1; i < dates.size(); ++i) {
            for (Date d = add_days(dates[i - 1], 1); d < dates[i]; d = add_days(d, 1)) report.gaps.push_back(d);
        }
    }
    return report;
}

}  // namespace factorgate
