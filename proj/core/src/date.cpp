#include "factorgate/date.hpp"

#include "factorgate/errors.hpp"

#include <cstdio>

namespace factorgate {

using namespace std::chrono;

std::optional<Date> try_parse_date(std::string_view text) {
    if (text.size() != 10 || text[4] != '-' || text[7] != '-') return std::nullopt;
    auto digits = [&](std::size_t pos, std::size_t n) -> std::optional<int> {
        int v = 0;
        for (std::size_t i = pos; i < pos + n; ++i) {
            char c = text[i];
            if (c < '0' || c > '9') return std::nullopt;
            v = v * 10 + (c - '0');
        }
        return v;
    };
    auto y = digits(0, 4);
    auto m = digits(5, 2);
    auto d = digits(8, 2);
    if (!y || !m || !d) return std::nullopt;
    year_month_day ymd{year{*y}, month{static_cast<unsigned>(*m)}, day{static_cast<unsigned>(*d)}};
    if (!ymd.ok()) return std::nullopt;
    return sys_days{ymd};
}

Date parse_date(std::string_view text) {
    auto d = try_parse_date(text);
    if (!d) throw DataError("invalid date '" + std::string(text) + "' (expected YYYY-MM-DD)");
    return *d;
}

std::string format_date(Date d) {
    year_month_day ymd{d};
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
    return buf;
}

unsigned iso_weekday(Date d) { return weekday{d}.iso_encoding(); }

int iso_week_key(Date d) {
    // The ISO year is the year containing the Thursday of this week.
    Date thursday = d + days{4 - static_cast<int>(iso_weekday(d))};
    year_month_day ymd{thursday};
    Date jan1 = sys_days{ymd.year() / January / 1};
    int week = static_cast<int>((thursday - jan1).count()) / 7 + 1;
    return static_cast<int>(ymd.year()) * 100 + week;
}

}  // namespace factorgate
