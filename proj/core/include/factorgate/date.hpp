#pragma once

#include <chrono>
#include <optional>
#include <string>
#include <string_view>

namespace factorgate {

using Date = std::chrono::sys_days;

// Strict ISO-8601 calendar date "YYYY-MM-DD".
std::optional<Date> try_parse_date(std::string_view text);
Date parse_date(std::string_view text);  // throws DataError
std::string format_date(Date d);

// ISO-8601 week, encoded as year * 100 + week (e.g. 202403).
int iso_week_key(Date d);

// Monday = 1 ... Sunday = 7.
unsigned iso_weekday(Date d);

inline Date add_days(Date d, int n) { return d + std::chrono::days{n}; }

}  // namespace factorgate
