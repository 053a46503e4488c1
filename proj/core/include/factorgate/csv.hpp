#pragma once

#include <cstddef>
#include <istream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace factorgate::csv {

// Splits one RFC-4180 style line (double quotes, "" escapes). Embedded
// newlines inside quoted fields are not supported.
std::vector<std::string> split_line(std::string_view line);

// Quotes a field if it contains a comma, quote, or newline.
std::string escape(std::string_view field);

std::string_view trim(std::string_view s);

// Parses a numeric cell; empty cell -> NaN. Returns nullopt on garbage.
std::optional<double> parse_number(std::string_view cell);

// Formats with `digits` significant digits (%.{digits}g); NaN -> empty cell.
std::string format_number(double v, int digits);

// Reads lines, strips a trailing '\r'.
bool read_line(std::istream& in, std::string& line);

// Rounds to `digits` significant digits via a decimal text round-trip.
double round_significant(double v, int digits);

}  // namespace factorgate::csv
