#pragma once

#include "factorgate/market.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace factorgate {

inline constexpr int kPriceDigits = 10;

// A source row that was rejected during ingestion.
struct RowDiagnostic {
    std::size_t line = 0;  // 1-based, header is line 1
    std::string message;
};

struct DailyLoadOptions {
    double limit_ratio = kDefaultLimitRatio;
};

struct DailyLoad {
    MarketPanel panel;
    std::vector<RowDiagnostic> rejected;
};

struct MinuteLoad {
    MinutePanel minutes;
    std::vector<RowDiagnostic> rejected;
};

// Header: date,ticker,open,high,low,close,volume,prev_close[,limit_up,limit_down],is_ipo_day
// Throws DataError for a missing file, malformed header, or dates that are
// not strictly increasing within a ticker. Rows violating bar invariants
// are excluded and reported (and logged as warnings).
DailyLoad load_daily_bars(const std::filesystem::path& path, const DailyLoadOptions& options = {});

// Header: date,ticker,minute_index,price,volume
MinuteLoad load_minute_bars(const std::filesystem::path& path);

// Writes every present row, 10 significant digits, empty cells for NaN.
void save_daily_bars(const MarketPanel& panel, const std::filesystem::path& path);
void save_minute_bars(const MinutePanel& minutes, const std::filesystem::path& path);

}  // namespace factorgate
