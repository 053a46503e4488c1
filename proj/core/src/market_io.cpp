#include "factorgate/market_io.hpp"

#include "factorgate/csv.hpp"
#include "factorgate/errors.hpp"
#include "factorgate/log.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <unordered_map>

namespace factorgate {

namespace {

std::ifstream open_input(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw DataError("file not found: " + path.string());
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());
    return in;
}

std::ofstream open_output(const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    return out;
}

// Maps header names to column positions; rejects unknown or missing columns.
std::unordered_map<std::string, std::size_t> read_header(std::istream& in, const std::filesystem::path& path,
                                                         const std::vector<std::string>& required,
                                                         const std::vector<std::string>& optional) {
    std::string line;
    if (!csv::read_line(in, line)) throw DataError("empty file: " + path.string());
    std::unordered_map<std::string, std::size_t> cols;
    auto cells = csv::split_line(line);
    for (std::size_t i = 0; i < cells.size(); ++i) {
        std::string name(csv::trim(cells[i]));
        bool known = std::find(required.begin(), required.end(), name) != required.end() ||
                     std::find(optional.begin(), optional.end(), name) != optional.end();
        if (!known) throw DataError("malformed header in " + path.string() + ": unknown column '" + name + "'");
        if (!cols.emplace(name, i).second) {
            throw DataError("malformed header in " + path.string() + ": duplicate column '" + name + "'");
        }
    }
    for (const auto& r : required) {
        if (!cols.count(r)) throw DataError("malformed header in " + path.string() + ": missing column '" + r + "'");
    }
    return cols;
}

void reject(std::vector<RowDiagnostic>& out, const std::filesystem::path& path, std::size_t line, std::string msg) {
    log::warn(path.filename().string() + ":" + std::to_string(line) + ": row rejected: " + msg);
    out.push_back({line, std::move(msg)});
}

}  // namespace

DailyLoad load_daily_bars(const std::filesystem::path& path, const DailyLoadOptions& options) {
    auto in = open_input(path);
    const std::vector<std::string> required{"date",  "ticker", "open",       "high",      "low",
                                            "close", "volume", "prev_close", "is_ipo_day"};
    const std::vector<std::string> optional{"limit_up", "limit_down"};
    auto cols = read_header(in, path, required, optional);

    DailyLoad result;
    std::vector<DailyBar> bars;
    std::map<std::string, Date> last_date;
    std::string line;
    std::size_t line_no = 1;
    while (csv::read_line(in, line)) {
        ++line_no;
        if (csv::trim(line).empty()) continue;
        auto cells = csv::split_line(line);
        if (cells.size() != cols.size()) {
            reject(result.rejected, path, line_no, "expected " + std::to_string(cols.size()) + " cells");
            continue;
        }
        auto cell = [&](const std::string& name) -> std::string_view {
            auto it = cols.find(name);
            return it == cols.end() ? std::string_view{} : std::string_view(cells[it->second]);
        };
        DailyBar bar;
        auto date = try_parse_date(csv::trim(cell("date")));
        if (!date) {
            reject(result.rejected, path, line_no, "bad date");
            continue;
        }
        bar.date = *date;
        bar.ticker = std::string(csv::trim(cell("ticker")));
        if (bar.ticker.empty()) {
            reject(result.rejected, path, line_no, "empty ticker");
            continue;
        }
        bool numeric_ok = true;
        auto num = [&](const char* name, double& dst) {
            auto v = csv::parse_number(cell(name));
            if (!v) numeric_ok = false;
            else dst = *v;
        };
        num("open", bar.open);
        num("high", bar.high);
        num("low", bar.low);
        num("close", bar.close);
        num("volume", bar.volume);
        num("prev_close", bar.prev_close);
        num("limit_up", bar.limit_up);
        num("limit_down", bar.limit_down);
        auto ipo = csv::trim(cell("is_ipo_day"));
        if (ipo == "1") bar.is_ipo_day = true;
        else if (ipo == "0" || ipo.empty()) bar.is_ipo_day = false;
        else numeric_ok = false;
        if (!numeric_ok) {
            reject(result.rejected, path, line_no, "non-numeric cell");
            continue;
        }

        auto [it, inserted] = last_date.try_emplace(bar.ticker, bar.date);
        if (!inserted) {
            if (!(it->second < bar.date)) {
                throw DataError(path.string() + ":" + std::to_string(line_no) + ": dates for ticker " + bar.ticker +
                                " are not strictly increasing (" + format_date(bar.date) + " after " +
                                format_date(it->second) + ")");
            }
            it->second = bar.date;
        }

        apply_default_limits(bar, options.limit_ratio);
        if (auto violation = check_bar(bar)) {
            reject(result.rejected, path, line_no, *violation);
            continue;
        }
        bars.push_back(std::move(bar));
    }
    result.panel = MarketPanel::from_bars(bars);
    return result;
}

MinuteLoad load_minute_bars(const std::filesystem::path& path) {
    auto in = open_input(path);
    auto cols = read_header(in, path, {"date", "ticker", "minute_index", "price", "volume"}, {});
    MinuteLoad result;
    std::string line;
    std::size_t line_no = 1;
    while (csv::read_line(in, line)) {
        ++line_no;
        if (csv::trim(line).empty()) continue;
        auto cells = csv::split_line(line);
        if (cells.size() != cols.size()) {
            reject(result.rejected, path, line_no, "expected " + std::to_string(cols.size()) + " cells");
            continue;
        }
        MinuteBar bar;
        auto date = try_parse_date(csv::trim(cells[cols["date"]]));
        auto idx = csv::parse_number(cells[cols["minute_index"]]);
        auto price = csv::parse_number(cells[cols["price"]]);
        auto volume = csv::parse_number(cells[cols["volume"]]);
        if (!date || !idx || !price || !volume || std::isnan(*idx) || std::isnan(*price) || std::isnan(*volume)) {
            reject(result.rejected, path, line_no, "malformed minute row");
            continue;
        }
        if (*idx != std::floor(*idx) || *idx < 1 || *idx > kExecutionWindowMinutes) {
            reject(result.rejected, path, line_no,
                   "minute_index " + csv::format_number(*idx, 6) + " outside 1.." +
                       std::to_string(kExecutionWindowMinutes));
            continue;
        }
        if (!(*price > 0.0) || *volume < 0.0) {
            reject(result.rejected, path, line_no, "price must be positive and volume nonnegative");
            continue;
        }
        bar.date = *date;
        bar.ticker = std::string(csv::trim(cells[cols["ticker"]]));
        bar.minute_index = static_cast<int>(*idx);
        bar.price = *price;
        bar.volume = *volume;
        if (!result.minutes.insert(bar)) {
            reject(result.rejected, path, line_no,
                   "duplicate minute_index " + std::to_string(bar.minute_index) + " for " + bar.ticker + " on " +
                       format_date(bar.date));
        }
    }
    return result;
}

void save_daily_bars(const MarketPanel& panel, const std::filesystem::path& path) {
    auto out = open_output(path);
    out << "date,ticker,open,high,low,close,volume,prev_close,limit_up,limit_down,is_ipo_day\n";
    for (std::size_t d = 0; d < panel.num_dates(); ++d) {
        std::string date = format_date(panel.dates()[d]);
        for (std::size_t t = 0; t < panel.num_tickers(); ++t) {
            if (!panel.present(d, t)) continue;
            out << date << ',' << csv::escape(panel.tickers()[t]);
            for (Field f : kAllFields) out << ',' << csv::format_number(panel.value(f, d, t), kPriceDigits);
            out << ',' << (panel.is_ipo_day(d, t) ? 1 : 0) << '\n';
        }
    }
}

void save_minute_bars(const MinutePanel& minutes, const std::filesystem::path& path) {
    auto out = open_output(path);
    out << "date,ticker,minute_index,price,volume\n";
    for (const auto& [key, group] : minutes.groups()) {
        for (const auto& m : group) {
            out << format_date(m.date) << ',' << csv::escape(m.ticker) << ',' << m.minute_index << ','
                << csv::format_number(m.price, kPriceDigits) << ',' << csv::format_number(m.volume, kPriceDigits)
                << '\n';
        }
    }
}

}  // namespace factorgate
