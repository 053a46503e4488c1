#pragma once

#include "factorgate/date.hpp"
#include "factorgate/matrix.hpp"

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace factorgate {

inline constexpr double kDefaultLimitRatio = 0.10;
inline constexpr int kExecutionWindowMinutes = 30;

struct DailyBar {
    Date date{};
    std::string ticker;
    double open = kMissing;
    double high = kMissing;
    double low = kMissing;
    double close = kMissing;
    double volume = kMissing;
    double prev_close = kMissing;
    double limit_up = kMissing;
    double limit_down = kMissing;
    bool is_ipo_day = false;
};

// Returns a description of the first violated bar invariant, if any.
// Missing fields are skipped.
std::optional<std::string> check_bar(const DailyBar& bar);

// Fills absent limit prices from prev_close * (1 +/- ratio).
void apply_default_limits(DailyBar& bar, double limit_ratio = kDefaultLimitRatio);

struct MinuteBar {
    Date date{};
    std::string ticker;
    int minute_index = 0;  // 1..30 maps to 09:31..10:00
    double price = kMissing;
    double volume = 0.0;
};

enum class Field : std::uint8_t { open, high, low, close, volume, prev_close, limit_up, limit_down };
inline constexpr std::array<Field, 8> kAllFields{Field::open,       Field::high,     Field::low,
                                                 Field::close,      Field::volume,   Field::prev_close,
                                                 Field::limit_up,   Field::limit_down};
std::string_view field_name(Field f);

// Date x ticker panel of daily observations. A cell with no source row has
// present() == false and every field missing; individual empty cells in a
// present row are NaN in that field only.
class MarketPanel {
public:
    MarketPanel() = default;
    MarketPanel(std::vector<Date> dates, std::vector<std::string> tickers);

    // Builds a panel from bars. Dates and tickers are sorted; duplicate
    // (date, ticker) keys keep the first bar.
    static MarketPanel from_bars(std::span<const DailyBar> bars);

    const std::vector<Date>& dates() const { return dates_; }
    const std::vector<std::string>& tickers() const { return tickers_; }
    std::size_t num_dates() const { return dates_.size(); }
    std::size_t num_tickers() const { return tickers_.size(); }

    std::optional<std::size_t> find_date(Date d) const;
    std::size_t date_index(Date d) const;  // throws DataError when absent
    std::optional<std::size_t> find_ticker(std::string_view ticker) const;

    const Matrix& field(Field f) const { return fields_[static_cast<std::size_t>(f)]; }
    Matrix& mutable_field(Field f) { return fields_[static_cast<std::size_t>(f)]; }
    double value(Field f, std::size_t d, std::size_t t) const { return field(f)(d, t); }

    bool present(std::size_t d, std::size_t t) const { return present_[d * tickers_.size() + t] != 0; }
    bool is_ipo_day(std::size_t d, std::size_t t) const { return ipo_[d * tickers_.size() + t] != 0; }

    DailyBar bar(std::size_t d, std::size_t t) const;
    void set_bar(std::size_t d, std::size_t t, const DailyBar& bar);

    // First `count` dates.
    MarketPanel head(std::size_t count) const;

    friend bool operator==(const MarketPanel& a, const MarketPanel& b);

private:
    std::vector<Date> dates_;
    std::vector<std::string> tickers_;
    std::array<Matrix, kAllFields.size()> fields_;
    std::vector<std::uint8_t> present_;
    std::vector<std::uint8_t> ipo_;
};

// Minute bars grouped by (date, ticker), each group sorted by minute_index.
class MinutePanel {
public:
    using Key = std::pair<Date, std::string>;

    // False (and nothing stored) if (date, ticker, minute_index) already exists.
    bool insert(MinuteBar bar);

    std::span<const MinuteBar> bars(Date date, std::string_view ticker) const;
    std::size_t num_groups() const { return groups_.size(); }
    std::size_t num_bars() const;
    const std::map<Key, std::vector<MinuteBar>>& groups() const { return groups_; }

    friend bool operator==(const MinutePanel& a, const MinutePanel& b);

private:
    std::map<Key, std::vector<MinuteBar>> groups_;
};

bool operator==(const MinuteBar& a, const MinuteBar& b);

}  // namespace factorgate
