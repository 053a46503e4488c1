#include "factorgate/market.hpp"

#include "factorgate/errors.hpp"

#include <algorithm>
#include <set>

namespace factorgate {

namespace {
bool has(double v) { return !std::isnan(v); }
}  // namespace

std::optional<std::string> check_bar(const DailyBar& b) {
    for (auto [v, name] : {std::pair{b.open, "open"}, {b.high, "high"}, {b.low, "low"},
                           {b.close, "close"}, {b.prev_close, "prev_close"}}) {
        if (has(v) && !(v > 0.0)) return std::string(name) + " must be positive";
    }
    if (has(b.volume) && b.volume < 0.0) return std::string("volume must be nonnegative");
    if (has(b.low) && has(b.high) && b.low > b.high) return std::string("low > high");
    for (double v : {b.open, b.close}) {
        if (!has(v)) continue;
        if (has(b.low) && b.low > v) return std::string("low above open/close");
        if (has(b.high) && b.high < v) return std::string("high below open/close");
    }
    if (has(b.limit_down) && has(b.limit_up) && b.limit_down > b.limit_up) {
        return std::string("limit_down > limit_up");
    }
    if (has(b.limit_down) && has(b.low) && b.low < b.limit_down) return std::string("low below limit_down");
    if (has(b.limit_up) && has(b.high) && b.high > b.limit_up) return std::string("high above limit_up");
    return std::nullopt;
}

void apply_default_limits(DailyBar& bar, double limit_ratio) {
    if (!has(bar.prev_close)) return;
    if (!has(bar.limit_up)) bar.limit_up = bar.prev_close * (1.0 + limit_ratio);
    if (!has(bar.limit_down)) bar.limit_down = bar.prev_close * (1.0 - limit_ratio);
}

std::string_view field_name(Field f) {
    switch (f) {
        case Field::open: return "open";
        case Field::high: return "high";
        case Field::low: return "low";
        case Field::close: return "close";
        case Field::volume: return "volume";
        case Field::prev_close: return "prev_close";
        case Field::limit_up: return "limit_up";
        case Field::limit_down: return "limit_down";
    }
    return "?";
}

MarketPanel::MarketPanel(std::vector<Date> dates, std::vector<std::string> tickers)
    : dates_(std::move(dates)), tickers_(std::move(tickers)) {
    for (std::size_t i = 1; i < dates_.size(); ++i) {
        if (!(dates_[i - 1] < dates_[i])) throw DataError("panel date axis must be strictly increasing");
    }
    for (auto& m : fields_) m = Matrix(dates_.size(), tickers_.size());
    present_.assign(dates_.size() * tickers_.size(), 0);
    ipo_.assign(dates_.size() * tickers_.size(), 0);
}

MarketPanel MarketPanel::from_bars(std::span<const DailyBar> bars) {
    std::set<Date> date_set;
    std::set<std::string> ticker_set;
    for (const auto& b : bars) {
        date_set.insert(b.date);
        ticker_set.insert(b.ticker);
    }
    MarketPanel panel({date_set.begin(), date_set.end()}, {ticker_set.begin(), ticker_set.end()});
    for (const auto& b : bars) {
        std::size_t d = *panel.find_date(b.date);
        std::size_t t = *panel.find_ticker(b.ticker);
        if (panel.present(d, t)) continue;
        panel.set_bar(d, t, b);
    }
    return panel;
}

std::optional<std::size_t> MarketPanel::find_date(Date d) const {
    auto it = std::lower_bound(dates_.begin(), dates_.end(), d);
    if (it == dates_.end() || *it != d) return std::nullopt;
    return static_cast<std::size_t>(it - dates_.begin());
}

std::size_t MarketPanel::date_index(Date d) const {
    auto idx = find_date(d);
    if (!idx) throw DataError("date " + format_date(d) + " not in panel");
    return *idx;
}

std::optional<std::size_t> MarketPanel::find_ticker(std::string_view ticker) const {
    auto it = std::lower_bound(tickers_.begin(), tickers_.end(), ticker);
    if (it != tickers_.end() && *it == ticker) return static_cast<std::size_t>(it - tickers_.begin());
    // Tickers are sorted for panels built by from_bars; fall back to a scan otherwise.
    for (std::size_t i = 0; i < tickers_.size(); ++i) {
        if (tickers_[i] == ticker) return i;
    }
    return std::nullopt;
}

DailyBar MarketPanel::bar(std::size_t d, std::size_t t) const {
    DailyBar b;
    b.date = dates_[d];
    b.ticker = tickers_[t];
    b.open = value(Field::open, d, t);
    b.high = value(Field::high, d, t);
    b.low = value(Field::low, d, t);
    b.close = value(Field::close, d, t);
    b.volume = value(Field::volume, d, t);
    b.prev_close = value(Field::prev_close, d, t);
    b.limit_up = value(Field::limit_up, d, t);
    b.limit_down = value(Field::limit_down, d, t);
    b.is_ipo_day = is_ipo_day(d, t);
    return b;
}

void MarketPanel::set_bar(std::size_t d, std::size_t t, const DailyBar& b) {
    mutable_field(Field::open)(d, t) = b.open;
    mutable_field(Field::high)(d, t) = b.high;
    mutable_field(Field::low)(d, t) = b.low;
    mutable_field(Field::close)(d, t) = b.close;
    mutable_field(Field::volume)(d, t) = b.volume;
    mutable_field(Field::prev_close)(d, t) = b.prev_close;
    mutable_field(Field::limit_up)(d, t) = b.limit_up;
    mutable_field(Field::limit_down)(d, t) = b.limit_down;
    present_[d * tickers_.size() + t] = 1;
    ipo_[d * tickers_.size() + t] = b.is_ipo_day ? 1 : 0;
}

MarketPanel MarketPanel::head(std::size_t count) const {
    count = std::min(count, dates_.size());
    MarketPanel out(std::vector<Date>(dates_.begin(), dates_.begin() + static_cast<std::ptrdiff_t>(count)),
                    tickers_);
    for (std::size_t i = 0; i < fields_.size(); ++i) out.fields_[i] = fields_[i].slice_rows(0, count);
    std::size_t n = count * tickers_.size();
    std::copy_n(present_.begin(), n, out.present_.begin());
    std::copy_n(ipo_.begin(), n, out.ipo_.begin());
    return out;
}

bool operator==(const MarketPanel& a, const MarketPanel& b) {
    return a.dates_ == b.dates_ && a.tickers_ == b.tickers_ && a.fields_ == b.fields_ &&
           a.present_ == b.present_ && a.ipo_ == b.ipo_;
}

bool MinutePanel::insert(MinuteBar bar) {
    auto& group = groups_[{bar.date, bar.ticker}];
    auto it = std::lower_bound(group.begin(), group.end(), bar.minute_index,
                               [](const MinuteBar& m, int idx) { return m.minute_index < idx; });
    if (it != group.end() && it->minute_index == bar.minute_index) return false;
    group.insert(it, std::move(bar));
    return true;
}

std::span<const MinuteBar> MinutePanel::bars(Date date, std::string_view ticker) const {
    auto it = groups_.find({date, std::string(ticker)});
    if (it == groups_.end()) return {};
    return it->second;
}

std::size_t MinutePanel::num_bars() const {
    std::size_t n = 0;
    for (const auto& [_, g] : groups_) n += g.size();
    return n;
}

bool operator==(const MinuteBar& a, const MinuteBar& b) {
    return a.date == b.date && a.ticker == b.ticker && a.minute_index == b.minute_index &&
           a.price == b.price && a.volume == b.volume;
}

bool operator==(const MinutePanel& a, const MinutePanel& b) { return a.groups_ == b.groups_; }

}  // namespace factorgate
