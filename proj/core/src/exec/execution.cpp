#include "factorgate/exec/execution.hpp"

#include "factorgate/errors.hpp"
#include "factorgate/log.hpp"
#include "factorgate/stats.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

namespace factorgate::exec {

namespace {

constexpr double kDust = 1e-12;

struct Quote {
    double price = kMissing;
    std::string reason;  // non-empty when there is no usable price
    double limit_up = kMissing;
    double limit_down = kMissing;
    bool ipo = false;
};

Quote quote(const DayView& day, const std::string& ticker, const ExecutionConfig& config) {
    Quote q;
    auto ti = day.panel.find_ticker(ticker);
    if (!ti || !day.panel.present(day.date_index, *ti)) {
        q.reason = "no_data";
        return q;
    }
    const std::size_t d = day.date_index, i = *ti;
    q.limit_up = day.panel.value(Field::limit_up, d, i);
    q.limit_down = day.panel.value(Field::limit_down, d, i);
    q.ipo = day.panel.is_ipo_day(d, i);
    if (day.price_mode == PriceMode::close) {
        q.price = day.panel.value(Field::close, d, i);
        if (is_missing(q.price)) q.reason = "no_data";
        return q;
    }
    if (!day.minutes) throw ConfigError("vwap price mode requires minute bars");
    auto bars = day.minutes->bars(day.panel.dates()[d], ticker);
    std::vector<MinuteBar> window;
    for (const auto& b : bars) {
        if (b.minute_index >= 1 && b.minute_index <= config.vwap_window) window.push_back(b);
    }
    try {
        q.price = compute_vwap(window);
    } catch (const NoLiquidity&) {
        q.reason = "no_liquidity";
    }
    return q;
}

bool at_limit_up(const Quote& q) { return !is_missing(q.limit_up) && q.price >= q.limit_up; }
bool at_limit_down(const Quote& q) { return !is_missing(q.limit_down) && q.price <= q.limit_down; }

Trade make_trade(const DayView& day, int slot, const std::string& ticker, Side side) {
    Trade t;
    t.date = day.panel.dates()[day.date_index];
    t.slot = slot;
    t.ticker = ticker;
    t.side = side;
    return t;
}

// Sells `shares` of `ticker` if allowed. Returns true when executed.
bool try_sell(SlotPortfolio& s, const std::string& ticker, double shares, const DayView& day,
              const ExecutionConfig& config, std::vector<Trade>& trades) {
    Trade t = make_trade(day, s.slot_id, ticker, Side::sell);
    t.shares = shares;
    Quote q = quote(day, ticker, config);
    t.price = q.price;
    if (!q.reason.empty()) {
        t.rejection = q.reason;
    } else if (q.ipo) {
        t.rejection = "ipo_day";
    } else if (at_limit_down(q)) {
        t.rejection = "limit_down";
    }
    if (!t.rejection.empty()) {
        log::debug("sell " + ticker + " deferred: " + t.rejection);
        trades.push_back(std::move(t));
        return false;
    }
    double notional = shares * q.price;
    t.fee = notional * config.fee_rate;
    s.cash += notional - t.fee;
    auto it = s.holdings.find(ticker);
    it->second -= shares;
    if (it->second <= kDust) {
        s.holdings.erase(it);
        s.last_price.erase(ticker);
    } else {
        s.last_price[ticker] = q.price;
    }
    trades.push_back(std::move(t));
    return true;
}

}  // namespace

void ExecutionConfig::validate() const {
    if (holding_days < 1) throw ConfigError("holding period H must be >= 1");
    if (top_n < 1) throw ConfigError("top_n must be >= 1");
    if (!(fee_rate >= 0.0 && fee_rate < 0.05)) throw ConfigError("fee_rate must be in [0, 0.05)");
    if (vwap_window < 1 || vwap_window > kExecutionWindowMinutes) throw ConfigError("vwap_window must be in 1..30");
    if (!(initial_capital > 0.0)) throw ConfigError("initial capital must be positive");
}

std::size_t slot_index(std::size_t t, std::size_t holding_days) {
    if (holding_days == 0) throw ConfigError("holding period H must be >= 1");
    return t % holding_days;
}

double compute_vwap(std::span<const MinuteBar> bars) {
    double pv = 0.0, v = 0.0;
    for (const auto& b : bars) {
        if (b.minute_index < 1 || b.minute_index > kExecutionWindowMinutes) continue;
        if (!(b.volume > 0.0) || is_missing(b.price)) continue;
        pv += b.price * b.volume;
        v += b.volume;
    }
    if (!(v > 0.0)) throw NoLiquidity("zero volume in the execution window");
    return pv / v;
}

double SlotPortfolio::value() const {
    double v = cash;
    for (const auto& [ticker, shares] : holdings) {
        auto it = last_price.find(ticker);
        if (it != last_price.end()) v += shares * it->second;
    }
    return v;
}

SlotPortfolio rebalance_slot(const SlotPortfolio& slot, std::span<const std::string> targets_in, const DayView& day,
                             const ExecutionConfig& config, std::vector<Trade>& trades) {
    SlotPortfolio s = slot;
    s.last_rebalance = day.panel.dates()[day.date_index];

    std::vector<std::string> targets;
    for (const auto& t : targets_in) {
        if (std::find(targets.begin(), targets.end(), t) == targets.end()) targets.push_back(t);
    }
    std::set<std::string> target_set(targets.begin(), targets.end());

    if (config.hold_if_unchanged && !targets.empty()) {
        std::set<std::string> held;
        for (const auto& [t, sh] : s.holdings) held.insert(t);
        if (held == target_set) return s;
    }

    // Phase 1: exit everything outside the target set.
    s.deferred.clear();
    std::vector<std::string> exits;
    for (const auto& [ticker, shares] : s.holdings) {
        if (!target_set.count(ticker)) exits.push_back(ticker);
    }
    for (const auto& ticker : exits) {
        double shares = s.holdings.at(ticker);
        if (!try_sell(s, ticker, shares, day, config, trades)) s.deferred.push_back(ticker);
    }
    if (targets.empty()) return s;

    // Phase 2: equal-weight the targets over cash plus held target value.
    std::map<std::string, Quote> quotes;
    double investable = s.cash;
    for (const auto& t : targets) {
        Quote q = quote(day, t, config);
        quotes[t] = q;
        auto h = s.holdings.find(t);
        if (h == s.holdings.end()) continue;
        double mark = q.reason.empty() ? q.price : s.last_price.count(t) ? s.last_price.at(t) : 0.0;
        investable += h->second * mark;
    }
    const double tranche = investable / static_cast<double>(targets.size());

    for (const auto& t : targets) {
        auto h = s.holdings.find(t);
        const Quote& q = quotes[t];
        if (h == s.holdings.end() || !q.reason.empty()) continue;
        double excess = h->second * q.price - tranche;
        if (excess > kDust * std::max(1.0, tranche)) try_sell(s, t, excess / q.price, day, config, trades);
    }
    for (const auto& t : targets) {
        const Quote& q = quotes[t];
        double held = 0.0;
        if (auto h = s.holdings.find(t); h != s.holdings.end() && q.reason.empty()) held = h->second * q.price;
        double need = std::min(tranche - held, s.cash);
        if (!(need > kDust * std::max(1.0, tranche))) continue;

        Trade tr = make_trade(day, s.slot_id, t, Side::buy);
        tr.price = q.price;
        if (!q.reason.empty()) {
            tr.rejection = q.reason;
        } else if (q.ipo) {
            tr.rejection = "ipo_day";
        } else if (at_limit_up(q)) {
            tr.rejection = "limit_up";
        }
        if (!tr.rejection.empty()) {
            log::debug("buy " + t + " rejected: " + tr.rejection);
            trades.push_back(std::move(tr));
            continue;
        }
        tr.shares = need / (q.price * (1.0 + config.fee_rate));
        tr.fee = tr.shares * q.price * config.fee_rate;
        s.cash -= tr.shares * q.price + tr.fee;
        if (s.cash < 0.0 && s.cash > -1e-9 * std::max(1.0, tranche)) s.cash = 0.0;
        s.holdings[t] += tr.shares;
        s.last_price[t] = q.price;
        trades.push_back(std::move(tr));
    }
    return s;
}

SlotPortfolio retry_deferred_sells(const SlotPortfolio& slot, const DayView& day, const ExecutionConfig& config,
                                   std::vector<Trade>& trades) {
    SlotPortfolio s = slot;
    std::vector<std::string> still;
    for (const auto& ticker : slot.deferred) {
        auto it = s.holdings.find(ticker);
        if (it == s.holdings.end()) continue;
        if (!try_sell(s, ticker, it->second, day, config, trades)) still.push_back(ticker);
    }
    s.deferred = std::move(still);
    return s;
}

void mark_to_market(SlotPortfolio& slot, const MarketPanel& panel, std::size_t date_index) {
    for (const auto& [ticker, shares] : slot.holdings) {
        auto ti = panel.find_ticker(ticker);
        if (!ti) continue;
        double c = panel.value(Field::close, date_index, *ti);
        if (!is_missing(c)) slot.last_price[ticker] = c;
    }
}

std::vector<std::string> select_targets(const BacktestInputs& in, std::span<const std::string> selection,
                                        std::size_t date_index, int top_n) {
    if (selection.empty() || date_index == 0) return {};
    auto scores = predict_returns(in.model, selection, in.zfactors, date_index - 1);
    std::vector<std::size_t> order;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (!is_missing(scores[i]) && in.panel.present(date_index, i)) order.push_back(i);
    }
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    if (order.size() > static_cast<std::size_t>(top_n)) order.resize(static_cast<std::size_t>(top_n));
    std::vector<std::string> out;
    for (std::size_t i : order) out.push_back(in.panel.tickers()[i]);
    return out;
}

EquityCurve run_backtest(const BacktestInputs& in, const Policy& policy, const ExecutionConfig& config, Date start,
                         Date end) {
    config.validate();
    auto s0 = in.panel.find_date(start);
    auto s1 = in.panel.find_date(end);
    if (!s0) throw DataError("backtest start " + format_date(start) + " not in panel");
    if (!s1) throw DataError("backtest end " + format_date(end) + " not in panel");
    if (*s1 < *s0) throw DataError("backtest end precedes start");
    if (*s0 == 0) throw DataError("backtest start needs a previous panel date for factor values");
    if (config.price_mode == PriceMode::vwap && !in.minutes) throw ConfigError("vwap price mode requires minute bars");

    const std::size_t h = static_cast<std::size_t>(config.holding_days);
    std::vector<SlotPortfolio> slots(h);
    for (std::size_t k = 0; k < h; ++k) {
        slots[k].slot_id = static_cast<int>(k);
        slots[k].cash = config.initial_capital / static_cast<double>(h);
    }

    EquityCurve curve;
    curve.dates.push_back(in.panel.dates()[*s0 - 1]);
    curve.nav.push_back(1.0);
    curve.returns.push_back(0.0);
    curve.turnover.push_back(0.0);
    curve.selections.emplace_back();

    double prev_total = config.initial_capital;
    for (std::size_t t = *s0; t <= *s1; ++t) {
        DayView day{in.panel, in.minutes, t, config.price_mode};
        const std::size_t first_trade = curve.trades.size();
        const std::size_t k = slot_index(t - *s0, h);

        for (std::size_t j = 0; j < h; ++j) {
            if (j != k && !slots[j].deferred.empty()) slots[j] = retry_deferred_sells(slots[j], day, config, curve.trades);
        }
        auto selection = policy(in.panel.dates()[t], t);
        auto targets = select_targets(in, selection, t, config.top_n);
        slots[k] = rebalance_slot(slots[k], targets, day, config, curve.trades);

        double total = 0.0;
        for (auto& s : slots) {
            mark_to_market(s, in.panel, t);
            total += s.value();
        }
        double traded = 0.0;
        for (std::size_t i = first_trade; i < curve.trades.size(); ++i) traded += curve.trades[i].notional();

        double r = total / prev_total - 1.0;
        curve.dates.push_back(in.panel.dates()[t]);
        curve.returns.push_back(r);
        curve.nav.push_back(curve.nav.back() * (1.0 + r));
        curve.turnover.push_back(traded / 2.0 / prev_total);
        curve.selections.push_back(std::move(selection));
        prev_total = total;
    }
    curve.final_slots = std::move(slots);
    return curve;
}

Metrics compute_metrics(const EquityCurve& curve) {
    if (curve.nav.size() < 2) throw Error("compute_metrics: need at least 2 curve points");
    Metrics m;
    m.n_days = curve.nav.size() - 1;
    m.cr = curve.nav.back() / curve.nav.front() - 1.0;
    m.ar = std::pow(1.0 + m.cr, 252.0 / static_cast<double>(m.n_days)) - 1.0;

    std::span<const double> daily(curve.returns.data() + 1, curve.returns.size() - 1);
    double sd = daily.size() >= 2 ? stats::stddev(daily, true) : kMissing;
    m.sr = (sd > 0.0 && std::isfinite(sd)) ? stats::mean(daily) / sd * std::sqrt(252.0) : kMissing;

    double peak = curve.nav.front();
    for (double v : curve.nav) {
        peak = std::max(peak, v);
        m.mdd = std::max(m.mdd, (peak - v) / peak);
    }
    if (curve.turnover.size() > 1) {
        m.avg_turnover = std::accumulate(curve.turnover.begin() + 1, curve.turnover.end(), 0.0) /
                         static_cast<double>(curve.turnover.size() - 1);
    }
    return m;
}

namespace {

nlohmann::json number_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

}  // namespace

std::string curve_jsonl(const EquityCurve& curve) {
    std::ostringstream out;
    for (std::size_t i = 0; i < curve.nav.size(); ++i) {
        nlohmann::json j;
        j["date"] = format_date(curve.dates[i]);
        j["nav"] = curve.nav[i];
        j["return"] = curve.returns[i];
        j["turnover"] = curve.turnover[i];
        j["selection"] = i < curve.selections.size() ? curve.selections[i] : std::vector<std::string>{};
        out << j.dump() << '\n';
    }
    return out.str();
}

std::string trades_jsonl(const EquityCurve& curve) {
    std::ostringstream out;
    for (const auto& t : curve.trades) {
        nlohmann::json j;
        j["date"] = format_date(t.date);
        j["slot"] = t.slot;
        j["ticker"] = t.ticker;
        j["side"] = t.side == Side::buy ? "buy" : "sell";
        j["shares"] = t.shares;
        j["price"] = number_or_null(t.price);
        j["fee"] = t.fee;
        j["rejection"] = t.rejection.empty() ? nlohmann::json(nullptr) : nlohmann::json(t.rejection);
        out << j.dump() << '\n';
    }
    return out.str();
}

std::string metrics_json(const Metrics& m) {
    nlohmann::ordered_json j;
    j["CR"] = number_or_null(m.cr);
    j["AR"] = number_or_null(m.ar);
    j["SR"] = number_or_null(m.sr);
    j["MDD"] = number_or_null(m.mdd);
    j["n_days"] = m.n_days;
    j["avg_turnover"] = number_or_null(m.avg_turnover);
    return j.dump(2) + "\n";
}

}  // namespace factorgate::exec
