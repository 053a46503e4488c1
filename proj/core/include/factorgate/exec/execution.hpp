#pragma once

#include "factorgate/date.hpp"
#include "factorgate/factor_data.hpp"
#include "factorgate/linear_model.hpp"
#include "factorgate/market.hpp"

#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace factorgate::exec {

enum class BenchmarkMode { equal_weight_universe, external_series };
enum class PriceMode { vwap, close };

struct ExecutionConfig {
    int holding_days = 5;  // H
    int top_n = 10;
    double fee_rate = 0.001;  // per side
    int vwap_window = kExecutionWindowMinutes;
    BenchmarkMode benchmark_mode = BenchmarkMode::equal_weight_universe;
    // Benchmark levels aligned with the panel dates (external_series mode).
    std::vector<double> benchmark_levels;
    PriceMode price_mode = PriceMode::vwap;
    // Skip trading when a slot's target set equals its current holdings.
    bool hold_if_unchanged = false;
    double initial_capital = 1.0;

    void validate() const;  // throws ConfigError
};

std::size_t slot_index(std::size_t t, std::size_t holding_days);

// sum(price * volume) / sum(volume) over minutes 1..30. Throws NoLiquidity
// when the total volume is zero.
double compute_vwap(std::span<const MinuteBar> bars);

enum class Side { buy, sell };

struct Trade {
    Date date{};
    int slot = 0;
    std::string ticker;
    Side side = Side::buy;
    double shares = 0.0;
    double price = kMissing;
    double fee = 0.0;
    std::string rejection;  // empty when executed

    bool executed() const { return rejection.empty(); }
    double notional() const { return executed() ? shares * price : 0.0; }
};

struct SlotPortfolio {
    int slot_id = 0;
    std::map<std::string, double> holdings;  // ticker -> shares
    double cash = 0.0;
    std::optional<Date> last_rebalance;
    std::map<std::string, double> last_price;  // most recent mark per held ticker
    std::vector<std::string> deferred;         // non-target holdings awaiting a sell

    double value() const;
};

// Read-only access to one trading day.
struct DayView {
    const MarketPanel& panel;
    const MinutePanel* minutes = nullptr;  // required in vwap mode
    std::size_t date_index = 0;
    PriceMode price_mode = PriceMode::vwap;
};

// Sells non-targets, then brings each target to an equal share of the
// investable value (cash plus held targets). Buys at or above limit_up are
// rejected, sells at or below limit_down are deferred, IPO-day and
// no-liquidity tickers are skipped. Trades (including rejections) are
// appended to `trades`.
SlotPortfolio rebalance_slot(const SlotPortfolio& slot, std::span<const std::string> targets, const DayView& day,
                             const ExecutionConfig& config, std::vector<Trade>& trades);

// Retries the slot's deferred sells; executed names leave `deferred`.
SlotPortfolio retry_deferred_sells(const SlotPortfolio& slot, const DayView& day, const ExecutionConfig& config,
                                   std::vector<Trade>& trades);

// Marks holdings at the day's close where available.
void mark_to_market(SlotPortfolio& slot, const MarketPanel& panel, std::size_t date_index);

struct EquityCurve {
    std::vector<Date> dates;       // dates[0] is the inception date
    std::vector<double> nav;       // nav[0] == 1
    std::vector<double> returns;   // returns[0] == 0
    std::vector<double> turnover;  // one-side traded notional / portfolio value
    std::vector<std::vector<std::string>> selections;
    std::vector<Trade> trades;
    std::vector<SlotPortfolio> final_slots;

    std::size_t n_days() const { return nav.empty() ? 0 : nav.size() - 1; }
};

// Decision for date_index: the factor selection A_t.
using Policy = std::function<std::vector<std::string>(Date date, std::size_t date_index)>;

struct BacktestInputs {
    const MarketPanel& panel;
    const MinutePanel* minutes = nullptr;
    const FactorTensor& zfactors;  // cross-sectionally standardized factor values
    const LinearModel& model;
};

// Ranks tickers by predicted return from the previous day's factor values
// and returns the top_n tickers tradable on `date_index`. Empty selection
// yields no targets.
std::vector<std::string> select_targets(const BacktestInputs& in, std::span<const std::string> selection,
                                        std::size_t date_index, int top_n);

// Simulates [start, end]. Each day exactly one slot (ordinal mod H)
// rebalances; all slots are marked at the close.
EquityCurve run_backtest(const BacktestInputs& in, const Policy& policy, const ExecutionConfig& config, Date start,
                         Date end);

struct Metrics {
    double cr = 0.0;
    double ar = 0.0;
    double sr = kMissing;
    double mdd = 0.0;
    std::size_t n_days = 0;
    double avg_turnover = 0.0;
};

Metrics compute_metrics(const EquityCurve& curve);

std::string curve_jsonl(const EquityCurve& curve);
std::string trades_jsonl(const EquityCurve& curve);
std::string metrics_json(const Metrics& m);

}  // namespace factorgate::exec
