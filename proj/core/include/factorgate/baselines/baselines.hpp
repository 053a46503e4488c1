#pragma once

#include "factorgate/context/semantic.hpp"
#include "factorgate/dsl/catalog.hpp"
#include "factorgate/exec/execution.hpp"
#include "factorgate/factor_data.hpp"
#include "factorgate/grpo/grpo.hpp"

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

namespace factorgate::baselines {

// Maps (date, date_index) to a factor selection A_t. Implementations only
// read data that is known before the open of date_index.
class GatingStrategy {
public:
    virtual ~GatingStrategy() = default;
    virtual std::string name() const = 0;
    virtual std::vector<std::string> select(Date date, std::size_t date_index) const = 0;
    // Buy-and-hold is not a gate; run_strategy routes it to buy_and_hold().
    virtual bool is_buy_and_hold() const { return false; }

    exec::Policy policy() const {
        return [this](Date d, std::size_t t) { return select(d, t); };
    }
};

class AllFactors : public GatingStrategy {
public:
    explicit AllFactors(std::vector<std::string> ids) : ids_(std::move(ids)) {}
    std::string name() const override { return "all_factors"; }
    std::vector<std::string> select(Date, std::size_t) const override { return ids_; }

private:
    std::vector<std::string> ids_;
};

class BuyAndHoldSentinel : public GatingStrategy {
public:
    std::string name() const override { return "buy_and_hold"; }
    std::vector<std::string> select(Date, std::size_t) const override { return {}; }
    bool is_buy_and_hold() const override { return true; }
};

// Same selection every day. Throws ConfigError for ids outside the catalog.
class FixedList : public GatingStrategy {
public:
    FixedList(const dsl::FactorCatalog& catalog, std::vector<std::string> ids);
    std::string name() const override { return "fixed_list"; }
    std::vector<std::string> select(Date, std::size_t) const override { return ids_; }

private:
    std::vector<std::string> ids_;
};

// Top-k factors by trailing mean RankIC. `ic` is ic_history against 1-day
// forward returns (row d pairs factors at d with the d -> d+1 return), so at
// date t the usable rows end at t - 2. Fewer than `window` usable rows gives
// an empty selection and a warning. Ties keep tensor (catalog) order.
class IcMomentumGate : public GatingStrategy {
public:
    IcMomentumGate(Matrix ic, std::vector<std::string> ids, std::size_t window = 20, std::size_t k = 10);
    std::string name() const override { return "ic_momentum"; }
    std::vector<std::string> select(Date date, std::size_t date_index) const override;

private:
    Matrix ic_;
    std::vector<std::string> ids_;
    std::size_t window_, k_;
};

// Lasso on a pooled, column-standardized design:
//   (1/2n) ||y - b0 - X b||^2 + lambda ||b||_1, intercept unpenalized.
struct LassoProblem {
    std::vector<std::string> ids;
    std::size_t n = 0;          // observations
    std::vector<double> x;      // column-major n x p, each column mean 0, population std 1
    std::vector<double> y;      // centred
    double y_mean = 0.0;
    std::vector<std::string> dropped;

    std::size_t p() const { return ids.size(); }
    double col(std::size_t j, std::size_t i) const { return x[j * n + i]; }
    double lambda_max() const;  // max_j |x_j' y| / n
};

struct LassoResult {
    double beta0 = 0.0;
    std::vector<double> beta;
    int iterations = 0;
    bool converged = false;
};

// Builds the pool from dates [first, last] (panel indices): rows are
// (date, ticker) pairs with every retained factor and the forward return
// present. All-missing or constant factors are dropped with a warning.
// Throws DataError when fewer than 2 rows remain.
LassoProblem build_lasso_problem(const FactorTensor& factors, const Matrix& forward, std::size_t first,
                                 std::size_t last);

// Cyclic coordinate descent; stops when a full sweep moves no coefficient
// by more than `tol`. Non-convergence is reported via `converged`.
LassoResult lasso_fit(const LassoProblem& problem, double lambda, double tol = 1e-7, int max_iter = 100000);

// Largest KKT violation: |g_j - lambda sign(b_j)| for active j and
// max(0, |g_j| - lambda) otherwise, where g_j = x_j' r / n.
double kkt_violation(const LassoProblem& problem, const LassoResult& result, double lambda);

std::vector<std::string> lasso_support(const LassoProblem& problem, const LassoResult& result);

// Refits the Lasso every date on the trailing `window` dates whose forward
// returns are known before the open (d + horizon <= t - 1).
class LassoGate : public GatingStrategy {
public:
    LassoGate(const FactorTensor& zfactors, const MarketPanel& panel, double lambda, std::size_t window = 60,
              std::size_t horizon = 1);
    std::string name() const override { return "lasso"; }
    std::vector<std::string> select(Date date, std::size_t date_index) const override;

private:
    const FactorTensor& factors_;
    Matrix forward_;
    double lambda_;
    std::size_t window_, horizon_;
};

// Samples the toy policy on features from the sessions before each date.
// The draw depends only on (seed, date_index).
class ToyPolicyGate : public GatingStrategy {
public:
    ToyPolicyGate(grpo::ToyPolicy policy, std::vector<std::string> vocabulary, const MarketPanel& panel,
                  std::uint64_t seed);
    std::string name() const override { return "toy_policy"; }
    std::vector<std::string> select(Date date, std::size_t date_index) const override;

private:
    grpo::ToyPolicy policy_;
    std::vector<std::string> vocabulary_;
    const MarketPanel& panel_;
    std::uint64_t seed_;
};

// Queries the language-model screener with the decision context for each
// date. The pipeline must already be prepared on a window ending before the
// first queried date.
class LlmGate : public GatingStrategy {
public:
    explicit LlmGate(context::SemanticPipeline& pipeline) : pipeline_(&pipeline) {}
    std::string name() const override { return "llm"; }
    std::vector<std::string> select(Date date, std::size_t date_index) const override;

    // Raw responses keyed by date index.
    std::map<std::size_t, std::string> responses() const;

private:
    context::SemanticPipeline* pipeline_;
    mutable std::mutex mu_;
    mutable std::map<std::size_t, std::string> responses_;
};

// Fraction of consecutive dates on which the selection set changes.
double selection_churn(const std::vector<std::vector<std::string>>& selections);

// Equal weight over every ticker present on `start` (external series mode:
// the benchmark levels), bought once at the execution price with entry fees
// and held to `end`. Tickers that cannot be bought on `start` stay in cash.
// Point 0 is the session before `start`.
exec::EquityCurve buy_and_hold(const exec::BacktestInputs& in, const exec::ExecutionConfig& config, Date start,
                               Date end);

exec::EquityCurve run_strategy(const exec::BacktestInputs& in, const GatingStrategy& strategy,
                               const exec::ExecutionConfig& config, Date start, Date end);

struct SweepCell {
    int top_n = 0;
    int holding_days = 0;
    exec::Metrics metrics;
    std::string error;  // empty when the cell ran
    bool ok() const { return error.empty(); }
};

struct SweepGrid {
    std::vector<int> top_n;
    std::vector<int> holding_days;
    std::vector<SweepCell> cells;  // top_n-major

    const SweepCell& at(int top_n, int holding_days) const;
    // Header: top_n,H,CR,AR,SR,MDD,status
    std::string to_csv() const;
};

SweepGrid read_sweep_csv(std::istream& in);

inline const std::vector<int> kDefaultSweepTopN{5, 10, 15, 20};
inline const std::vector<int> kDefaultSweepHoldingDays{1, 3, 5, 10};

// One backtest per (top_n, H) cell on a worker pool. A failing cell keeps
// its error message and the sweep continues. The strategy must be safe to
// call concurrently.
SweepGrid run_sweep(const exec::BacktestInputs& in, const GatingStrategy& strategy, std::vector<int> top_n,
                    std::vector<int> holding_days, const exec::ExecutionConfig& base, Date start, Date end,
                    unsigned threads = 1);

}  // namespace factorgate::baselines
