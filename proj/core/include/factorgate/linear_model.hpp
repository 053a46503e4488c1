#pragma once

#include "factorgate/date.hpp"
#include "factorgate/dsl/catalog.hpp"
#include "factorgate/factor_data.hpp"
#include "factorgate/market.hpp"

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace factorgate {

struct FitWindow {
    Date start{};
    Date end{};
};

struct Coefficient {
    std::string id;
    double beta = 0.0;
    double mean = 0.0;  // fit-pool standardization
    double std = 1.0;
};

// Fixed scorer: score = beta0 + sum over selected i of beta_i * (V_i - mean_i) / std_i.
struct LinearModel {
    double beta0 = 0.0;
    std::vector<Coefficient> coefficients;  // tensor order
    std::vector<std::string> dropped;       // factors excluded at fit time
    FitWindow window;
    std::size_t n_obs = 0;
    bool ridge = false;
    double ridge_lambda = 0.0;

    const Coefficient* find(std::string_view id) const;

    friend bool operator==(const LinearModel&, const LinearModel&) = default;
};

// Pooled least squares of `forward_returns` on the factor values over the
// dates inside `window`. Rows with any missing input are dropped. Each
// retained factor is standardized by its pool mean/std, which the model
// keeps for prediction. Factors that are all-missing or constant in the
// window are dropped with a warning. If cond(X'X) > 1e10 the factor block
// of the diagonal gets lambda = 1e-6 * trace / k added.
// Throws DataError for an empty window or fewer than 2 distinct dates.
LinearModel fit_ols(const FactorTensor& factors, const Matrix& forward_returns, std::span<const Date> dates,
                    const FitWindow& window);

// Convenience: z-scores the tensor per date, uses horizon-h close-to-close
// forward returns, and only pools dates d with d + h inside the window.
LinearModel fit_linear_model(const FactorTensor& raw_factors, const MarketPanel& panel, const FitWindow& window,
                             std::size_t horizon);

// V holds one cross-section per tensor factor (values[f][ticker]); only the
// selected factors are read. A ticker missing any selected value scores
// missing. Unknown or dropped ids contribute nothing.
std::vector<double> predict_returns(const LinearModel& model, std::span<const std::string> selection,
                                    const FactorTensor& factors, std::size_t date_index);

// Same, from explicit cross-sections keyed by factor id.
std::vector<double> predict_returns(const LinearModel& model, std::span<const std::string> selection,
                                    const std::vector<std::pair<std::string, std::vector<double>>>& values,
                                    std::size_t n_tickers);

// Text record, 12 significant digits.
void save_model(const LinearModel& model, std::ostream& out);
LinearModel load_model(std::istream& in);
void save_model(const LinearModel& model, const std::string& path);
LinearModel load_model(const std::string& path);

// Spearman rho over the common support; missing below 3 common tickers.
double rank_ic(std::span<const double> factor, std::span<const double> forward);

// ic(d, f): RankIC of factor f at date d against `forward` at date d.
Matrix ic_history(const FactorTensor& factors, const Matrix& forward);

struct FactorPerformance {
    std::string id;
    std::vector<std::size_t> horizons;
    std::vector<double> mean_ic;  // per horizon
    std::vector<double> ic_vol;   // per horizon, sample std of daily RankIC
    std::vector<std::size_t> ic_count;
    double long_short = 0.0;      // cumulative top-minus-bottom decile, 1-day returns
    bool infeasible = false;
    // Panel dates spanned by the data the statistics read (returns included).
    Date window_start{};
    Date window_end{};

    double mean_rank_ic() const { return mean_ic.empty() ? kMissing : mean_ic.front(); }
    double ic_volatility() const { return ic_vol.empty() ? kMissing : ic_vol.front(); }
};

std::vector<FactorPerformance> factor_backtest(const FactorTensor& factors, const MarketPanel& panel,
                                               std::span<const std::size_t> horizons, std::size_t first_date = 0,
                                               std::size_t last_date = static_cast<std::size_t>(-1));
std::vector<FactorPerformance> factor_backtest(const dsl::FactorCatalog& catalog, const MarketPanel& panel,
                                               std::span<const std::size_t> horizons);

}  // namespace factorgate
