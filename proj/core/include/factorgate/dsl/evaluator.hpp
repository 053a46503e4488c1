#pragma once

#include "factorgate/dsl/ast.hpp"
#include "factorgate/market.hpp"

#include <vector>

namespace factorgate::dsl {

// Evaluates over every date of the panel. Row d only depends on panel rows
// <= d; rows without enough history are missing.
//
// Conventions:
//   vwap             (high + low + close) / 3
//   returns          close / delay(close, 1) - 1
//   adv(d)           ts_mean(volume * vwap, d)
//   rank(x)          average-tie rank r / n over non-missing tickers, in (0, 1]
//   ts_rank(x, d)    average-tie rank of today within the window, / d
//   ts_argmax/min    1-based position in the window (oldest = 1), first occurrence
//   stddev           sample standard deviation (d - 1 denominator)
//   correlation      missing when either side has zero variance
//   decay_linear     weights d, d-1, ..., 1 with today weighted d
//   scale(x)         x / sum(|x|) across tickers
// Any window touching a missing value yields missing; non-finite results
// are stored as missing.
Matrix evaluate_series(const Expr& expr, const MarketPanel& panel);

// Cross-section at one date. Throws DataError if the date is absent and
// InsufficientHistory if fewer than max_lookback(expr) rows precede it.
std::vector<double> evaluate_alpha(const Expr& expr, const MarketPanel& panel, Date date);
std::vector<double> evaluate_alpha_at(const Expr& expr, const MarketPanel& panel, std::size_t date_index);

}  // namespace factorgate::dsl
