#pragma once

#include "factorgate/date.hpp"
#include "factorgate/market.hpp"

#include <cstdint>
#include <string>

namespace factorgate {

struct SyntheticSpec {
    std::uint64_t seed = 7;
    std::size_t n_tickers = 50;
    std::size_t n_days = 120;
    std::string planted_factor = "alpha_012";
    // Formula override; when empty the id is looked up in the default catalog.
    std::string planted_formula;
    double signal_strength = 0.01;
    double noise_sigma = 0.02;
    // Return dispersion on the first dates, before the planted factor has
    // enough history to be evaluated.
    double warmup_sigma = 0.02;
    double limit_ratio = kDefaultLimitRatio;
    Date start = Date{std::chrono::year{2024} / 1 / 2};

    void validate() const;  // throws ConfigError
};

struct SyntheticMarket {
    MarketPanel panel;
    MinutePanel minutes;
    // Daily volume not traded in minutes 1..30: volume = sum(minute volumes) + residual.
    Matrix residual_volume;
    std::string planted_factor;
};

// Business days (Mon-Fri) starting at `start`.
std::vector<Date> business_days(Date start, std::size_t count);

// Close-to-close returns follow
//   r[t+1] = signal_strength * z(planted)[t] + Normal(0, noise_sigma)
// where z is the cross-sectional z-score of the planted factor at t
// (missing entries count as 0). Dates where the factor is not yet defined
// draw Normal(0, warmup_sigma). All prices are rounded to 10 significant
// digits so a CSV round-trip is exact.
SyntheticMarket generate_synthetic_market(const SyntheticSpec& spec);

}  // namespace factorgate
