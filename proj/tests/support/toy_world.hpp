#pragma once

#include "factorgate/dsl/catalog.hpp"
#include "factorgate/factor_data.hpp"
#include "factorgate/grpo/grpo.hpp"
#include "factorgate/linear_model.hpp"
#include "factorgate/synthetic.hpp"

#include <cmath>
#include <memory>
#include <vector>

namespace factorgate::testing {

// Synthetic market + frozen model (fit on days 0..59) + toy environment
// drawing decision dates from 60..114.
struct ToyWorld {
    SyntheticMarket market;
    FactorTensor raw, z;
    LinearModel model;
    reward::RewardInputs inputs;
    grpo::ToyEnvironment env;

    explicit ToyWorld(double signal_strength, std::uint64_t seed = 7)
        : market(make_market(signal_strength, seed)),
          raw(evaluate_catalog(dsl::default_catalog(), market.panel)),
          z(cross_sectional_zscore(raw)),
          model(fit_linear_model(raw, market.panel, {market.panel.dates()[0], market.panel.dates()[59]}, 1)),
          inputs{market.panel, &market.minutes, z, model},
          env{inputs, dsl::default_catalog(), vocabulary(), 60, 114, {}, 8} {}

    static std::vector<std::string> vocabulary() {
        return {"alpha_001", "alpha_003", "alpha_012", "alpha_018",
                "alpha_025", "alpha_033", "alpha_041", "alpha_060"};
    }

private:
    static SyntheticMarket make_market(double signal_strength, std::uint64_t seed) {
        SyntheticSpec spec;
        spec.signal_strength = signal_strength;
        spec.seed = seed;
        return generate_synthetic_market(spec);
    }
};

struct Trend {
    double slope = 0.0;
    double se = 0.0;
};

// OLS slope of mean reward against iteration, with its standard error.
inline Trend reward_trend(const std::vector<grpo::IterationLog>& history) {
    const double n = static_cast<double>(history.size());
    double sx = 0, sy = 0;
    for (std::size_t i = 0; i < history.size(); ++i) {
        sx += static_cast<double>(i);
        sy += history[i].mean_reward;
    }
    const double mx = sx / n, my = sy / n;
    double sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < history.size(); ++i) {
        const double dx = static_cast<double>(i) - mx;
        sxx += dx * dx;
        sxy += dx * (history[i].mean_reward - my);
    }
    Trend t;
    t.slope = sxy / sxx;
    double rss = 0;
    for (std::size_t i = 0; i < history.size(); ++i) {
        const double e = history[i].mean_reward - my - t.slope * (static_cast<double>(i) - mx);
        rss += e * e;
    }
    t.se = std::sqrt(rss / (n - 2) / sxx);
    return t;
}

}  // namespace factorgate::testing
