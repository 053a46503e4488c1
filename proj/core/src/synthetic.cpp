#include "factorgate/synthetic.hpp"

#include "factorgate/csv.hpp"
#include "factorgate/dsl/catalog.hpp"
#include "factorgate/dsl/evaluator.hpp"
#include "factorgate/dsl/parser.hpp"
#include "factorgate/errors.hpp"
#include "factorgate/market_io.hpp"
#include "factorgate/stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

namespace factorgate {

namespace {

constexpr double kOpenGapSigma = 0.003;
constexpr double kWickSigma = 0.004;
constexpr double kMinuteJitter = 0.0008;
constexpr double kMorningShare = 0.2;
constexpr double kLogVolumeMean = 13.8;  // ~1e6 shares
constexpr double kLogVolumeSigma = 0.5;
constexpr double kLogVolumePersistence = 0.8;  // AR(1) coefficient of log volume

double r10(double v) { return csv::round_significant(v, kPriceDigits); }

std::string ticker_name(std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "T%04zu", i + 1);
    return buf;
}

}  // namespace

void SyntheticSpec::validate() const {
    if (n_tickers < 2) throw ConfigError("synthetic spec: n_tickers must be >= 2");
    if (n_days < 30) throw ConfigError("synthetic spec: n_days must be >= 30");
    if (!(noise_sigma >= 0.0)) throw ConfigError("synthetic spec: noise_sigma must be >= 0");
    if (!(warmup_sigma >= 0.0)) throw ConfigError("synthetic spec: warmup_sigma must be >= 0");
    if (!std::isfinite(signal_strength)) throw ConfigError("synthetic spec: signal_strength must be finite");
    if (!(limit_ratio > 0.0 && limit_ratio < 1.0)) throw ConfigError("synthetic spec: limit_ratio must be in (0, 1)");
}

std::vector<Date> business_days(Date start, std::size_t count) {
    std::vector<Date> out;
    out.reserve(count);
    Date d = start;
    while (out.size() < count) {
        if (iso_weekday(d) <= 5) out.push_back(d);
        d = add_days(d, 1);
    }
    return out;
}

SyntheticMarket generate_synthetic_market(const SyntheticSpec& spec) {
    spec.validate();

    dsl::ExprPtr planted;
    if (!spec.planted_formula.empty()) {
        planted = dsl::parse_alpha(spec.planted_formula);
    } else {
        const auto* entry = dsl::default_catalog().find(spec.planted_factor);
        if (!entry) throw ConfigError("synthetic spec: unknown planted factor '" + spec.planted_factor + "'");
        planted = entry->expr;
    }
    const std::size_t lookback = dsl::max_lookback(*planted);

    const std::size_t n = spec.n_tickers;
    std::vector<std::string> tickers;
    for (std::size_t i = 0; i < n; ++i) tickers.push_back(ticker_name(i));
    auto dates = business_days(spec.start, spec.n_days);

    SyntheticMarket out;
    out.panel = MarketPanel(dates, tickers);
    out.residual_volume = Matrix(spec.n_days, n);
    out.planted_factor = spec.planted_factor;

    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> uniform(0.0, 1.0);

    std::vector<double> prev_close(n);
    for (auto& p : prev_close) p = r10(20.0 + 30.0 * uniform(rng));

    std::vector<double> log_volume_mean(n), log_volume(n);
    for (std::size_t i = 0; i < n; ++i) {
        log_volume_mean[i] = kLogVolumeMean + 0.3 * normal(rng);
        log_volume[i] = log_volume_mean[i] + kLogVolumeSigma * normal(rng);
    }
    const double innovation = kLogVolumeSigma * std::sqrt(1.0 - kLogVolumePersistence * kLogVolumePersistence);

    std::vector<double> z(n, 0.0);
    bool have_signal = false;
    std::vector<double> minute_prices(kExecutionWindowMinutes);
    std::vector<double> minute_weights(kExecutionWindowMinutes);

    for (std::size_t t = 0; t < spec.n_days; ++t) {
        for (std::size_t i = 0; i < n; ++i) {
            const double pc = prev_close[i];
            DailyBar bar;
            bar.date = dates[t];
            bar.ticker = tickers[i];
            bar.prev_close = pc;
            bar.limit_up = r10(pc * (1.0 + spec.limit_ratio));
            bar.limit_down = r10(pc * (1.0 - spec.limit_ratio));

            double ret = have_signal ? spec.signal_strength * z[i] + spec.noise_sigma * normal(rng)
                                     : spec.warmup_sigma * normal(rng);
            double close = r10(std::clamp(pc * (1.0 + ret), bar.limit_down, bar.limit_up));
            double open = r10(std::clamp(pc * std::exp(kOpenGapSigma * normal(rng)), bar.limit_down, bar.limit_up));

            // Morning path drifts a quarter of the way from open toward close.
            double lo = std::min(open, close), hi = std::max(open, close);
            for (int m = 0; m < kExecutionWindowMinutes; ++m) {
                double frac = 0.25 * (m + 1) / kExecutionWindowMinutes;
                double p = open + (close - open) * frac + pc * kMinuteJitter * normal(rng);
                p = r10(std::clamp(p, bar.limit_down, bar.limit_up));
                minute_prices[m] = p;
                lo = std::min(lo, p);
                hi = std::max(hi, p);
            }
            double low = r10(std::max(lo * (1.0 - std::fabs(kWickSigma * normal(rng))), bar.limit_down));
            double high = r10(std::min(hi * (1.0 + std::fabs(kWickSigma * normal(rng))), bar.limit_up));
            bar.open = open;
            bar.close = close;
            bar.low = std::min(low, lo);
            bar.high = std::max(high, hi);

            if (t > 0) {
                log_volume[i] = log_volume_mean[i] + kLogVolumePersistence * (log_volume[i] - log_volume_mean[i]) +
                                innovation * normal(rng);
            }
            double volume = std::round(std::exp(log_volume[i]));
            bar.volume = volume;
            double wsum = 0;
            for (auto& w : minute_weights) {
                w = 0.5 + uniform(rng);
                wsum += w;
            }
            double morning_total = 0;
            for (int m = 0; m < kExecutionWindowMinutes; ++m) {
                double v = std::max(1.0, std::floor(volume * kMorningShare * minute_weights[m] / wsum));
                morning_total += v;
                MinuteBar mb{dates[t], tickers[i], m + 1, minute_prices[m], v};
                out.minutes.insert(std::move(mb));
            }
            out.residual_volume(t, i) = volume - morning_total;
            out.panel.set_bar(t, i, bar);
            prev_close[i] = close;
        }

        if (t >= lookback) {
            auto values = dsl::evaluate_alpha_at(*planted, out.panel, t);
            auto zs = stats::zscore(values);
            for (std::size_t i = 0; i < n; ++i) z[i] = is_missing(zs[i]) ? 0.0 : zs[i];
            have_signal = std::any_of(zs.begin(), zs.end(), [](double v) { return !is_missing(v); });
        }
    }
    return out;
}

}  // namespace factorgate
