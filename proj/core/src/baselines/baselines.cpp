#include "factorgate/baselines/baselines.hpp"

#include "factorgate/context/selection.hpp"
#include "factorgate/csv.hpp"
#include "factorgate/errors.hpp"
#include "factorgate/log.hpp"
#include "factorgate/stats.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <istream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <thread>

namespace factorgate::baselines {

FixedList::FixedList(const dsl::FactorCatalog& catalog, std::vector<std::string> ids) : ids_(std::move(ids)) {
    for (const auto& id : ids_) {
        if (!catalog.contains(id)) throw ConfigError("fixed list: unknown factor " + id);
    }
}

IcMomentumGate::IcMomentumGate(Matrix ic, std::vector<std::string> ids, std::size_t window, std::size_t k)
    : ic_(std::move(ic)), ids_(std::move(ids)), window_(window), k_(k) {
    if (window_ == 0) throw ConfigError("ic momentum window must be >= 1");
    if (k_ == 0) throw ConfigError("ic momentum k must be >= 1");
    if (ic_.cols() != ids_.size()) throw ConfigError("ic momentum: IC history and ids disagree");
}

std::vector<std::string> IcMomentumGate::select(Date date, std::size_t t) const {
    // Row d needs close[d + 1], known after the session t - 1 closes.
    if (t < window_ + 1 || t - 1 > ic_.rows()) {
        log::warn("ic momentum: insufficient RankIC history for " + format_date(date));
        return {};
    }
    const std::size_t last = t - 2, first = last + 1 - window_;
    std::vector<std::pair<double, std::size_t>> scored;
    for (std::size_t f = 0; f < ids_.size(); ++f) {
        double s = 0;
        std::size_t n = 0;
        for (std::size_t d = first; d <= last; ++d) {
            double v = ic_(d, f);
            if (is_missing(v)) continue;
            s += v;
            ++n;
        }
        if (n) scored.emplace_back(s / static_cast<double>(n), f);
    }
    std::stable_sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    if (scored.size() > k_) scored.resize(k_);
    std::vector<std::size_t> picked;
    for (const auto& [s, f] : scored) picked.push_back(f);
    std::sort(picked.begin(), picked.end());
    std::vector<std::string> out;
    for (auto f : picked) out.push_back(ids_[f]);
    return out;
}

double LassoProblem::lambda_max() const {
    double m = 0.0;
    for (std::size_t j = 0; j < p(); ++j) {
        double g = 0;
        for (std::size_t i = 0; i < n; ++i) g += col(j, i) * y[i];
        m = std::max(m, std::fabs(g) / static_cast<double>(n));
    }
    return m;
}

LassoProblem build_lasso_problem(const FactorTensor& factors, const Matrix& forward, std::size_t first,
                                 std::size_t last) {
    if (last < first) throw DataError("lasso window is empty");
    if (last >= forward.rows()) throw DataError("lasso window extends past the panel");
    const std::size_t tickers = forward.cols();

    LassoProblem p;
    std::vector<std::size_t> keep;
    for (std::size_t f = 0; f < factors.num_factors(); ++f) {
        bool any = false;
        for (std::size_t d = first; d <= last && !any; ++d) {
            for (std::size_t i = 0; i < tickers && !any; ++i) any = !is_missing(factors.values[f](d, i));
        }
        if (any) {
            keep.push_back(f);
        } else {
            log::warn("lasso: dropping all-missing factor " + factors.ids[f]);
            p.dropped.push_back(factors.ids[f]);
        }
    }

    std::vector<std::pair<std::size_t, std::size_t>> rows;
    for (std::size_t d = first; d <= last; ++d) {
        for (std::size_t i = 0; i < tickers; ++i) {
            if (is_missing(forward(d, i))) continue;
            bool complete = true;
            for (auto f : keep) complete = complete && !is_missing(factors.values[f](d, i));
            if (complete) rows.emplace_back(d, i);
        }
    }
    if (rows.size() < 2) throw DataError("lasso pool has fewer than 2 complete rows");
    p.n = rows.size();
    const double n = static_cast<double>(p.n);

    for (auto f : keep) {
        std::vector<double> c(p.n);
        for (std::size_t r = 0; r < p.n; ++r) c[r] = factors.values[f](rows[r].first, rows[r].second);
        const double m = std::accumulate(c.begin(), c.end(), 0.0) / n;
        double ss = 0;
        for (double v : c) ss += (v - m) * (v - m);
        const double sd = std::sqrt(ss / n);
        if (!(sd > 1e-12 * std::max(1.0, std::fabs(m)))) {
            log::warn("lasso: dropping constant factor " + factors.ids[f]);
            p.dropped.push_back(factors.ids[f]);
            continue;
        }
        for (double& v : c) v = (v - m) / sd;
        p.ids.push_back(factors.ids[f]);
        p.x.insert(p.x.end(), c.begin(), c.end());
    }
    p.y.resize(p.n);
    for (std::size_t r = 0; r < p.n; ++r) p.y[r] = forward(rows[r].first, rows[r].second);
    p.y_mean = std::accumulate(p.y.begin(), p.y.end(), 0.0) / n;
    for (double& v : p.y) v -= p.y_mean;
    return p;
}

namespace {

double soft_threshold(double z, double g) {
    if (z > g) return z - g;
    if (z < -g) return z + g;
    return 0.0;
}

}  // namespace

LassoResult lasso_fit(const LassoProblem& problem, double lambda, double tol, int max_iter) {
    if (!(lambda >= 0.0)) throw ConfigError("lasso lambda must be >= 0");
    const std::size_t p = problem.p(), n = problem.n;
    const double dn = static_cast<double>(n);
    LassoResult res;
    res.beta.assign(p, 0.0);
    std::vector<double> r = problem.y;
    std::vector<double> norm(p);
    for (std::size_t j = 0; j < p; ++j) {
        double s = 0;
        for (std::size_t i = 0; i < n; ++i) s += problem.col(j, i) * problem.col(j, i);
        norm[j] = s / dn;
    }
    for (res.iterations = 1; res.iterations <= max_iter; ++res.iterations) {
        double max_change = 0.0;
        for (std::size_t j = 0; j < p; ++j) {
            const double* xj = problem.x.data() + j * n;
            double g = 0;
            for (std::size_t i = 0; i < n; ++i) g += xj[i] * r[i];
            const double old = res.beta[j];
            const double updated = soft_threshold(g / dn + norm[j] * old, lambda) / norm[j];
            const double delta = updated - old;
            if (delta != 0.0) {
                for (std::size_t i = 0; i < n; ++i) r[i] -= delta * xj[i];
                res.beta[j] = updated;
                max_change = std::max(max_change, std::fabs(delta));
            }
        }
        if (max_change < tol) {
            res.converged = true;
            break;
        }
    }
    if (!res.converged) {
        res.iterations = max_iter;
        log::warn("lasso did not converge in " + std::to_string(max_iter) + " sweeps");
    }
    // Columns are centred, so the intercept is the mean of y.
    res.beta0 = problem.y_mean;
    return res;
}

double kkt_violation(const LassoProblem& problem, const LassoResult& result, double lambda) {
    const std::size_t p = problem.p(), n = problem.n;
    std::vector<double> r = problem.y;
    for (std::size_t j = 0; j < p; ++j) {
        if (result.beta[j] == 0.0) continue;
        for (std::size_t i = 0; i < n; ++i) r[i] -= result.beta[j] * problem.col(j, i);
    }
    double worst = 0.0;
    for (std::size_t j = 0; j < p; ++j) {
        double g = 0;
        for (std::size_t i = 0; i < n; ++i) g += problem.col(j, i) * r[i];
        g /= static_cast<double>(n);
        const double b = result.beta[j];
        const double v = b != 0.0 ? std::fabs(g - lambda * (b > 0 ? 1.0 : -1.0)) : std::max(0.0, std::fabs(g) - lambda);
        worst = std::max(worst, v);
    }
    return worst;
}

std::vector<std::string> lasso_support(const LassoProblem& problem, const LassoResult& result) {
    std::vector<std::string> out;
    for (std::size_t j = 0; j < problem.p(); ++j) {
        if (result.beta[j] != 0.0) out.push_back(problem.ids[j]);
    }
    return out;
}

LassoGate::LassoGate(const FactorTensor& zfactors, const MarketPanel& panel, double lambda, std::size_t window,
                     std::size_t horizon)
    : factors_(zfactors), forward_(forward_returns(panel, horizon)), lambda_(lambda), window_(window),
      horizon_(horizon) {
    if (!(lambda >= 0.0)) throw ConfigError("lasso lambda must be >= 0");
    if (window_ == 0 || horizon_ == 0) throw ConfigError("lasso window and horizon must be >= 1");
}

std::vector<std::string> LassoGate::select(Date date, std::size_t t) const {
    if (t < window_ + horizon_ + 1) {
        log::warn("lasso: insufficient history for " + format_date(date));
        return {};
    }
    const std::size_t last = t - 1 - horizon_;
    const std::size_t first = last + 1 - window_;
    try {
        auto problem = build_lasso_problem(factors_, forward_, first, last);
        auto fit = lasso_fit(problem, lambda_);
        return lasso_support(problem, fit);
    } catch (const DataError& e) {
        log::warn("lasso: " + std::string(e.what()) + " on " + format_date(date));
        return {};
    }
}

ToyPolicyGate::ToyPolicyGate(grpo::ToyPolicy policy, std::vector<std::string> vocabulary, const MarketPanel& panel,
                             std::uint64_t seed)
    : policy_(std::move(policy)), vocabulary_(std::move(vocabulary)), panel_(panel), seed_(seed) {
    if (vocabulary_.size() != policy_.num_factors()) throw ConfigError("toy policy gate: vocabulary size mismatch");
}

std::vector<std::string> ToyPolicyGate::select(Date, std::size_t t) const {
    std::seed_seq seq{seed_, static_cast<std::uint64_t>(t)};
    std::mt19937_64 rng(seq);
    auto tokens = policy_.sample(grpo::market_features(panel_, t), rng);
    std::vector<std::size_t> picked;
    for (int tok : tokens) {
        if (tok != policy_.stop_token()) picked.push_back(static_cast<std::size_t>(tok));
    }
    std::sort(picked.begin(), picked.end());
    std::vector<std::string> out;
    for (auto i : picked) out.push_back(vocabulary_[i]);
    return out;
}

std::vector<std::string> LlmGate::select(Date, std::size_t t) const {
    std::lock_guard lock(mu_);
    auto ctx = pipeline_->context_for(t);
    std::string text;
    auto raw = pipeline_->screen(ctx, &text);
    responses_[t] = text;
    return raw.selection;
}

std::map<std::size_t, std::string> LlmGate::responses() const {
    std::lock_guard lock(mu_);
    return responses_;
}

double selection_churn(const std::vector<std::vector<std::string>>& selections) {
    if (selections.size() < 2) return 0.0;
    std::size_t changes = 0;
    for (std::size_t i = 1; i < selections.size(); ++i) {
        std::set<std::string> a(selections[i - 1].begin(), selections[i - 1].end());
        std::set<std::string> b(selections[i].begin(), selections[i].end());
        changes += a != b;
    }
    return static_cast<double>(changes) / static_cast<double>(selections.size() - 1);
}

exec::EquityCurve buy_and_hold(const exec::BacktestInputs& in, const exec::ExecutionConfig& config, Date start,
                               Date end) {
    config.validate();
    const auto& panel = in.panel;
    auto s0 = panel.find_date(start), s1 = panel.find_date(end);
    if (!s0) throw DataError("buy-and-hold start " + format_date(start) + " not in panel");
    if (!s1) throw DataError("buy-and-hold end " + format_date(end) + " not in panel");
    if (*s1 < *s0) throw DataError("buy-and-hold end precedes start");
    if (*s0 == 0) throw DataError("buy-and-hold start needs a previous panel date");

    exec::EquityCurve curve;
    curve.dates.push_back(panel.dates()[*s0 - 1]);
    curve.nav.push_back(1.0);
    curve.returns.push_back(0.0);
    curve.turnover.push_back(0.0);
    curve.selections.emplace_back();

    if (config.benchmark_mode == exec::BenchmarkMode::external_series) {
        const auto& lv = config.benchmark_levels;
        if (lv.size() != panel.num_dates()) throw ConfigError("benchmark levels must align with the panel dates");
        for (std::size_t t = *s0; t <= *s1; ++t) {
            if (is_missing(lv[t]) || is_missing(lv[t - 1]) || !(lv[t - 1] > 0)) {
                throw DataError("benchmark level missing near " + format_date(panel.dates()[t]));
            }
            const double r = lv[t] / lv[t - 1] - 1.0;
            curve.dates.push_back(panel.dates()[t]);
            curve.returns.push_back(r);
            curve.nav.push_back(curve.nav.back() * (1.0 + r));
            curve.turnover.push_back(0.0);
            curve.selections.emplace_back();
        }
        return curve;
    }
    if (config.price_mode == exec::PriceMode::vwap && !in.minutes) {
        throw ConfigError("vwap price mode requires minute bars");
    }

    const std::size_t t0 = *s0;
    std::vector<std::size_t> universe;
    for (std::size_t i = 0; i < panel.num_tickers(); ++i) {
        if (panel.present(t0, i)) universe.push_back(i);
    }
    double cash = config.initial_capital;
    const double tranche = universe.empty() ? 0.0 : cash / static_cast<double>(universe.size());
    std::vector<double> shares(panel.num_tickers(), 0.0), mark(panel.num_tickers(), kMissing);
    double traded = 0.0;
    for (auto i : universe) {
        double price = kMissing;
        if (config.price_mode == exec::PriceMode::close) {
            price = panel.value(Field::close, t0, i);
        } else {
            std::vector<MinuteBar> window;
            for (const auto& b : in.minutes->bars(panel.dates()[t0], panel.tickers()[i])) {
                if (b.minute_index >= 1 && b.minute_index <= config.vwap_window) window.push_back(b);
            }
            try {
                price = exec::compute_vwap(window);
            } catch (const NoLiquidity&) {
            }
        }
        const double lu = panel.value(Field::limit_up, t0, i);
        if (is_missing(price) || panel.is_ipo_day(t0, i) || (!is_missing(lu) && price >= lu)) continue;
        shares[i] = tranche / (price * (1.0 + config.fee_rate));
        mark[i] = price;
        cash -= shares[i] * price * (1.0 + config.fee_rate);
        traded += shares[i] * price;
    }
    if (cash < 0.0 && cash > -1e-9) cash = 0.0;

    double prev_total = config.initial_capital;
    for (std::size_t t = t0; t <= *s1; ++t) {
        double total = cash;
        for (std::size_t i = 0; i < shares.size(); ++i) {
            if (shares[i] == 0.0) continue;
            const double c = panel.value(Field::close, t, i);
            if (!is_missing(c)) mark[i] = c;
            total += shares[i] * mark[i];
        }
        const double r = total / prev_total - 1.0;
        curve.dates.push_back(panel.dates()[t]);
        curve.returns.push_back(r);
        curve.nav.push_back(curve.nav.back() * (1.0 + r));
        curve.turnover.push_back(t == t0 ? traded / 2.0 / prev_total : 0.0);
        curve.selections.emplace_back();
        prev_total = total;
    }
    return curve;
}

exec::EquityCurve run_strategy(const exec::BacktestInputs& in, const GatingStrategy& strategy,
                               const exec::ExecutionConfig& config, Date start, Date end) {
    if (strategy.is_buy_and_hold()) return buy_and_hold(in, config, start, end);
    return exec::run_backtest(in, strategy.policy(), config, start, end);
}

const SweepCell& SweepGrid::at(int n, int h) const {
    for (const auto& c : cells) {
        if (c.top_n == n && c.holding_days == h) return c;
    }
    throw Error("sweep grid has no cell top_n=" + std::to_string(n) + " H=" + std::to_string(h));
}

std::string SweepGrid::to_csv() const {
    std::ostringstream out;
    out << "top_n,H,CR,AR,SR,MDD,status\n";
    for (const auto& c : cells) {
        out << c.top_n << ',' << c.holding_days << ',';
        if (c.ok()) {
            out << csv::format_number(c.metrics.cr, 12) << ',' << csv::format_number(c.metrics.ar, 12) << ','
                << csv::format_number(c.metrics.sr, 12) << ',' << csv::format_number(c.metrics.mdd, 12) << ",ok\n";
        } else {
            out << ",,,," << csv::escape("failed: " + c.error) << '\n';
        }
    }
    return out.str();
}

SweepGrid read_sweep_csv(std::istream& in) {
    std::string line;
    if (!csv::read_line(in, line) || line != "top_n,H,CR,AR,SR,MDD,status") throw DataError("not a sweep CSV");
    SweepGrid g;
    std::size_t lineno = 1;
    while (csv::read_line(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        auto f = csv::split_line(line);
        if (f.size() != 7) throw DataError("sweep CSV line " + std::to_string(lineno) + ": expected 7 fields");
        SweepCell c;
        auto n = csv::parse_number(f[0]), h = csv::parse_number(f[1]);
        if (!n || !h || is_missing(*n) || is_missing(*h)) throw DataError("sweep CSV line " + std::to_string(lineno) + ": bad grid key");
        c.top_n = static_cast<int>(*n);
        c.holding_days = static_cast<int>(*h);
        if (f[6] == "ok") {
            double* dst[] = {&c.metrics.cr, &c.metrics.ar, &c.metrics.sr, &c.metrics.mdd};
            for (int k = 0; k < 4; ++k) {
                auto v = csv::parse_number(f[2 + k]);
                if (!v) throw DataError("sweep CSV line " + std::to_string(lineno) + ": bad number");
                *dst[k] = *v;
            }
        } else {
            c.error = f[6].rfind("failed: ", 0) == 0 ? f[6].substr(8) : f[6];
            if (c.error.empty()) c.error = "failed";
        }
        if (std::find(g.top_n.begin(), g.top_n.end(), c.top_n) == g.top_n.end()) g.top_n.push_back(c.top_n);
        if (std::find(g.holding_days.begin(), g.holding_days.end(), c.holding_days) == g.holding_days.end()) {
            g.holding_days.push_back(c.holding_days);
        }
        g.cells.push_back(std::move(c));
    }
    return g;
}

SweepGrid run_sweep(const exec::BacktestInputs& in, const GatingStrategy& strategy, std::vector<int> top_n,
                    std::vector<int> holding_days, const exec::ExecutionConfig& base, Date start, Date end,
                    unsigned threads) {
    if (top_n.empty() || holding_days.empty()) throw ConfigError("sweep grid axes must be non-empty");
    SweepGrid grid;
    grid.top_n = std::move(top_n);
    grid.holding_days = std::move(holding_days);
    for (int n : grid.top_n) {
        for (int h : grid.holding_days) {
            SweepCell c;
            c.top_n = n;
            c.holding_days = h;
            grid.cells.push_back(c);
        }
    }
    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (std::size_t i = next++; i < grid.cells.size(); i = next++) {
            auto& c = grid.cells[i];
            try {
                auto cfg = base;
                cfg.top_n = c.top_n;
                cfg.holding_days = c.holding_days;
                c.metrics = exec::compute_metrics(run_strategy(in, strategy, cfg, start, end));
            } catch (const std::exception& e) {
                c.error = e.what();
                log::warn("sweep cell top_n=" + std::to_string(c.top_n) + " H=" + std::to_string(c.holding_days) +
                          " failed: " + e.what());
            }
        }
    };
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = std::min<unsigned>(threads, static_cast<unsigned>(grid.cells.size()));
    if (threads <= 1) {
        work();
    } else {
        std::vector<std::jthread> pool;
        for (unsigned k = 0; k < threads; ++k) pool.emplace_back(work);
    }
    return grid;
}

}  // namespace factorgate::baselines
