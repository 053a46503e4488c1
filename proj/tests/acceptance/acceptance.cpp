// Acceptance runner: one PASS/FAIL line per criterion, nonzero exit on any
// failure.

#include "app/app.hpp"
#include "factorgate/baselines/baselines.hpp"
#include "factorgate/context/client.hpp"
#include "factorgate/context/selection.hpp"
#include "factorgate/context/semantic.hpp"
#include "factorgate/dsl/ast.hpp"
#include "factorgate/dsl/catalog.hpp"
#include "factorgate/dsl/evaluator.hpp"
#include "factorgate/dsl/parser.hpp"
#include "factorgate/exec/execution.hpp"
#include "factorgate/grpo/grpo.hpp"
#include "factorgate/linear_model.hpp"
#include "factorgate/log.hpp"
#include "factorgate/reward/reward.hpp"
#include "factorgate/stats.hpp"
#include "factorgate/synthetic.hpp"
#include "oracles.hpp"
#include "random_ast.hpp"
#include "test_support.hpp"
#include "toy_world.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <regex>
#include <sstream>
#include <string>
#include <vector>

using namespace factorgate;
namespace fgt = factorgate::testing;

namespace {

// Collects failed expectations for one criterion.
class Check {
public:
    void expect(bool ok, const std::string& what) {
        ++checks_;
        if (!ok && failures_.size() < 5) failures_.push_back(what);
        failed_ += !ok;
    }
    void near(double a, double b, double tol, const std::string& what) {
        expect(std::fabs(a - b) <= tol, what + ": " + fmt(a) + " vs " + fmt(b));
    }
    bool ok() const { return failed_ == 0; }
    std::string summary() const {
        std::string s = std::to_string(checks_ - failed_) + "/" + std::to_string(checks_) + " checks";
        for (const auto& f : failures_) s += "; " + f;
        return s;
    }
    void note(const std::string& n) { notes_ += (notes_.empty() ? "" : ", ") + n; }
    const std::string& notes() const { return notes_; }

    static std::string fmt(double v) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.6g", v);
        return buf;
    }

private:
    std::size_t checks_ = 0, failed_ = 0;
    std::vector<std::string> failures_;
    std::string notes_;
};

struct Criterion {
    int id;
    const char* name;
    double budget_seconds;
    std::function<void(Check&)> run;
};

const dsl::FactorCatalog& catalog() { return dsl::default_catalog(); }

// ---- 1: reward formula ----

std::string random_response(std::mt19937_64& rng) {
    const auto& entries = catalog().entries();
    std::uniform_int_distribution<int> kind(0, 4), count(0, 20), pick(0, static_cast<int>(entries.size()) - 1);
    std::string text = "Reasoning about momentum and volume. ";
    switch (kind(rng)) {
        case 0: return text + "No structured answer.";
        case 1: return text + "<selection></selection>";
        default: {
            std::string sel;
            const int n = count(rng);
            for (int i = 0; i < n; ++i) {
                if (!sel.empty()) sel += ", ";
                sel += rng() % 6 == 0 ? "alpha_9" + std::to_string(rng() % 100) : entries[pick(rng)].id;
            }
            if (rng() % 4 == 0) return text + sel;  // recovered without a block
            return text + "<selection>" + sel + "</selection>";
        }
    }
}

void reward_fidelity(Check& c) {
    c.expect(reward::adjust_reward(2.0, 3.0) == 1.4, "adjust(2.0, p_norm 0.3) == 1.4");
    c.expect(reward::adjust_reward(-2.0, 3.0) == -2.6, "adjust(-2.0, p_norm 0.3) == -2.6");

    static const fgt::ToyWorld world(0.01);
    reward::MockJudge judge(catalog());
    reward::RewardConfig cfg;
    std::mt19937_64 rng(9);
    std::uniform_int_distribution<std::size_t> day(60, 114);
    for (int i = 0; i < 1000; ++i) {
        const std::string text = random_response(rng);
        const auto b = reward::final_reward("ctx", text, day(rng), world.inputs, catalog(), judge, cfg);
        const auto parsed = context::parse_selection(text, catalog());
        const std::string tag = "triple " + std::to_string(i);
        c.expect(b.r_final == b.r_adjusted - b.p_structural, tag + " R_final");
        c.expect(b.r_adjusted == reward::adjust_reward(b.r_base, b.p_consistency), tag + " R_adjusted");
        c.expect(b.p_structural == reward::structural_penalty(parsed, cfg.penalties), tag + " P_structural");
    }
}

// ---- 2: GRPO math ----

grpo::GrpoGroup tiny_group(grpo::ToyPolicy& policy, std::mt19937_64& rng) {
    std::normal_distribution<double> n01(0.0, 1.0);
    grpo::ToyPolicy old(3, 2, 3), ref(3, 2, 3);
    for (auto& p : policy.params()) p = 0.5 * n01(rng);
    auto po = old.params(), pr = ref.params(), pc = policy.params();
    for (std::size_t i = 0; i < pc.size(); ++i) {
        po[i] = pc[i] + 0.15 * n01(rng);
        pr[i] = pc[i] + 0.3 * n01(rng);
    }
    std::vector<double> phi{1.0, n01(rng)};
    auto g = grpo::sample_group(old, ref, phi, 4, rng);
    for (std::size_t i = 0; i < g.responses.size(); ++i) g.rewards.push_back(n01(rng));
    return g;
}

void grpo_math(Check& c) {
    std::vector<double> r{1, 2, 3};
    auto a = grpo::normalize_advantages(r, 1e-8);
    c.near(a[0], -1.2247, 1e-4, "A_1");
    c.near(a[1], 0.0, 1e-4, "A_2");
    c.near(a[2], 1.2247, 1e-4, "A_3");

    std::mt19937_64 rng(2024);
    const double h = 1e-5;
    double worst = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        grpo::ToyPolicy policy(3, 2, 3);
        auto group = tiny_group(policy, rng);
        grpo::GrpoConfig cfg;
        cfg.beta = trial % 2 ? 0.3 : 0.01;
        cfg.kl_placement = trial % 3 == 0 ? grpo::KlPlacement::sequence : grpo::KlPlacement::per_token;
        auto lg = grpo::grpo_loss(policy, group, cfg);
        auto params = policy.params();
        for (std::size_t p = 0; p < params.size(); ++p) {
            const double keep = params[p];
            params[p] = keep + h;
            const double up = grpo::grpo_loss(policy, group, cfg).value.objective;
            params[p] = keep - h;
            const double down = grpo::grpo_loss(policy, group, cfg).value.objective;
            params[p] = keep;
            const double fd = (up - down) / (2 * h);
            const double scale = std::max({std::fabs(fd), std::fabs(lg.grad[p]), 1e-3});
            const double rel = std::fabs(fd - lg.grad[p]) / scale;
            worst = std::max(worst, rel);
            c.expect(rel <= 1e-5, "trial " + std::to_string(trial) + " param " + std::to_string(p));
        }
    }
    c.note("max FD rel err " + Check::fmt(worst));

    // Response 0 sits past 1 + eps with a positive advantage; response 1 is
    // on-policy.
    grpo::GrpoConfig cfg;
    cfg.beta = 0.0;
    const double lift = std::log(1 + 2 * cfg.epsilon);
    grpo::GrpoGroup g;
    std::vector<double> old{-1.0, -2.0};
    std::vector<double> cur{old[0] + lift, old[1] + lift};
    g.responses = {{{0, 2}, cur, old, cur}, {{1, 2}, {-0.5, -0.5}, {-0.5, -0.5}, {-0.5, -0.5}}};
    g.rewards = {1.0, 0.0};
    auto v = grpo::grpo_objective(g, cfg);
    c.expect(v.advantages[0] > 0.0, "saturated response has positive advantage");
    c.expect(v.dlogp[0][0] == 0.0 && v.dlogp[0][1] == 0.0, "saturated tokens have zero gradient");
    c.expect(v.dlogp[1][0] != 0.0, "unsaturated tokens keep their gradient");
}

// ---- 3: learning signal ----

void learning_signal(Check& c) {
    fgt::ToyWorld planted(0.01);
    grpo::GrpoConfig cfg;
    cfg.iterations = 500;
    auto res = grpo::train_toy_policy(planted.env, cfg);
    const double rate = grpo::selection_rate(res.policy, planted.env, "alpha_012", 4000, 1);
    const double ref_rate = grpo::selection_rate(res.reference, planted.env, "alpha_012", 4000, 1);
    c.expect(rate > 0.9, "planted selection rate " + Check::fmt(rate));
    c.note("planted rate " + Check::fmt(rate) + " (reference " + Check::fmt(ref_rate) + ")");

    // No trend: each seed's slope within 3 standard errors of zero, and the
    // pooled mean slope within 3 standard errors of its own.
    double slope_sum = 0, var_sum = 0, worst_t = 0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        fgt::ToyWorld null_world(0.0, seed);
        grpo::GrpoConfig ncfg;
        ncfg.seed = seed;
        auto t = fgt::reward_trend(grpo::train_toy_policy(null_world.env, ncfg).history);
        c.expect(std::fabs(t.slope) < 3 * t.se, "null seed " + std::to_string(seed) + " t=" + Check::fmt(t.slope / t.se));
        slope_sum += t.slope;
        var_sum += t.se * t.se;
        worst_t = std::max(worst_t, std::fabs(t.slope / t.se));
    }
    c.expect(std::fabs(slope_sum / 5) < 3 * std::sqrt(var_sum) / 5, "pooled null slope");
    c.note("null max |t| " + Check::fmt(worst_t));
}

// ---- 4: execution engine ----

double cash_residual(const exec::EquityCurve& curve, double capital, bool& negative_holding) {
    double cash = capital;
    std::map<std::string, double> shares;
    for (const auto& t : curve.trades) {
        if (!t.executed()) continue;
        const double sign = t.side == exec::Side::buy ? 1.0 : -1.0;
        cash -= sign * t.notional() + t.fee;
        shares[t.ticker] += sign * t.shares;
    }
    double slot_cash = 0;
    std::map<std::string, double> held;
    for (const auto& s : curve.final_slots) {
        slot_cash += s.cash;
        for (const auto& [k, v] : s.holdings) held[k] += v;
    }
    double worst = std::fabs(slot_cash - cash);
    for (const auto& [k, v] : shares) {
        const double hv = held.count(k) ? held[k] : 0.0;
        worst = std::max(worst, std::fabs(hv - v) / std::max(1.0, std::fabs(v)));
        if (hv < -1e-12) negative_holding = true;
    }
    return worst;
}

void execution_engine(Check& c) {
    std::mt19937 rng(11);
    std::uniform_real_distribution<double> price(5, 50), vol(0, 1000);
    std::uniform_int_distribution<int> len(1, 30);
    double worst_vwap = 0;
    for (int trial = 0; trial < 10000; ++trial) {
        std::vector<MinuteBar> bars;
        double pv = 0, v = 0;
        const int n = len(rng);
        for (int m = 1; m <= n; ++m) {
            MinuteBar b{Date{}, "X", m, price(rng), std::floor(vol(rng)) + 1.0};
            pv += b.price * b.volume;
            v += b.volume;
            bars.push_back(b);
        }
        const double rel = std::fabs(exec::compute_vwap(bars) - pv / v) / (pv / v);
        worst_vwap = std::max(worst_vwap, rel);
    }
    c.expect(worst_vwap <= 1e-12, "vwap rel err " + Check::fmt(worst_vwap));

    std::mt19937 mrng(8);
    std::normal_distribution<double> nd(0, 0.03);
    std::uniform_int_distribution<int> mlen(2, 80);
    double worst_mdd = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        exec::EquityCurve curve;
        curve.nav = {1.0};
        curve.returns = {0.0};
        const int n = mlen(mrng);
        for (int i = 0; i < n; ++i) {
            const double r = nd(mrng);
            curve.returns.push_back(r);
            curve.nav.push_back(curve.nav.back() * (1 + r));
        }
        worst_mdd = std::max(worst_mdd, std::fabs(exec::compute_metrics(curve).mdd - fgt::brute_mdd(curve.nav)));
    }
    c.expect(worst_mdd <= 1e-15, "mdd abs err " + Check::fmt(worst_mdd));

    // Adversarial fixture: frequent limit hits and IPO days.
    auto p = fgt::random_panel(60, 12, 5);
    std::mt19937 arng(3);
    std::uniform_real_distribution<double> u;
    for (std::size_t t = 1; t < 60; ++t) {
        for (std::size_t i = 0; i < 12; ++i) {
            DailyBar b = p.bar(t, i);
            const double x = u(arng);
            if (x < 0.1) b.limit_up = b.close;
            else if (x < 0.2) b.limit_down = b.close;
            else if (x < 0.25) b.is_ipo_day = true;
            p.set_bar(t, i, b);
        }
    }
    Matrix sig(60, 12);
    std::normal_distribution<double> sn;
    for (auto& v : sig.data()) v = sn(arng);
    LinearModel sig_model;
    sig_model.coefficients = {{"sig", 1.0, 0.0, 1.0}};
    FactorTensor sig_z{{"sig"}, {sig}};
    exec::ExecutionConfig adv;
    adv.holding_days = 3;
    adv.top_n = 4;
    adv.price_mode = exec::PriceMode::close;
    auto adv_curve = exec::run_backtest({p, nullptr, sig_z, sig_model},
                                        [](Date, std::size_t) { return std::vector<std::string>{"sig"}; }, adv,
                                        p.dates()[1], p.dates().back());
    std::size_t executed = 0, violations = 0;
    for (const auto& t : adv_curve.trades) {
        if (!t.executed()) continue;
        ++executed;
        const auto d = p.date_index(t.date);
        const auto i = *p.find_ticker(t.ticker);
        if (p.is_ipo_day(d, i)) ++violations;
        if (t.side == exec::Side::buy && t.price >= p.value(Field::limit_up, d, i)) ++violations;
        if (t.side == exec::Side::sell && t.price <= p.value(Field::limit_down, d, i)) ++violations;
    }
    c.expect(executed > 50, "adversarial fixture executes trades");
    c.expect(violations == 0, std::to_string(violations) + " limit or IPO violations");

    // 120-day H = 5 run on a planted market.
    SyntheticSpec spec;
    spec.n_tickers = 200;
    spec.n_days = 130;
    auto m = generate_synthetic_market(spec);
    auto expr = dsl::parse_alpha(catalog().find(spec.planted_factor)->source);
    FactorTensor z{{spec.planted_factor}, {cross_sectional_zscore(dsl::evaluate_series(*expr, m.panel))}};
    LinearModel model;
    model.coefficients = {{spec.planted_factor, 1.0, 0.0, 1.0}};
    const auto id = spec.planted_factor;
    auto curve = exec::run_backtest({m.panel, &m.minutes, z, model},
                                    [&](Date, std::size_t) { return std::vector<std::string>{id}; },
                                    exec::ExecutionConfig{}, m.panel.dates()[10], m.panel.dates()[129]);
    c.expect(curve.n_days() == 120, "120 trading days");
    bool negative = false;
    const double residual = std::max(cash_residual(curve, 1.0, negative), cash_residual(adv_curve, 1.0, negative));
    c.expect(residual <= 1e-9, "cash residual " + Check::fmt(residual));
    c.expect(!negative, "no negative holdings");
    // Skip the ramp-up while the first H slots deploy.
    double sum = 0;
    for (std::size_t t = 6; t < curve.turnover.size(); ++t) sum += curve.turnover[t];
    const double turnover = sum / static_cast<double>(curve.turnover.size() - 6);
    c.expect(turnover >= 0.17 && turnover <= 0.23, "turnover " + Check::fmt(turnover));
    c.note("vwap err " + Check::fmt(worst_vwap) + ", cash residual " + Check::fmt(residual) + ", turnover " +
           Check::fmt(turnover));
}

// ---- 5: linear model ----

std::vector<Date> make_dates(std::size_t n) {
    std::vector<Date> d;
    for (std::size_t i = 0; i < n; ++i) d.push_back(parse_date("2022-01-03") + std::chrono::days{static_cast<int>(i)});
    return d;
}

void linear_model(Check& c) {
    std::mt19937 rng(1);
    std::normal_distribution<double> nd;
    const std::size_t days = 30, tickers = 15, k = 5;
    for (int trial = 0; trial < 10; ++trial) {
        FactorTensor t;
        for (std::size_t f = 0; f < k; ++f) {
            Matrix mat(days, tickers);
            for (auto& v : mat.data()) v = nd(rng);
            t.ids.push_back("f" + std::to_string(f));
            t.values.push_back(cross_sectional_zscore(mat));
        }
        std::vector<double> beta(k);
        for (auto& b : beta) b = nd(rng);
        const double b0 = nd(rng) * 0.1;
        Matrix y(days, tickers);
        for (std::size_t d = 0; d < days; ++d) {
            for (std::size_t i = 0; i < tickers; ++i) {
                y(d, i) = b0;
                for (std::size_t f = 0; f < k; ++f) y(d, i) += beta[f] * t.values[f](d, i);
            }
        }
        auto dates = make_dates(days);
        auto fit = fit_ols(t, y, dates, {dates.front(), dates.back()});
        // Map the standardized fit back to the raw scale before comparing.
        double intercept = fit.beta0;
        for (std::size_t f = 0; f < k; ++f) {
            const auto& coef = fit.coefficients[f];
            c.near(coef.beta / coef.std, beta[f], 1e-8, "beta " + coef.id);
            intercept -= coef.beta * coef.mean / coef.std;
        }
        c.near(intercept, b0, 1e-8, "beta0");
    }

    LinearModel m;
    m.beta0 = 0.25;
    m.coefficients = {{"a", 2.0, 0.0, 1.0}};
    std::vector<std::string> none;
    auto s = predict_returns(m, none, std::vector<std::pair<std::string, std::vector<double>>>{{"a", {1.0, kMissing, 3.0}}}, 3);
    c.expect(s == std::vector<double>(3, 0.25), "empty selection returns beta0");

    SyntheticSpec spec;
    spec.n_tickers = 20;
    spec.n_days = 60;
    auto market = generate_synthetic_market(spec);
    auto raw = evaluate_catalog(catalog(), market.panel);
    const auto& dates = market.panel.dates();
    auto model = fit_linear_model(raw, market.panel, {dates[0], dates[45]}, 1);
    auto z = cross_sectional_zscore(raw);
    std::vector<std::string> all;
    for (const auto& coef : model.coefficients) all.push_back(coef.id);
    double worst = 0;
    for (std::size_t d = 30; d <= 44; ++d) {
        auto pred = predict_returns(model, all, z, d);
        for (std::size_t i = 0; i < spec.n_tickers; ++i) {
            double f = model.beta0;
            bool missing = false;
            for (const auto& coef : model.coefficients) {
                const double v = z.at(coef.id)(d, i);
                missing = missing || is_missing(v);
                f += coef.beta * (v - coef.mean) / coef.std;
            }
            if (missing) {
                c.expect(is_missing(pred[i]), "missing input gives missing score");
            } else {
                worst = std::max(worst, std::fabs(pred[i] - f));
            }
        }
    }
    c.expect(worst <= 1e-10, "fitted values err " + Check::fmt(worst));
}

// ---- 6: DSL ----

void dsl_checks(Check& c) {
    fgt::RandomAst gen(11);
    int fixpoints = 0;
    for (int i = 0; i < 1000; ++i) {
        auto e = gen.generate(4);
        const auto text = dsl::unparse(*e);
        auto back = dsl::parse_alpha(text);
        const bool ok = dsl::structurally_equal(*e, *back) && dsl::unparse(*back) == text;
        fixpoints += ok;
        c.expect(ok, "fixpoint " + text);
    }
    c.note(std::to_string(fixpoints) + " fixpoints");

    auto p = fgt::random_panel(40, 9, 2);
    auto a = dsl::parse_alpha("delta(close, 5)");
    auto b = dsl::parse_alpha("close - delay(close, 5)");
    double worst = 0;
    for (std::size_t d = 5; d < p.num_dates(); ++d) {
        auto va = dsl::evaluate_alpha_at(*a, p, d), vb = dsl::evaluate_alpha_at(*b, p, d);
        for (std::size_t i = 0; i < va.size(); ++i) worst = std::max(worst, std::fabs(va[i] - vb[i]));
    }
    c.expect(worst <= 1e-12, "delta/delay err " + Check::fmt(worst));

    struct Golden {
        const char* source;
        const char* canonical;
    };
    const Golden cases[] = {
        {"(rank(Ts_ArgMax(SignedPower(((returns < 0) ? stddev(returns, 20) : close), 2.), 5)) - 0.5)",
         "(rank(ts_argmax(signedpower(((returns < 0) ? stddev(returns, 20) : close), 2), 5)) - 0.5)"},
        {"(-1 * correlation(rank(open), rank(volume), 10))", "((-1) * correlation(rank(open), rank(volume), 10))"},
        {"(-1 * Ts_Rank(rank(low), 9))", "((-1) * ts_rank(rank(low), 9))"},
        {"(-1 * correlation(open, volume, 10))", "((-1) * correlation(open, volume, 10))"},
        {"((0 < ts_min(delta(close, 1), 5)) ? delta(close, 1) : ((ts_max(delta(close, 1), 5) < 0) ? delta(close, 1) : "
         "(-1 * delta(close, 1))))",
         "((0 < ts_min(delta(close, 1), 5)) ? delta(close, 1) : ((ts_max(delta(close, 1), 5) < 0) ? delta(close, 1) : "
         "((-1) * delta(close, 1))))"},
        {"(sign(delta(volume, 1)) * (-1 * delta(close, 1)))", "(sign(delta(volume, 1)) * ((-1) * delta(close, 1)))"},
        {"(-1 * sum(rank(correlation(rank(high), rank(volume), 3)), 3))",
         "((-1) * ts_sum(rank(correlation(rank(high), rank(volume), 3)), 3))"},
        {"rank(((((-1 * returns) * adv20) * vwap) * (high - close)))",
         "rank((((((-1) * returns) * adv(20)) * vwap) * (high - close)))"},
        {"(((high * low)^0.5) - vwap)", "(((high * low) ^ 0.5) - vwap)"},
        {"((close - open) / ((high - low) + .001))", "((close - open) / ((high - low) + 0.001))"},
    };
    for (const auto& g : cases) {
        auto e = dsl::parse_alpha(g.source);
        c.expect(dsl::unparse(*e) == g.canonical, std::string("golden ") + g.source);
    }
    using namespace dsl;
    auto a101 = make_binary(
        BinaryOp::div, make_binary(BinaryOp::sub, make_field(FieldRef::close), make_field(FieldRef::open)),
        make_binary(BinaryOp::add, make_binary(BinaryOp::sub, make_field(FieldRef::high), make_field(FieldRef::low)),
                    make_number(0.001)));
    c.expect(structurally_equal(*parse_alpha(cases[9].source), *a101), "hand-built tree for the last formula");
    auto a012 = make_binary(
        BinaryOp::mul, make_call("sign", {make_call("delta", {make_field(FieldRef::volume), make_number(1)})}),
        make_binary(BinaryOp::mul, make_number(-1), make_call("delta", {make_field(FieldRef::close), make_number(1)})));
    c.expect(structurally_equal(*parse_alpha(cases[5].source), *a012), "hand-built tree for the volume-sign formula");
}

// ---- 7: baselines ordering ----

void baselines_ordering(Check& c) {
    SyntheticSpec spec;
    spec.signal_strength = 0.01;
    spec.seed = 7;
    auto market = generate_synthetic_market(spec);
    auto raw = evaluate_catalog(catalog(), market.panel);
    auto z = cross_sectional_zscore(raw);
    const auto& d = market.panel.dates();
    auto model = fit_linear_model(raw, market.panel, {d[0], d[59]}, 1);
    exec::BacktestInputs in{market.panel, &market.minutes, z, model};

    baselines::FixedList oracle(catalog(), {market.planted_factor});
    baselines::BuyAndHoldSentinel bh;
    exec::ExecutionConfig cfg;
    auto mo = exec::compute_metrics(baselines::run_strategy(in, oracle, cfg, d[60], d[119]));
    auto mb = exec::compute_metrics(baselines::run_strategy(in, bh, cfg, d[60], d[119]));
    c.expect(mo.sr > mb.sr, "oracle SR " + Check::fmt(mo.sr) + " > buy-and-hold SR " + Check::fmt(mb.sr));
    c.note("oracle SR " + Check::fmt(mo.sr) + " vs buy-and-hold " + Check::fmt(mb.sr));

    // Warm-up: 20 IC rows, each needing the next day's return.
    auto ic = ic_history(raw, forward_returns(market.panel, 1));
    baselines::IcMomentumGate gate(ic, raw.ids, 20, 10);
    std::size_t hits = 0, dates = 0;
    for (std::size_t t = 21; t < market.panel.num_dates(); ++t, ++dates) {
        auto sel = gate.select(d[t], t);
        hits += std::find(sel.begin(), sel.end(), market.planted_factor) != sel.end();
    }
    c.expect(hits == dates, "ic_momentum planted on " + std::to_string(hits) + "/" + std::to_string(dates) + " dates");

    std::mt19937_64 rng(3);
    std::normal_distribution<double> n01(0.0, 1.0);
    double worst_kkt = 0;
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t n = 120, p = 8;
        FactorTensor t;
        Matrix fwd(n, 1);
        std::vector<double> beta(p);
        for (auto& b : beta) b = n01(rng) * (rng() % 2 ? 1.0 : 0.0);
        for (std::size_t j = 0; j < p; ++j) {
            t.ids.push_back("f" + std::to_string(j));
            t.values.emplace_back(n, 1);
        }
        for (std::size_t i = 0; i < n; ++i) {
            double y = 0.3;
            for (std::size_t j = 0; j < p; ++j) {
                const double v = n01(rng) + (j ? 0.5 * t.values[j - 1](i, 0) : 0.0);
                t.values[j](i, 0) = v;
                y += beta[j] * v;
            }
            fwd(i, 0) = y + n01(rng);
        }
        auto prob = baselines::build_lasso_problem(t, fwd, 0, n - 1);
        const double lmax = prob.lambda_max();
        std::size_t prev = p + 1;
        for (int k = 0; k <= 20; ++k) {
            const double lambda = lmax * k / 20.0;
            auto fit = baselines::lasso_fit(prob, lambda);
            c.expect(fit.converged, "lasso converged");
            worst_kkt = std::max(worst_kkt, baselines::kkt_violation(prob, fit, lambda));
            const auto size = baselines::lasso_support(prob, fit).size();
            c.expect(size <= prev, "support non-increasing at lambda " + Check::fmt(lambda));
            prev = size;
        }
    }
    c.expect(worst_kkt <= 1e-6, "kkt violation " + Check::fmt(worst_kkt));
}

// ---- 8: no look-ahead ----

// Mock client that records every prompt it answers.
class RecordingClient : public context::TextGenClient {
public:
    using TextGenClient::complete;
    std::string complete(std::span<const context::ChatMessage> messages, const context::GenerationParams& params) override {
        std::string all;
        for (const auto& m : messages) all += m.content + "\n";
        prompts.push_back(all);
        return inner_.complete(messages, params);
    }
    std::vector<std::string> prompts;

private:
    context::MockClient inner_;
};

// Latest ISO date written anywhere in the text.
Date latest_cited(const std::string& text) {
    static const std::regex iso(R"((\d{4})-(\d{2})-(\d{2}))");
    Date latest{};
    for (auto it = std::sregex_iterator(text.begin(), text.end(), iso); it != std::sregex_iterator(); ++it) {
        const std::chrono::year_month_day ymd{std::chrono::year{std::stoi((*it)[1])},
                                              std::chrono::month{static_cast<unsigned>(std::stoi((*it)[2]))},
                                              std::chrono::day{static_cast<unsigned>(std::stoi((*it)[3]))}};
        if (ymd.ok()) latest = std::max(latest, Date{ymd});
    }
    return latest;
}

// Wraps the LLM gate and audits every prompt sent while deciding date t.
class AuditedGate : public baselines::GatingStrategy {
public:
    AuditedGate(context::SemanticPipeline& pipe, RecordingClient& client, Check& check)
        : gate_(pipe), pipe_(pipe), client_(client), check_(check) {}
    std::string name() const override { return "audited_llm"; }
    std::vector<std::string> select(Date date, std::size_t t) const override {
        const std::size_t mark = client_.prompts.size();
        const auto ctx = pipe_.context_for(t);
        check_.expect(audit_provenance(ctx).empty(), "provenance audit on " + format_date(date));
        const Date cited = latest_cited(ctx.prompt);
        check_.expect(cited <= date, "context prompt cites the future on " + format_date(date));
        dated += cited != Date{};
        for (auto p : ctx.provenance) check_.expect(p < date, "provenance dated on or after " + format_date(date));
        auto sel = gate_.select(date, t);
        for (std::size_t i = mark; i < client_.prompts.size(); ++i) {
            check_.expect(latest_cited(client_.prompts[i]) <= date, "prompt cites the future on " + format_date(date));
        }
        ++dates;
        return sel;
    }
    mutable std::size_t dates = 0, dated = 0;

private:
    baselines::LlmGate gate_;
    context::SemanticPipeline& pipe_;
    RecordingClient& client_;
    Check& check_;
};

void no_look_ahead(Check& c) {
    auto market = generate_synthetic_market(SyntheticSpec{});
    auto raw = evaluate_catalog(catalog(), market.panel);
    auto z = cross_sectional_zscore(raw);
    const auto& d = market.panel.dates();
    auto model = fit_linear_model(raw, market.panel, {d[0], d[59]}, 1);
    Matrix planted = raw.at(market.planted_factor);
    RecordingClient client;
    context::SemanticPipeline pipe(market.panel, catalog(), raw, client,
                                   context::make_descriptor_source(market.panel, nullptr, &planted));
    pipe.prepare(0, 59);
    c.expect(!client.prompts.empty(), "history prompts recorded");
    for (const auto& p : client.prompts) c.expect(latest_cited(p) <= d[59], "history prompt cites a date after the window");
    const std::size_t history_prompts = client.prompts.size();

    AuditedGate gate(pipe, client, c);
    auto curve = baselines::run_strategy({market.panel, &market.minutes, z, model}, gate, exec::ExecutionConfig{},
                                         d[60], d.back());
    c.expect(gate.dates == curve.n_days(), "every trading date was screened");
    c.expect(gate.dated == gate.dates, "every context prompt carries a date to audit");
    c.expect(latest_cited("as of " + format_date(d[61])) > d[60], "date scanner flags a planted future date");
    c.note(std::to_string(gate.dates) + " dates, " + std::to_string(client.prompts.size() - history_prompts) +
           " screening prompts");
}

// ---- 9: reproducibility ----

void reproducibility(Check& c) {
    fgt::TempDir tmp("acceptance_repro");
    auto go = [&](const std::string& name, std::vector<std::string> args) {
        std::vector<std::string> full{"-q", "-s", "seed=5", "-s", "synth.tickers=30", "-s", "synth.days=90",
                                      "-s", "grpo.iterations=60", "-s", "grpo.vocabulary=alpha_001,alpha_012,alpha_041"};
        full.insert(full.end(), args.begin(), args.end());
        full.insert(full.end(), {"-o", (tmp / name).string()});
        std::ostringstream out, err;
        const int code = app::run(full, out, err);
        c.expect(code == 0, name + " exit " + std::to_string(code) + ": " + err.str());
    };
    go("bt1", {"-s", "exec.price_mode=vwap", "backtest"});
    go("bt2", {"-s", "exec.price_mode=vwap", "backtest"});
    go("g1", {"-s", "reward.mode=vwap", "grpo-train"});
    go("g2", {"-s", "reward.mode=vwap", "grpo-train"});
    for (const char* f : {"metrics.json", "curve.jsonl", "trades.jsonl", "manifest.json"}) {
        const auto a = fgt::read_file(tmp / "bt1" / f);
        c.expect(!a.empty() && a == fgt::read_file(tmp / "bt2" / f), std::string("backtest ") + f);
    }
    for (const char* f : {"train_log.jsonl", "policy.txt", "grpo_summary.json", "manifest.json"}) {
        const auto a = fgt::read_file(tmp / "g1" / f);
        c.expect(!a.empty() && a == fgt::read_file(tmp / "g2" / f), std::string("grpo-train ") + f);
    }
}

}  // namespace

int main() {
    log::Capture quiet(log::Level::error);
    const std::vector<Criterion> criteria{
        {1, "reward formula fidelity", 1.0, reward_fidelity},
        {2, "GRPO math", 30.0, grpo_math},
        {3, "GRPO learning signal", 300.0, learning_signal},
        {4, "execution engine", 0.0, execution_engine},
        {5, "linear model", 0.0, linear_model},
        {6, "DSL", 0.0, dsl_checks},
        {7, "baselines ordering", 0.0, baselines_ordering},
        {8, "no look-ahead audit", 0.0, no_look_ahead},
        {9, "reproducibility", 0.0, reproducibility},
    };
    int failed = 0;
    for (const auto& cr : criteria) {
        Check check;
        const auto start = std::chrono::steady_clock::now();
        try {
            cr.run(check);
        } catch (const std::exception& e) {
            check.expect(false, std::string("exception: ") + e.what());
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (cr.budget_seconds > 0) check.expect(secs < cr.budget_seconds, "runtime over budget");
        const bool ok = check.ok();
        failed += !ok;
        std::printf("%s criterion %d (%s): %s [%.2fs]%s%s\n", ok ? "PASS" : "FAIL", cr.id, cr.name,
                    check.summary().c_str(), secs, check.notes().empty() ? "" : " ", check.notes().c_str());
        std::fflush(stdout);
    }
    std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
