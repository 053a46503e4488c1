#include "factorgate/reward/reward.hpp"

#include "factorgate/context/prompts.hpp"
#include "factorgate/errors.hpp"
#include "factorgate/log.hpp"

#include "json.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

namespace factorgate::reward {

namespace {

// Tickers with a score from t-1 that pass `eligible`, best first, at most top_n.
std::vector<std::size_t> rank_tickers(const RewardInputs& in, std::span<const std::string> selection,
                                      std::size_t date_index, int top_n, const std::vector<bool>& eligible) {
    auto scores = predict_returns(in.model, selection, in.zfactors, date_index - 1);
    std::vector<std::size_t> order;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (eligible[i] && !is_missing(scores[i])) order.push_back(i);
    }
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    if (order.size() < static_cast<std::size_t>(top_n)) {
        log::warn("reward: only " + std::to_string(order.size()) + " rankable tickers for top_n " +
                  std::to_string(top_n) + " on " + format_date(in.panel.dates()[date_index]));
    } else {
        order.resize(static_cast<std::size_t>(top_n));
    }
    return order;
}

double window_vwap(const RewardInputs& in, std::size_t d, std::size_t i) {
    auto bars = in.minutes->bars(in.panel.dates()[d], in.panel.tickers()[i]);
    try {
        return exec::compute_vwap(bars);
    } catch (const NoLiquidity&) {
        return kMissing;
    }
}

BaseOutcome frictionless(const RewardInputs& in, std::span<const std::string> selection, std::size_t t,
                         const RewardConfig& config) {
    const std::size_t s = t - 1, e = t - 1 + static_cast<std::size_t>(config.holding_days);
    const auto& close = in.panel.field(Field::close);
    const std::size_t n = in.panel.num_tickers();
    std::vector<bool> eligible(n);
    double bench = 0.0;
    std::size_t bench_n = 0;
    for (std::size_t i = 0; i < n; ++i) {
        eligible[i] = !is_missing(close(s, i)) && !is_missing(close(e, i)) && close(s, i) > 0.0;
        if (!eligible[i]) continue;
        bench += close(e, i) / close(s, i) - 1.0;
        ++bench_n;
    }
    BaseOutcome out;
    out.benchmark_return = bench_n ? bench / static_cast<double>(bench_n) : 0.0;
    if (!selection.empty()) {
        auto picks = rank_tickers(in, selection, t, config.top_n, eligible);
        double port = 0.0;
        for (std::size_t i : picks) {
            port += close(e, i) / close(s, i) - 1.0;
            out.holdings.push_back(in.panel.tickers()[i]);
        }
        out.portfolio_return = picks.empty() ? 0.0 : port / static_cast<double>(picks.size());
    }
    out.r_base = excess_reward(out.portfolio_return, out.benchmark_return);
    return out;
}

BaseOutcome with_vwap(const RewardInputs& in, std::span<const std::string> selection, std::size_t t,
                      const RewardConfig& config) {
    if (!in.minutes) throw ConfigError("vwap reward mode requires minute bars");
    const std::size_t e = t + static_cast<std::size_t>(config.holding_days);
    const std::size_t n = in.panel.num_tickers();
    std::vector<bool> eligible(n);
    double bench = 0.0;
    std::size_t bench_n = 0;
    for (std::size_t i = 0; i < n; ++i) {
        eligible[i] = in.panel.present(t, i);
        if (!eligible[i] || !in.panel.present(e, i)) continue;
        double a = window_vwap(in, t, i), b = window_vwap(in, e, i);
        if (is_missing(a) || is_missing(b)) continue;
        bench += b / a - 1.0;
        ++bench_n;
    }
    BaseOutcome out;
    out.benchmark_return = bench_n ? bench / static_cast<double>(bench_n) : 0.0;
    if (!selection.empty()) {
        auto picks = rank_tickers(in, selection, t, config.top_n, eligible);
        std::vector<std::string> targets;
        for (std::size_t i : picks) targets.push_back(in.panel.tickers()[i]);

        exec::ExecutionConfig ec;
        ec.holding_days = 1;
        ec.top_n = std::max<int>(1, static_cast<int>(targets.size()));
        ec.fee_rate = config.fee_rate;
        exec::SlotPortfolio slot;
        slot.cash = 1.0;
        std::vector<exec::Trade> trades;
        slot = exec::rebalance_slot(slot, targets, exec::DayView{in.panel, in.minutes, t, exec::PriceMode::vwap}, ec,
                                    trades);
        for (const auto& [ticker, shares] : slot.holdings) out.holdings.push_back(ticker);
        std::vector<std::string> none;
        slot = exec::rebalance_slot(slot, none, exec::DayView{in.panel, in.minutes, e, exec::PriceMode::vwap}, ec,
                                    trades);
        exec::mark_to_market(slot, in.panel, e);  // deferred sells stay at the close
        out.portfolio_return = slot.value() - 1.0;
    }
    out.r_base = excess_reward(out.portfolio_return, out.benchmark_return);
    return out;
}

}  // namespace

void RewardConfig::validate() const {
    if (holding_days < 1) throw ConfigError("reward holding period must be >= 1");
    if (top_n < 1) throw ConfigError("reward top_n must be >= 1");
    if (!(fee_rate >= 0.0 && fee_rate < 0.05)) throw ConfigError("reward fee_rate must be in [0, 0.05)");
    if (penalties.lambda_invalid < 0 || penalties.lambda_unparsable < 0 || penalties.lambda_size < 0 ||
        penalties.k_max < 0) {
        throw ConfigError("penalty weights must be non-negative");
    }
}

double excess_reward(double portfolio_return, double benchmark_return) {
    return (portfolio_return - benchmark_return) * 100.0;
}

BaseOutcome base_outcome(const RewardInputs& in, std::span<const std::string> selection, std::size_t date_index,
                         const RewardConfig& config) {
    config.validate();
    const std::size_t h = static_cast<std::size_t>(config.holding_days);
    if (date_index == 0) throw DataError("reward needs the previous day's factor values");
    const std::size_t last = config.mode == RewardMode::frictionless ? date_index - 1 + h : date_index + h;
    if (date_index >= in.panel.num_dates() || last >= in.panel.num_dates()) {
        throw DataError("reward horizon runs past the panel end");
    }
    return config.mode == RewardMode::frictionless ? frictionless(in, selection, date_index, config)
                                                   : with_vwap(in, selection, date_index, config);
}

double base_reward(const RewardInputs& in, std::span<const std::string> selection, std::size_t date_index,
                   const RewardConfig& config) {
    return base_outcome(in, selection, date_index, config).r_base;
}

double adjust_reward(double r_base, double p_consistency) {
    if (std::isnan(p_consistency)) throw Error("judge score is NaN");
    if (p_consistency < 0.0 || p_consistency > 10.0) {
        log::warn("judge score " + std::to_string(p_consistency) + " clamped to [0, 10]");
        p_consistency = std::clamp(p_consistency, 0.0, 10.0);
    }
    const double p_norm = p_consistency / 10.0;
    return r_base > 0.0 ? r_base * (1.0 - p_norm) : r_base * (1.0 + p_norm);
}

double structural_penalty(const context::RawResponse& response, const PenaltyConfig& config) {
    double p = config.lambda_invalid * static_cast<double>(response.invalid_ids.size());
    if (response.status == context::ParseStatus::unparsable) p += config.lambda_unparsable;
    const auto k = static_cast<double>(response.selection.size());
    p += config.lambda_size * std::max(0.0, k - static_cast<double>(config.k_max));
    return p;
}

int MockJudge::rubric_points(std::span<const std::string> selection, std::string_view response) const {
    const std::string reasoning = context::reasoning_text(response);
    auto tokens = context::find_id_tokens(reasoning);
    int points = 0;
    bool all_mentioned = std::all_of(selection.begin(), selection.end(), [&](const std::string& id) {
        return std::find(tokens.begin(), tokens.end(), id) != tokens.end();
    });
    if (all_mentioned) points += 4;
    if (response.size() >= 100 && response.size() <= 4000) points += 3;
    bool no_alien = std::all_of(tokens.begin(), tokens.end(), [&](const std::string& id) { return catalog_.contains(id); });
    if (no_alien) points += 3;
    return points;
}

JudgeScore MockJudge::score(std::string_view, std::span<const std::string> selection, std::string_view response) {
    JudgeScore s;
    s.p_consistency = 10.0 - rubric_points(selection, response);
    return s;
}

std::optional<double> parse_judge_reply(std::string_view reply) {
    auto b = reply.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return std::nullopt;
    auto e = reply.find_last_not_of(" \t\r\n.");
    std::string_view s = reply.substr(b, e - b + 1);
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
    return v;
}

JudgeScore RemoteJudge::score(std::string_view ctx, std::span<const std::string> selection, std::string_view response) {
    std::string sel;
    for (const auto& id : selection) sel += (sel.empty() ? "" : ", ") + id;
    const std::string prompt = context::render_template(
        context::prompt_template("judge_rubric"),
        {{"context", std::string(ctx)}, {"selection", sel.empty() ? "(none)" : sel}, {"response", std::string(response)}});
    JudgeScore s;
    for (int attempt = 0; attempt < 2; ++attempt) {
        std::string reply;
        try {
            reply = client_.complete(prompt, params_);
        } catch (const RemoteError& e) {
            log::warn(std::string("judge unavailable: ") + e.what());
            s.fallback = true;
            s.detail = e.what();
            return s;
        }
        if (auto v = parse_judge_reply(reply)) {
            s.p_consistency = *v;
            return s;
        }
        log::warn("malformed judge reply: '" + reply.substr(0, 60) + "'");
        s.detail = "malformed reply";
    }
    s.fallback = true;
    return s;
}

RewardBreakdown final_reward(std::string_view ctx, std::string_view response_text, std::size_t date_index,
                             const RewardInputs& in, const dsl::FactorCatalog& catalog, ConsistencyJudge& judge,
                             const RewardConfig& config) {
    auto parsed = context::parse_selection(response_text, catalog);
    RewardBreakdown b;
    b.date = in.panel.dates().at(date_index);
    b.status = parsed.status;
    b.selection = parsed.selection;
    b.invalid_ids = parsed.invalid_ids;

    auto base = base_outcome(in, parsed.selection, date_index, config);
    b.portfolio_return = base.portfolio_return;
    b.benchmark_return = base.benchmark_return;
    b.r_base = base.r_base;

    JudgeScore js = judge.score(ctx, parsed.selection, response_text);
    b.judge_fallback = js.fallback;
    b.p_consistency = js.fallback ? 0.0 : std::clamp(js.p_consistency, 0.0, 10.0);
    b.p_norm = b.p_consistency / 10.0;
    b.r_adjusted = adjust_reward(b.r_base, js.fallback ? 0.0 : js.p_consistency);
    b.p_structural = structural_penalty(parsed, config.penalties);
    b.r_final = b.r_adjusted - b.p_structural;
    return b;
}

std::string RewardBreakdown::to_json() const {
    nlohmann::ordered_json j;
    j["date"] = format_date(date);
    j["r_base"] = r_base;
    j["p_consistency"] = p_consistency;
    j["p_norm"] = p_norm;
    j["r_adjusted"] = r_adjusted;
    j["p_structural"] = p_structural;
    j["r_final"] = r_final;
    j["judge_fallback"] = judge_fallback;
    j["status"] = std::string(context::status_name(status));
    j["selection"] = selection;
    j["invalid_ids"] = invalid_ids;
    j["portfolio_return"] = portfolio_return;
    j["benchmark_return"] = benchmark_return;
    return j.dump();
}

}  // namespace factorgate::reward
