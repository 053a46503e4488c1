#pragma once

#include "factorgate/context/client.hpp"
#include "factorgate/context/selection.hpp"
#include "factorgate/exec/execution.hpp"
#include "factorgate/factor_data.hpp"
#include "factorgate/linear_model.hpp"
#include "factorgate/market.hpp"

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace factorgate::reward {

enum class RewardMode { frictionless, vwap };

struct PenaltyConfig {
    double lambda_invalid = 1.0;
    double lambda_unparsable = 5.0;
    double lambda_size = 0.2;
    int k_max = 15;
};

struct RewardConfig {
    RewardMode mode = RewardMode::frictionless;
    int holding_days = 5;
    int top_n = 10;
    double fee_rate = 0.001;  // vwap mode only
    PenaltyConfig penalties;

    void validate() const;  // throws ConfigError
};

struct RewardInputs {
    const MarketPanel& panel;
    const MinutePanel* minutes = nullptr;  // required in vwap mode
    const FactorTensor& zfactors;
    const LinearModel& model;
};

struct BaseOutcome {
    double portfolio_return = 0.0;
    double benchmark_return = 0.0;
    double r_base = 0.0;
    std::vector<std::string> holdings;  // tickers bought
};

// (portfolio - benchmark) * 100
double excess_reward(double portfolio_return, double benchmark_return);

// Decision on date_index t ranks tickers with factor values from t - 1.
// frictionless: enter at close[t-1], exit at close[t-1+H], no fees.
// vwap:         one slot rebalanced at vwap[t], liquidated at vwap[t+H],
//               with the execution rules and fees of the backtester.
// The benchmark is the equal-weight universe over the same prices. An empty
// selection holds cash (portfolio return 0). Throws DataError when the
// horizon runs past the panel.
BaseOutcome base_outcome(const RewardInputs& in, std::span<const std::string> selection, std::size_t date_index,
                         const RewardConfig& config);
double base_reward(const RewardInputs& in, std::span<const std::string> selection, std::size_t date_index,
                   const RewardConfig& config);

// Gains shrink and losses grow with the judge's penalty score (0..10).
// Scores outside [0, 10] are clamped with a warning.
double adjust_reward(double r_base, double p_consistency);

double structural_penalty(const context::RawResponse& response, const PenaltyConfig& config);

struct JudgeScore {
    double p_consistency = 0.0;  // 0 best .. 10 worst
    bool fallback = false;       // judge unavailable, no adjustment applied
    std::string detail;
};

class ConsistencyJudge {
public:
    virtual ~ConsistencyJudge() = default;
    virtual JudgeScore score(std::string_view context, std::span<const std::string> selection,
                             std::string_view response) = 0;
};

// Rubric over the reasoning (text outside the selection block):
//   +4 every selected id is mentioned
//   +3 total length in [100, 4000] characters
//   +3 no id-like token that is missing from the catalog
// The penalty score is 10 minus the points.
class MockJudge : public ConsistencyJudge {
public:
    explicit MockJudge(const dsl::FactorCatalog& catalog) : catalog_(catalog) {}
    int rubric_points(std::span<const std::string> selection, std::string_view response) const;
    JudgeScore score(std::string_view context, std::span<const std::string> selection,
                     std::string_view response) override;

private:
    const dsl::FactorCatalog& catalog_;
};

// Sends the rubric prompt and expects a bare number 0..10 back. A malformed
// reply is retried once; a second failure or a RemoteError falls back to 0.
class RemoteJudge : public ConsistencyJudge {
public:
    explicit RemoteJudge(context::TextGenClient& client, context::GenerationParams params = {})
        : client_(client), params_(std::move(params)) {}
    JudgeScore score(std::string_view context, std::span<const std::string> selection,
                     std::string_view response) override;

private:
    context::TextGenClient& client_;
    context::GenerationParams params_;
};

// Parses a judge reply: a single number, optionally surrounded by whitespace.
std::optional<double> parse_judge_reply(std::string_view reply);

struct RewardBreakdown {
    double r_base = 0.0;
    double p_consistency = 0.0;
    double p_norm = 0.0;
    double r_adjusted = 0.0;
    double p_structural = 0.0;
    double r_final = 0.0;
    bool judge_fallback = false;
    context::ParseStatus status = context::ParseStatus::unparsable;
    std::vector<std::string> selection;
    std::vector<std::string> invalid_ids;
    double portfolio_return = 0.0;
    double benchmark_return = 0.0;
    Date date{};

    std::string to_json() const;  // single line
};

RewardBreakdown final_reward(std::string_view context, std::string_view response_text, std::size_t date_index,
                             const RewardInputs& in, const dsl::FactorCatalog& catalog, ConsistencyJudge& judge,
                             const RewardConfig& config);

}  // namespace factorgate::reward
