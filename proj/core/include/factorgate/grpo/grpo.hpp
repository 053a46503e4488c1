#pragma once

#include "factorgate/dsl/catalog.hpp"
#include "factorgate/market.hpp"
#include "factorgate/reward/reward.hpp"

#include <cstdint>
#include <iosfwd>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace factorgate::grpo {

enum class KlPlacement { per_token, sequence };

struct GrpoConfig {
    double epsilon = 0.2;
    double beta = 0.01;
    int group_size = 8;
    double learning_rate = 0.05;
    int iterations = 500;
    int inner_epochs = 1;
    std::uint64_t seed = 7;
    double std_floor = 1e-8;
    KlPlacement kl_placement = KlPlacement::per_token;

    void validate() const;  // throws ConfigError
};

struct SampledResponse {
    std::vector<int> tokens;  // factor indices, STOP last unless cut at max length
    std::vector<double> logp_current;
    std::vector<double> logp_old;
    std::vector<double> logp_ref;
};

struct GrpoGroup {
    std::string query;  // context id (decision date)
    std::vector<double> features;
    std::vector<SampledResponse> responses;
    std::vector<double> rewards;

    void validate() const;  // throws Error on broken invariants
};

// Group-relative advantages with population std; all zero when std < floor.
std::vector<double> normalize_advantages(std::span<const double> rewards, double std_floor = 1e-8);

std::vector<double> token_ratios(std::span<const double> logp_current, std::span<const double> logp_old);

// Per-token k3 estimates exp(x) - x - 1 with x = logp_ref - logp_current.
std::vector<double> kl_terms(std::span<const double> logp_current, std::span<const double> logp_ref);
// Mean of kl_terms over the tokens.
double kl_penalty(std::span<const double> logp_current, std::span<const double> logp_ref);

struct ObjectiveValue {
    double objective = 0.0;
    // dJ / d logp_current, per response and token.
    std::vector<std::vector<double>> dlogp;
    double mean_kl = 0.0;        // token-averaged k3 estimate
    double clip_fraction = 0.0;  // share of tokens on a clipped, zero-gradient branch
    std::vector<double> advantages;
};

// The clipped surrogate minus beta * KL, averaged per response then over
// the group, evaluated on the stored log-probabilities.
ObjectiveValue grpo_objective(const GrpoGroup& group, const GrpoConfig& config);

// Autoregressive categorical policy over K factors plus STOP. At each step
// logits = W * features + B[previous token] (previous = START at step 0);
// tokens already chosen are masked. After max_length factors the sequence
// ends without a recorded STOP.
class ToyPolicy {
public:
    ToyPolicy(std::size_t num_factors, std::size_t num_features, std::size_t max_length);

    std::size_t num_factors() const { return k_; }
    std::size_t vocab() const { return k_ + 1; }
    int stop_token() const { return static_cast<int>(k_); }
    std::size_t num_features() const { return f_; }
    std::size_t max_length() const { return max_len_; }
    std::size_t num_params() const { return params_.size(); }

    std::span<double> params() { return params_; }
    std::span<const double> params() const { return params_; }
    double& w(std::size_t token, std::size_t feature) { return params_[token * f_ + feature]; }
    double& b(std::size_t prev, std::size_t token) { return params_[vocab() * f_ + prev * vocab() + token]; }

    // Next-token distribution after `prefix` (masked entries are 0).
    std::vector<double> step_probs(std::span<const double> features, std::span<const int> prefix) const;

    std::vector<double> log_probs(std::span<const double> features, std::span<const int> tokens) const;

    // Adds d(sum_t weights[t] * logp_t) / dparams to `grad`.
    void accumulate_grad(std::span<const double> features, std::span<const int> tokens,
                         std::span<const double> weights, std::span<double> grad) const;

    std::vector<int> sample(std::span<const double> features, std::mt19937_64& rng) const;

    void save(std::ostream& out, std::span<const std::string> ids) const;
    static ToyPolicy load(std::istream& in, std::vector<std::string>* ids = nullptr);

    friend bool operator==(const ToyPolicy&, const ToyPolicy&) = default;

private:
    std::vector<double> logits(std::span<const double> features, int prev) const;

    std::size_t k_, f_, max_len_;
    std::vector<double> params_;  // W (vocab x f) then B ((k + 1) x vocab), START = row k
};

// Sum over steps of the exact KL(current || ref) of the next-token
// distributions along `tokens`.
double exact_sequence_kl(const ToyPolicy& current, const ToyPolicy& ref, std::span<const double> features,
                         std::span<const int> tokens);

// G sequences at temperature 1 with log-probs under the sampling policy
// (current and old) and under `ref`.
GrpoGroup sample_group(const ToyPolicy& policy, const ToyPolicy& ref, std::span<const double> features,
                       int group_size, std::mt19937_64& rng);

struct LossAndGrad {
    ObjectiveValue value;
    std::vector<double> grad;  // dJ / dparams
};

// Re-evaluates logp_current under `policy` and chains the objective's
// token gradients into parameter space.
LossAndGrad grpo_loss(const ToyPolicy& policy, GrpoGroup& group, const GrpoConfig& config);

// [1, 5-day equal-weight return * 100, cross-sectional return dispersion * 100]
// from sessions before date_index.
std::vector<double> market_features(const MarketPanel& panel, std::size_t date_index);

inline constexpr std::size_t kNumFeatures = 3;

// Text response for a token sequence: short rationale plus a selection block.
std::string render_response(std::span<const int> tokens, std::span<const std::string> ids, Date date);

struct ToyEnvironment {
    const reward::RewardInputs& inputs;
    const dsl::FactorCatalog& catalog;
    std::vector<std::string> vocabulary;  // factor ids the policy can emit
    std::size_t first_date = 0;            // decision dates sampled uniformly from [first, last]
    std::size_t last_date = 0;
    reward::RewardConfig reward;
    std::size_t max_length = 15;
};

struct IterationLog {
    int iter = 0;
    Date date{};
    double mean_reward = 0.0;
    double mean_kl = 0.0;
    double clip_fraction = 0.0;
    std::vector<std::pair<std::string, int>> histogram;  // selected-factor counts, vocabulary order

    std::string to_json() const;
};

struct TrainResult {
    ToyPolicy policy;
    ToyPolicy reference;
    std::vector<IterationLog> history;
};

// Throws Error when a gradient or objective turns non-finite.
TrainResult train_toy_policy(const ToyEnvironment& env, const GrpoConfig& config, std::ostream* log_out = nullptr);

// Share of `samples` sequences (features from random environment dates)
// that contain `factor`.
double selection_rate(const ToyPolicy& policy, const ToyEnvironment& env, std::string_view factor, int samples,
                      std::uint64_t seed);

}  // namespace factorgate::grpo
