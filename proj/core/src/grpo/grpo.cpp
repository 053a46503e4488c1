#include "factorgate/grpo/grpo.hpp"

#include "factorgate/errors.hpp"
#include "factorgate/log.hpp"
#include "factorgate/stats.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

namespace factorgate::grpo {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void check_lengths(std::size_t a, std::size_t b, const char* what) {
    if (a != b) throw Error(std::string(what) + ": length mismatch (" + std::to_string(a) + " vs " + std::to_string(b) + ")");
}

std::string fmt12(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

}  // namespace

void GrpoConfig::validate() const {
    if (!(epsilon > 0.0 && epsilon < 1.0)) throw ConfigError("epsilon must be in (0, 1)");
    if (!(beta >= 0.0)) throw ConfigError("beta must be >= 0");
    if (group_size < 2) throw ConfigError("group size G must be >= 2");
    if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
    if (iterations < 0) throw ConfigError("iterations must be >= 0");
    if (inner_epochs < 1) throw ConfigError("inner epochs must be >= 1");
    if (!(std_floor > 0.0)) throw ConfigError("std floor must be positive");
}

void GrpoGroup::validate() const {
    if (responses.size() < 2) throw Error("GRPO group needs at least 2 responses");
    if (!rewards.empty() && rewards.size() != responses.size()) throw Error("GRPO group: one reward per response");
    for (double r : rewards) {
        if (!std::isfinite(r)) throw Error("GRPO group: non-finite reward");
    }
    for (const auto& r : responses) {
        const std::size_t n = r.tokens.size();
        if (r.logp_current.size() != n || r.logp_old.size() != n || r.logp_ref.size() != n) {
            throw Error("GRPO group: log-prob sequences must match the token count");
        }
    }
}

std::vector<double> normalize_advantages(std::span<const double> rewards, double std_floor) {
    if (rewards.size() < 2) throw Error("normalize_advantages: need at least 2 rewards");
    const double g = static_cast<double>(rewards.size());
    double mean = 0.0;
    for (double r : rewards) mean += r;
    mean /= g;
    double var = 0.0;
    for (double r : rewards) var += (r - mean) * (r - mean);
    const double sd = std::sqrt(var / g);
    std::vector<double> adv(rewards.size(), 0.0);
    if (!(sd >= std_floor)) return adv;
    for (std::size_t i = 0; i < rewards.size(); ++i) adv[i] = (rewards[i] - mean) / sd;
    return adv;
}

std::vector<double> token_ratios(std::span<const double> cur, std::span<const double> old) {
    check_lengths(cur.size(), old.size(), "token_ratios");
    std::vector<double> out(cur.size());
    for (std::size_t t = 0; t < cur.size(); ++t) out[t] = std::exp(cur[t] - old[t]);
    return out;
}

std::vector<double> kl_terms(std::span<const double> cur, std::span<const double> ref) {
    check_lengths(cur.size(), ref.size(), "kl_penalty");
    std::vector<double> out(cur.size());
    for (std::size_t t = 0; t < cur.size(); ++t) {
        const double x = ref[t] - cur[t];
        out[t] = std::expm1(x) - x;
    }
    return out;
}

double kl_penalty(std::span<const double> cur, std::span<const double> ref) {
    auto k = kl_terms(cur, ref);
    if (k.empty()) return 0.0;
    double s = 0.0;
    for (double v : k) s += v;
    return s / static_cast<double>(k.size());
}

ObjectiveValue grpo_objective(const GrpoGroup& group, const GrpoConfig& config) {
    group.validate();
    if (group.rewards.size() != group.responses.size()) throw Error("grpo_objective: rewards missing");
    ObjectiveValue v;
    v.advantages = normalize_advantages(group.rewards, config.std_floor);
    const double g = static_cast<double>(group.responses.size());
    const double lo = 1.0 - config.epsilon, hi = 1.0 + config.epsilon;
    std::size_t tokens = 0, clipped = 0;
    double kl_sum = 0.0;
    v.dlogp.resize(group.responses.size());

    for (std::size_t i = 0; i < group.responses.size(); ++i) {
        const auto& r = group.responses[i];
        const double a = v.advantages[i];
        const std::size_t n = r.tokens.size();
        v.dlogp[i].assign(n, 0.0);
        if (n == 0) continue;
        const double w = 1.0 / (g * static_cast<double>(n));
        auto rho = token_ratios(r.logp_current, r.logp_old);
        auto kl = kl_terms(r.logp_current, r.logp_ref);
        for (std::size_t t = 0; t < n; ++t) {
            const double unclipped = rho[t] * a;
            const double clip = std::clamp(rho[t], lo, hi) * a;
            const bool saturated = (a >= 0.0 && rho[t] > hi) || (a < 0.0 && rho[t] < lo);
            v.objective += w * std::min(unclipped, clip);
            v.dlogp[i][t] += saturated ? 0.0 : w * unclipped;
            if (saturated) ++clipped;

            // d k3 / d logp_current = 1 - exp(logp_ref - logp_current)
            const double dkl = 1.0 - std::exp(r.logp_ref[t] - r.logp_current[t]);
            const double kl_w = config.kl_placement == KlPlacement::per_token ? w : 1.0 / g;
            v.objective -= config.beta * kl_w * kl[t];
            v.dlogp[i][t] -= config.beta * kl_w * dkl;
            kl_sum += kl[t];
        }
        tokens += n;
    }
    v.mean_kl = tokens ? kl_sum / static_cast<double>(tokens) : 0.0;
    v.clip_fraction = tokens ? static_cast<double>(clipped) / static_cast<double>(tokens) : 0.0;
    return v;
}

ToyPolicy::ToyPolicy(std::size_t num_factors, std::size_t num_features, std::size_t max_length)
    : k_(num_factors), f_(num_features), max_len_(max_length) {
    if (k_ == 0) throw ConfigError("toy policy needs at least one factor");
    if (f_ == 0) throw ConfigError("toy policy needs at least one feature");
    if (max_len_ == 0) throw ConfigError("toy policy max length must be >= 1");
    params_.assign(vocab() * f_ + (k_ + 1) * vocab(), 0.0);
}

std::vector<double> ToyPolicy::logits(std::span<const double> features, int prev) const {
    check_lengths(features.size(), f_, "toy policy features");
    std::vector<double> z(vocab(), 0.0);
    const std::size_t row = prev < 0 ? k_ : static_cast<std::size_t>(prev);
    const double* b = params_.data() + vocab() * f_ + row * vocab();
    for (std::size_t v = 0; v < vocab(); ++v) {
        double s = b[v];
        for (std::size_t f = 0; f < f_; ++f) s += params_[v * f_ + f] * features[f];
        z[v] = s;
    }
    return z;
}

std::vector<double> ToyPolicy::step_probs(std::span<const double> features, std::span<const int> prefix) const {
    auto z = logits(features, prefix.empty() ? -1 : prefix.back());
    for (int t : prefix) {
        if (t >= 0 && static_cast<std::size_t>(t) < k_) z[static_cast<std::size_t>(t)] = kNegInf;
    }
    double m = *std::max_element(z.begin(), z.end());
    double s = 0.0;
    for (auto& v : z) {
        v = std::isinf(v) ? 0.0 : std::exp(v - m);
        s += v;
    }
    for (auto& v : z) v /= s;
    return z;
}

std::vector<double> ToyPolicy::log_probs(std::span<const double> features, std::span<const int> tokens) const {
    std::vector<double> out;
    out.reserve(tokens.size());
    for (std::size_t t = 0; t < tokens.size(); ++t) {
        auto p = step_probs(features, tokens.subspan(0, t));
        const auto tok = static_cast<std::size_t>(tokens[t]);
        if (tok >= vocab()) throw Error("token out of vocabulary");
        out.push_back(std::log(p[tok]));
    }
    return out;
}

void ToyPolicy::accumulate_grad(std::span<const double> features, std::span<const int> tokens,
                                std::span<const double> weights, std::span<double> grad) const {
    check_lengths(tokens.size(), weights.size(), "accumulate_grad");
    check_lengths(grad.size(), params_.size(), "accumulate_grad");
    for (std::size_t t = 0; t < tokens.size(); ++t) {
        if (weights[t] == 0.0) continue;
        auto p = step_probs(features, tokens.subspan(0, t));
        const std::size_t row = t == 0 ? k_ : static_cast<std::size_t>(tokens[t - 1]);
        double* gb = grad.data() + vocab() * f_ + row * vocab();
        for (std::size_t v = 0; v < vocab(); ++v) {
            // d logp / d logit_v = [v == token] - p_v; masked entries have p_v = 0 and no dependence.
            const bool masked = v < k_ && std::find(tokens.begin(), tokens.begin() + static_cast<long>(t),
                                                    static_cast<int>(v)) != tokens.begin() + static_cast<long>(t);
            if (masked) continue;
            const double d = weights[t] * ((static_cast<int>(v) == tokens[t] ? 1.0 : 0.0) - p[v]);
            gb[v] += d;
            for (std::size_t f = 0; f < f_; ++f) grad[v * f_ + f] += d * features[f];
        }
    }
}

std::vector<int> ToyPolicy::sample(std::span<const double> features, std::mt19937_64& rng) const {
    std::vector<int> seq;
    std::uniform_real_distribution<double> u(0.0, 1.0);
    while (seq.size() < max_len_) {
        auto p = step_probs(features, seq);
        double x = u(rng), c = 0.0;
        int pick = stop_token();
        for (std::size_t v = 0; v < vocab(); ++v) {
            if (p[v] == 0.0) continue;
            c += p[v];
            if (x < c) {
                pick = static_cast<int>(v);
                break;
            }
            pick = static_cast<int>(v);  // rounding: fall back to the last reachable token
        }
        seq.push_back(pick);
        if (pick == stop_token()) break;
    }
    return seq;
}

void ToyPolicy::save(std::ostream& out, std::span<const std::string> ids) const {
    check_lengths(ids.size(), k_, "toy policy ids");
    out << "factorgate-toy-policy 1\n";
    out << "factors " << k_ << "\nfeatures " << f_ << "\nmax_length " << max_len_ << "\n";
    for (const auto& id : ids) out << "id " << id << "\n";
    out << "params " << params_.size() << "\n";
    for (double p : params_) out << fmt12(p) << "\n";
}

ToyPolicy ToyPolicy::load(std::istream& in, std::vector<std::string>* ids) {
    std::string word;
    int version = 0;
    if (!(in >> word >> version) || word != "factorgate-toy-policy" || version != 1) {
        throw DataError("not a toy policy checkpoint");
    }
    std::size_t k = 0, f = 0, len = 0, n = 0;
    auto expect = [&](const char* key, std::size_t& v) {
        if (!(in >> word >> v) || word != key) throw DataError(std::string("checkpoint: expected ") + key);
    };
    expect("factors", k);
    expect("features", f);
    expect("max_length", len);
    ToyPolicy p(k, f, len);
    std::vector<std::string> names;
    for (std::size_t i = 0; i < k; ++i) {
        std::string id;
        if (!(in >> word >> id) || word != "id") throw DataError("checkpoint: expected id");
        names.push_back(id);
    }
    expect("params", n);
    if (n != p.params_.size()) throw DataError("checkpoint: parameter count mismatch");
    for (auto& v : p.params_) {
        if (!(in >> word)) throw DataError("checkpoint: truncated parameters");
        v = std::strtod(word.c_str(), nullptr);
    }
    if (ids) *ids = std::move(names);
    return p;
}

double exact_sequence_kl(const ToyPolicy& current, const ToyPolicy& ref, std::span<const double> features,
                         std::span<const int> tokens) {
    double kl = 0.0;
    for (std::size_t t = 0; t < tokens.size(); ++t) {
        auto p = current.step_probs(features, tokens.subspan(0, t));
        auto q = ref.step_probs(features, tokens.subspan(0, t));
        for (std::size_t v = 0; v < p.size(); ++v) {
            if (p[v] > 0.0) kl += p[v] * (std::log(p[v]) - std::log(q[v]));
        }
    }
    return kl;
}

GrpoGroup sample_group(const ToyPolicy& policy, const ToyPolicy& ref, std::span<const double> features,
                       int group_size, std::mt19937_64& rng) {
    if (group_size < 2) throw ConfigError("group size G must be >= 2");
    GrpoGroup g;
    g.features.assign(features.begin(), features.end());
    for (int i = 0; i < group_size; ++i) {
        SampledResponse r;
        r.tokens = policy.sample(features, rng);
        r.logp_old = policy.log_probs(features, r.tokens);
        r.logp_current = r.logp_old;
        r.logp_ref = ref.log_probs(features, r.tokens);
        g.responses.push_back(std::move(r));
    }
    return g;
}

LossAndGrad grpo_loss(const ToyPolicy& policy, GrpoGroup& group, const GrpoConfig& config) {
    if (group.responses.empty()) throw Error("grpo_loss: empty group");
    for (auto& r : group.responses) r.logp_current = policy.log_probs(group.features, r.tokens);
    LossAndGrad out;
    out.value = grpo_objective(group, config);
    out.grad.assign(policy.num_params(), 0.0);
    for (std::size_t i = 0; i < group.responses.size(); ++i) {
        policy.accumulate_grad(group.features, group.responses[i].tokens, out.value.dlogp[i], out.grad);
    }
    return out;
}

std::vector<double> market_features(const MarketPanel& panel, std::size_t d) {
    std::vector<double> phi{1.0, 0.0, 0.0};
    if (d == 0) return phi;
    const auto& close = panel.field(Field::close);
    const std::size_t s = d - 1;  // last completed session
    const std::size_t back = s >= 5 ? s - 5 : 0;
    std::vector<double> r5, r1;
    for (std::size_t i = 0; i < panel.num_tickers(); ++i) {
        double a = close(back, i), b = close(s, i);
        if (!is_missing(a) && !is_missing(b) && a > 0) r5.push_back(b / a - 1.0);
        if (s >= 1) {
            double p = close(s - 1, i);
            if (!is_missing(p) && !is_missing(b) && p > 0) r1.push_back(b / p - 1.0);
        }
    }
    double m5 = stats::mean(r5), disp = stats::stddev(r1, false);
    phi[1] = is_missing(m5) ? 0.0 : 100.0 * m5;
    phi[2] = is_missing(disp) ? 0.0 : 100.0 * disp;
    return phi;
}

std::string render_response(std::span<const int> tokens, std::span<const std::string> ids, Date date) {
    std::string text = "Screening decision for " + format_date(date) +
                       ", based on the factor profiles and the previous session's market state.\n";
    std::string sel;
    for (int t : tokens) {
        if (t < 0 || static_cast<std::size_t>(t) >= ids.size()) continue;  // STOP
        const auto& id = ids[static_cast<std::size_t>(t)];
        text += "Activate " + id + " for its fit with the current regime.\n";
        sel += (sel.empty() ? "" : ", ") + id;
    }
    if (sel.empty()) text += "No factor fits today; stay in cash.\n";
    return text + "<selection>" + sel + "</selection>\n";
}

std::string IterationLog::to_json() const {
    nlohmann::ordered_json j;
    j["iter"] = iter;
    j["date"] = format_date(date);
    j["mean_reward"] = mean_reward;
    j["mean_kl"] = mean_kl;
    j["clip_fraction"] = clip_fraction;
    nlohmann::ordered_json h = nlohmann::ordered_json::object();
    for (const auto& [id, n] : histogram) h[id] = n;
    j["histogram"] = h;
    return j.dump();
}

TrainResult train_toy_policy(const ToyEnvironment& env, const GrpoConfig& config, std::ostream* log_out) {
    config.validate();
    env.reward.validate();
    if (env.vocabulary.empty()) throw ConfigError("toy environment has an empty vocabulary");
    if (env.first_date == 0 || env.first_date > env.last_date) throw ConfigError("toy environment date range invalid");
    for (const auto& id : env.vocabulary) {
        if (!env.catalog.contains(id)) throw ConfigError("vocabulary id " + id + " is not in the catalog");
    }

    TrainResult res{ToyPolicy(env.vocabulary.size(), kNumFeatures, env.max_length),
                    ToyPolicy(env.vocabulary.size(), kNumFeatures, env.max_length),
                    {}};
    std::mt19937_64 rng(config.seed);
    std::uniform_int_distribution<std::size_t> pick_date(env.first_date, env.last_date);
    reward::MockJudge judge(env.catalog);

    for (int it = 0; it < config.iterations; ++it) {
        const std::size_t d = pick_date(rng);
        const Date date = env.inputs.panel.dates()[d];
        auto phi = market_features(env.inputs.panel, d);
        GrpoGroup group = sample_group(res.policy, res.reference, phi, config.group_size, rng);
        group.query = format_date(date);

        IterationLog entry;
        entry.iter = it;
        entry.date = date;
        std::vector<int> counts(env.vocabulary.size(), 0);
        for (const auto& r : group.responses) {
            const std::string text = render_response(r.tokens, env.vocabulary, date);
            auto b = reward::final_reward(group.query, text, d, env.inputs, env.catalog, judge, env.reward);
            group.rewards.push_back(b.r_final);
            for (int t : r.tokens) {
                if (t != res.policy.stop_token()) ++counts[static_cast<std::size_t>(t)];
            }
        }
        for (double r : group.rewards) entry.mean_reward += r / static_cast<double>(group.rewards.size());

        for (int e = 0; e < config.inner_epochs; ++e) {
            auto lg = grpo_loss(res.policy, group, config);
            bool finite = std::isfinite(lg.value.objective);
            for (double g : lg.grad) finite = finite && std::isfinite(g);
            if (!finite) {
                double mean_abs = 0.0;
                for (double a : lg.value.advantages) mean_abs += std::fabs(a) / static_cast<double>(lg.value.advantages.size());
                throw Error("GRPO diverged at iteration " + std::to_string(it) + ": non-finite objective or gradient (mean |A| = " +
                            std::to_string(mean_abs) + ")");
            }
            if (e == 0) {
                entry.mean_kl = lg.value.mean_kl;
                entry.clip_fraction = lg.value.clip_fraction;
            }
            auto params = res.policy.params();
            for (std::size_t p = 0; p < params.size(); ++p) params[p] += config.learning_rate * lg.grad[p];
        }
        for (std::size_t v = 0; v < counts.size(); ++v) {
            if (counts[v]) entry.histogram.emplace_back(env.vocabulary[v], counts[v]);
        }
        if (log_out) *log_out << entry.to_json() << '\n';
        res.history.push_back(std::move(entry));
    }
    return res;
}

double selection_rate(const ToyPolicy& policy, const ToyEnvironment& env, std::string_view factor, int samples,
                      std::uint64_t seed) {
    auto it = std::find(env.vocabulary.begin(), env.vocabulary.end(), factor);
    if (it == env.vocabulary.end()) throw ConfigError("factor " + std::string(factor) + " is not in the vocabulary");
    const int token = static_cast<int>(it - env.vocabulary.begin());
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick_date(env.first_date, env.last_date);
    int hits = 0;
    for (int s = 0; s < samples; ++s) {
        auto phi = market_features(env.inputs.panel, pick_date(rng));
        auto seq = policy.sample(phi, rng);
        hits += std::find(seq.begin(), seq.end(), token) != seq.end();
    }
    return samples ? static_cast<double>(hits) / samples : 0.0;
}

}  // namespace factorgate::grpo
