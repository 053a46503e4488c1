#include "factorgate/errors.hpp"
#include "factorgate/grpo/grpo.hpp"
#include "toy_world.hpp"

#include <gtest/gtest.h>

#include "json.hpp"

#include <cmath>
#include <limits>
#include <sstream>

using namespace factorgate;
using namespace factorgate::grpo;
using factorgate::testing::ToyWorld;

TEST(Training, PlantedFactorDominates) {
    ToyWorld w(0.01);
    GrpoConfig cfg;
    cfg.iterations = 500;
    std::ostringstream log;
    auto res = train_toy_policy(w.env, cfg, &log);
    ASSERT_EQ(res.history.size(), 500u);
    EXPECT_GT(selection_rate(res.policy, w.env, "alpha_012", 4000, 1), 0.9);
    EXPECT_LT(selection_rate(res.reference, w.env, "alpha_012", 4000, 1), 0.6);

    std::istringstream lines(log.str());
    std::string line;
    int n = 0;
    while (std::getline(lines, line)) {
        auto j = nlohmann::json::parse(line);
        EXPECT_EQ(j["iter"].get<int>(), n);
        EXPECT_TRUE(j.contains("mean_reward") && j.contains("mean_kl") && j.contains("clip_fraction"));
        EXPECT_TRUE(j["histogram"].is_object());
        ++n;
    }
    EXPECT_EQ(n, 500);
}

TEST(Training, Deterministic) {
    ToyWorld w(0.01);
    GrpoConfig cfg;
    cfg.iterations = 40;
    auto a = train_toy_policy(w.env, cfg);
    auto b = train_toy_policy(w.env, cfg);
    EXPECT_EQ(a.policy, b.policy);
    EXPECT_EQ(a.reference, b.reference);
}

TEST(Training, NullMarketHasNoTrend) {
    double slope_sum = 0, var_sum = 0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        ToyWorld w(0.0, seed);
        GrpoConfig cfg;
        cfg.seed = seed;
        auto res = train_toy_policy(w.env, cfg);
        auto t = factorgate::testing::reward_trend(res.history);
        EXPECT_LT(std::fabs(t.slope), 3 * t.se) << "seed " << seed;
        slope_sum += t.slope;
        var_sum += t.se * t.se;
    }
    EXPECT_LT(std::fabs(slope_sum / 5), 3 * std::sqrt(var_sum) / 5);
}

TEST(Training, StrongKlKeepsPolicyNearReference) {
    ToyWorld w(0.01);
    GrpoConfig weak, strong;
    strong.beta = 10.0;
    auto a = train_toy_policy(w.env, weak);
    auto b = train_toy_policy(w.env, strong);
    auto tail_kl = [](const TrainResult& r) {
        double s = 0;
        for (std::size_t i = r.history.size() - 50; i < r.history.size(); ++i) s += r.history[i].mean_kl / 50;
        return s;
    };
    EXPECT_LT(tail_kl(b), tail_kl(a));
}

TEST(Training, DivergenceGuard) {
    ToyWorld w(0.01);
    GrpoConfig cfg;
    cfg.learning_rate = std::numeric_limits<double>::infinity();
    cfg.iterations = 50;
    EXPECT_THROW(train_toy_policy(w.env, cfg), Error);
}

TEST(Training, EnvironmentValidation) {
    ToyWorld w(0.01);
    auto env = w.env;
    env.vocabulary = {"alpha_012", "not_a_factor"};
    EXPECT_THROW(train_toy_policy(env, GrpoConfig{}), ConfigError);
    auto early = w.env;
    early.first_date = 0;
    EXPECT_THROW(train_toy_policy(early, GrpoConfig{}), ConfigError);
}
