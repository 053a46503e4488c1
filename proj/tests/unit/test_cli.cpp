#include "app/app.hpp"
#include "app/config.hpp"
#include "factorgate/baselines/baselines.hpp"
#include "factorgate/errors.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include "json.hpp"

#include <cstdlib>
#include <sstream>

using namespace factorgate;
using factorgate::testing::TempDir;
using factorgate::testing::read_file;
using factorgate::testing::write_file;

namespace {

const std::string kFixtureDir = std::string(FACTORGATE_TEST_DATA_DIR) + "/cli_small";

struct Result {
    int code = 0;
    std::string out, err;
};

Result run(std::vector<std::string> args) {
    std::ostringstream out, err;
    Result r;
    r.code = app::run(args, out, err);
    r.out = out.str();
    r.err = err.str();
    return r;
}

}  // namespace

TEST(Config, ParsesCommentsAndRejectsTypos) {
    auto c = app::Config::parse("# comment\n\nseed = 11\nexec.top_n=4\nsweep.top_n = 5, 10 15\n");
    EXPECT_EQ(c.integer("seed", 0), 11);
    EXPECT_EQ(c.integer("exec.top_n", 0), 4);
    EXPECT_EQ(c.int_list("sweep.top_n", {}), (std::vector<int>{5, 10, 15}));
    EXPECT_EQ(c.canonical(), "exec.top_n=4\nseed=11\nsweep.top_n=5, 10 15\n");
    EXPECT_THROW(app::Config::parse("exec.topn = 4\n"), ConfigError);
    EXPECT_THROW(app::Config::parse("seed = 1\nseed = 2\n"), ConfigError);
    EXPECT_THROW(app::Config::parse("just words\n"), ConfigError);
    EXPECT_THROW(c.apply_override("novalue"), ConfigError);
    c.apply_override("seed=12");
    EXPECT_EQ(c.integer("seed", 0), 12);
    EXPECT_THROW(app::Config::parse("seed = x\n").integer("seed", 0), ConfigError);
    EXPECT_THROW(app::Config::parse("exec.hold_if_unchanged = maybe\n").flag("exec.hold_if_unchanged", false),
                 ConfigError);
}

TEST(Config, Sha256KnownVector) {
    EXPECT_EQ(app::sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Cli, UsageErrorsExitOne) {
    EXPECT_EQ(run({}).code, app::kExitUsage);
    EXPECT_EQ(run({"nonsense"}).code, app::kExitUsage);
    EXPECT_EQ(run({"reward-eval"}).code, app::kExitUsage);
    TempDir tmp("cli_usage");
    EXPECT_EQ(run({"backtest", "-s", "strategy=bogus", "-o", (tmp / "a").string()}).code, app::kExitUsage);
    EXPECT_EQ(run({"--help"}).code, app::kExitOk);
}

TEST(Cli, DataErrorsExitTwo) {
    TempDir tmp("cli_data");
    auto r = run({"backtest", "-s", "data.daily=" + (tmp / "missing.csv").string(), "-o", (tmp / "a").string()});
    EXPECT_EQ(r.code, app::kExitData);
    EXPECT_NE(r.err.find("error"), std::string::npos);
}

TEST(Cli, RemoteErrorsExitThreeUnlessFallbackRequested) {
    TempDir tmp("cli_remote");
    std::vector<std::string> base{"-s", "synth.tickers=20", "-s", "synth.days=60", "-s", "client.kind=remote",
                                  "-s", "client.endpoint=http://127.0.0.1:1", "-s", "client.retries=0"};
    auto args = base;
    args.insert(args.end(), {"context", "--date", "2024-02-20", "-o", (tmp / "a").string()});
    EXPECT_EQ(run(args).code, app::kExitRemote);
    args = base;
    args.insert(args.end(), {"-s", "client.fallback_to_mock=true", "context", "--date", "2024-02-20", "-o",
                             (tmp / "b").string()});
    auto r = run(args);
    EXPECT_EQ(r.code, app::kExitOk) << r.err;
    EXPECT_NE(r.err.find("using mock"), std::string::npos);
}

TEST(Cli, BacktestMatchesGoldenMetrics) {
    TempDir tmp("cli_golden");
    auto r = run({"-c", kFixtureDir + "/backtest.cfg", "backtest", "-o", (tmp / "run").string()});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto metrics = read_file(tmp / "run" / "metrics.json");
    const std::string golden_path = kFixtureDir + "/golden_metrics.json";
    if (std::getenv("FACTORGATE_UPDATE_GOLDEN")) write_file(golden_path, metrics);
    EXPECT_EQ(metrics, read_file(golden_path));

    auto manifest = nlohmann::json::parse(read_file(tmp / "run" / "manifest.json"));
    auto cfg = app::Config::load(kFixtureDir + "/backtest.cfg");
    EXPECT_EQ(manifest["config_hash"], app::sha256_hex(cfg.canonical()));
    EXPECT_EQ(manifest["seed"], 3);
    EXPECT_EQ(manifest["command"], "backtest");
    EXPECT_EQ(manifest["outputs"].size(), 3u);
}

TEST(Cli, RewardEvalUnparsableResponse) {
    TempDir tmp("cli_reward");
    write_file(tmp / "response.txt", "I would rather not choose anything today.");
    auto r = run({"-c", kFixtureDir + "/backtest.cfg", "reward-eval", "--date", "2024-03-05", "--response",
                  (tmp / "response.txt").string(), "-o", (tmp / "run").string()});
    ASSERT_EQ(r.code, 0) << r.err;
    auto j = nlohmann::json::parse(read_file(tmp / "run" / "reward.json"));
    EXPECT_EQ(j["status"], "unparsable");
    EXPECT_EQ(j["p_structural"].get<double>(), 5.0);
    EXPECT_EQ(j["r_final"].get<double>(), j["r_adjusted"].get<double>() - 5.0);
}

TEST(Cli, SweepCsvInvariants) {
    TempDir tmp("cli_sweep");
    auto r = run({"-c", kFixtureDir + "/backtest.cfg", "-s", "sweep.top_n=3,5", "-s", "sweep.holding_days=1,0,5",
                  "-s", "sweep.threads=2", "sweep", "-o", (tmp / "run").string()});
    ASSERT_EQ(r.code, 0) << r.err;
    std::istringstream in(read_file(tmp / "run" / "sweep.csv"));
    auto grid = baselines::read_sweep_csv(in);
    ASSERT_EQ(grid.cells.size(), 6u);
    EXPECT_EQ(grid.top_n, (std::vector<int>{3, 5}));
    EXPECT_EQ(grid.holding_days, (std::vector<int>{1, 0, 5}));
    for (const auto& c : grid.cells) {
        EXPECT_EQ(c.ok(), c.holding_days != 0);
        if (c.ok()) {
            EXPECT_GE(c.metrics.mdd, 0.0);
            EXPECT_LE(c.metrics.mdd, 1.0);
            EXPECT_GT(c.metrics.cr, -1.0);
        }
    }
}

TEST(Cli, RunsAreByteIdentical) {
    TempDir tmp("cli_repro");
    auto go = [&](const std::string& name, std::vector<std::string> args) {
        std::vector<std::string> full{"-s", "seed=5", "-s", "synth.tickers=30", "-s", "synth.days=90",
                                      "-s", "grpo.iterations=60", "-s", "grpo.vocabulary=alpha_001,alpha_012,alpha_041"};
        full.insert(full.end(), args.begin(), args.end());
        full.insert(full.end(), {"-o", (tmp / name).string()});
        auto r = run(full);
        EXPECT_EQ(r.code, 0) << r.err;
    };
    go("bt1", {"-s", "exec.price_mode=vwap", "backtest"});
    go("bt2", {"-s", "exec.price_mode=vwap", "backtest"});
    go("g1", {"-s", "reward.mode=vwap", "grpo-train"});
    go("g2", {"-s", "reward.mode=vwap", "grpo-train"});
    EXPECT_EQ(read_file(tmp / "bt1" / "metrics.json"), read_file(tmp / "bt2" / "metrics.json"));
    EXPECT_EQ(read_file(tmp / "bt1" / "trades.jsonl"), read_file(tmp / "bt2" / "trades.jsonl"));
    EXPECT_EQ(read_file(tmp / "g1" / "train_log.jsonl"), read_file(tmp / "g2" / "train_log.jsonl"));
    EXPECT_EQ(read_file(tmp / "g1" / "policy.txt"), read_file(tmp / "g2" / "policy.txt"));
    EXPECT_EQ(read_file(tmp / "bt1" / "manifest.json"), read_file(tmp / "bt2" / "manifest.json"));
    EXPECT_FALSE(read_file(tmp / "g1" / "train_log.jsonl").empty());
}

TEST(Cli, ToyPolicyCheckpointDrivesBacktest) {
    TempDir tmp("cli_toy");
    std::vector<std::string> base{"-c", kFixtureDir + "/backtest.cfg", "-s", "grpo.iterations=30", "-s",
                                  "grpo.vocabulary=alpha_012,alpha_033"};
    auto args = base;
    args.insert(args.end(), {"grpo-train", "-o", (tmp / "train").string()});
    ASSERT_EQ(run(args).code, 0);
    args = base;
    args.insert(args.end(), {"-s", "strategy=toy_policy", "-s", "strategy.checkpoint=" + (tmp / "train" / "policy.txt").string(),
                             "backtest", "-o", (tmp / "bt").string()});
    auto r = run(args);
    EXPECT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("\"CR\""), std::string::npos);
}

TEST(Cli, ContextAndScreen) {
    TempDir tmp("cli_context");
    auto r = run({"-c", kFixtureDir + "/backtest.cfg", "context", "--date", "2024-03-05", "-o", (tmp / "ctx").string()});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("2024-03-05"), std::string::npos);
    r = run({"-c", kFixtureDir + "/backtest.cfg", "screen", "--date", "2024-03-05", "-o", (tmp / "sc").string()});
    ASSERT_EQ(r.code, 0) << r.err;
    auto j = nlohmann::json::parse(read_file(tmp / "sc" / "screen.json"));
    EXPECT_EQ(j["status"], "clean");
    EXPECT_FALSE(j["selection"].empty());
    // Context dates inside the fit window would leak the profiles' data.
    r = run({"-c", kFixtureDir + "/backtest.cfg", "context", "--date", "2024-02-01", "-o", (tmp / "bad").string()});
    EXPECT_NE(r.code, 0);
}
