#include "factorgate/dsl/catalog.hpp"
#include "factorgate/dsl/parser.hpp"
#include "factorgate/exec/execution.hpp"
#include "factorgate/factor_data.hpp"
#include "factorgate/grpo/grpo.hpp"
#include "factorgate/linear_model.hpp"
#include "factorgate/synthetic.hpp"

#include <benchmark/benchmark.h>

#include <random>

using namespace factorgate;

namespace {

struct Market {
    SyntheticMarket market = generate_synthetic_market(SyntheticSpec{});
    FactorTensor raw = evaluate_catalog(dsl::default_catalog(), market.panel);
    FactorTensor z = cross_sectional_zscore(raw);
    LinearModel model = fit_linear_model(raw, market.panel, {market.panel.dates()[0], market.panel.dates()[59]}, 1);
};

const Market& market() {
    static const Market m;
    return m;
}

}  // namespace

static void BM_ParseCatalog(benchmark::State& state) {
    for (auto _ : state) benchmark::DoNotOptimize(dsl::parse_catalog(dsl::default_catalog_text()));
}
BENCHMARK(BM_ParseCatalog);

static void BM_EvaluateCatalog(benchmark::State& state) {
    const auto& m = market();
    for (auto _ : state) benchmark::DoNotOptimize(evaluate_catalog(dsl::default_catalog(), m.market.panel));
}
BENCHMARK(BM_EvaluateCatalog)->Unit(benchmark::kMillisecond);

static void BM_FitLinearModel(benchmark::State& state) {
    const auto& m = market();
    const auto& d = m.market.panel.dates();
    for (auto _ : state) benchmark::DoNotOptimize(fit_linear_model(m.raw, m.market.panel, {d[0], d[59]}, 1));
}
BENCHMARK(BM_FitLinearModel)->Unit(benchmark::kMillisecond);

static void BM_Vwap(benchmark::State& state) {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(1.0, 100.0);
    std::vector<MinuteBar> bars(30);
    for (int i = 0; i < 30; ++i) {
        bars[i].minute_index = i + 1;
        bars[i].price = u(rng);
        bars[i].volume = u(rng);
    }
    for (auto _ : state) benchmark::DoNotOptimize(exec::compute_vwap(bars));
}
BENCHMARK(BM_Vwap);

static void BM_Backtest(benchmark::State& state) {
    const auto& m = market();
    const auto& d = m.market.panel.dates();
    exec::BacktestInputs in{m.market.panel, &m.market.minutes, m.z, m.model};
    exec::Policy policy = [](Date, std::size_t) { return std::vector<std::string>{"alpha_012"}; };
    exec::ExecutionConfig cfg;
    for (auto _ : state) benchmark::DoNotOptimize(exec::run_backtest(in, policy, cfg, d[60], d[119]));
}
BENCHMARK(BM_Backtest)->Unit(benchmark::kMillisecond);

static void BM_GrpoLoss(benchmark::State& state) {
    grpo::ToyPolicy policy(40, grpo::kNumFeatures, 15), ref(40, grpo::kNumFeatures, 15);
    std::mt19937_64 rng(3);
    std::vector<double> phi{1.0, 0.5, 1.2};
    auto group = grpo::sample_group(policy, ref, phi, 8, rng);
    for (std::size_t i = 0; i < group.responses.size(); ++i) group.rewards.push_back(static_cast<double>(i));
    grpo::GrpoConfig cfg;
    for (auto _ : state) benchmark::DoNotOptimize(grpo::grpo_loss(policy, group, cfg));
}
BENCHMARK(BM_GrpoLoss);
BENCHMARK_MAIN();
