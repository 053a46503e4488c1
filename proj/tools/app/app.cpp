#include "app.hpp"

#include "config.hpp"

#include "factorgate/baselines/baselines.hpp"
#include "factorgate/context/client.hpp"
#include "factorgate/context/prompts.hpp"
#include "factorgate/context/selection.hpp"
#include "factorgate/context/semantic.hpp"
#include "factorgate/csv.hpp"
#include "factorgate/dsl/catalog.hpp"
#include "factorgate/errors.hpp"
#include "factorgate/exec/execution.hpp"
#include "factorgate/factor_data.hpp"
#include "factorgate/grpo/grpo.hpp"
#include "factorgate/linear_model.hpp"
#include "factorgate/log.hpp"
#include "factorgate/market_io.hpp"
#include "factorgate/reward/reward.hpp"
#include "factorgate/synthetic.hpp"
#include "factorgate/version.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <sstream>

namespace fs = std::filesystem;

namespace factorgate::app {

namespace {

using ordered_json = nlohmann::ordered_json;

std::string read_text(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw DataError("cannot read " + p.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Collects output files for the manifest.
class RunDir {
public:
    explicit RunDir(fs::path root) : root_(std::move(root)) { fs::create_directories(root_); }
    const fs::path& root() const { return root_; }

    void write(const std::string& name, const std::string& text) {
        std::ofstream out(root_ / name, std::ios::binary);
        if (!out) throw DataError("cannot write " + (root_ / name).string());
        out << text;
        files_.push_back(name);
    }
    fs::path claim(const std::string& name) {
        files_.push_back(name);
        return root_ / name;
    }
    const std::vector<std::string>& files() const { return files_; }

private:
    fs::path root_;
    std::vector<std::string> files_;
};

struct Workspace {
    dsl::FactorCatalog catalog;
    MarketPanel panel;
    std::optional<MinutePanel> minutes;
    std::string planted;  // planted factor of a generated market
    FactorTensor raw, z;
};

SyntheticSpec synth_spec(const Config& cfg) {
    SyntheticSpec s;
    s.seed = static_cast<std::uint64_t>(cfg.integer("synth.seed", cfg.integer("seed", 7)));
    s.n_tickers = static_cast<std::size_t>(cfg.integer("synth.tickers", 50));
    s.n_days = static_cast<std::size_t>(cfg.integer("synth.days", 120));
    s.signal_strength = cfg.number("synth.signal", s.signal_strength);
    s.noise_sigma = cfg.number("synth.noise", s.noise_sigma);
    s.planted_factor = cfg.str("synth.planted", s.planted_factor);
    if (auto d = cfg.date("synth.start")) s.start = *d;
    s.validate();
    return s;
}

Workspace load_workspace(const Config& cfg, bool evaluate = true) {
    Workspace w;
    w.catalog = cfg.has("catalog") ? dsl::load_catalog(cfg.path("catalog")) : dsl::default_catalog();
    if (cfg.has("data.daily")) {
        DailyLoadOptions opt;
        opt.limit_ratio = cfg.number("data.limit_ratio", opt.limit_ratio);
        w.panel = load_daily_bars(cfg.path("data.daily"), opt).panel;
        if (cfg.has("data.minutes")) w.minutes = load_minute_bars(cfg.path("data.minutes")).minutes;
    } else {
        auto market = generate_synthetic_market(synth_spec(cfg));
        w.panel = std::move(market.panel);
        w.minutes = std::move(market.minutes);
        w.planted = market.planted_factor;
    }
    if (w.panel.num_dates() < 3) throw DataError("panel needs at least 3 dates");
    if (evaluate) {
        w.raw = evaluate_catalog(w.catalog, w.panel, static_cast<unsigned>(cfg.integer("threads", 1)));
        w.z = cross_sectional_zscore(w.raw);
    }
    return w;
}

std::size_t date_index(const MarketPanel& panel, const Config& cfg, const std::string& key, std::size_t fallback) {
    auto d = cfg.date(key);
    if (!d) return fallback;
    auto i = panel.find_date(*d);
    if (!i) throw DataError(key + " " + format_date(*d) + " is not a panel date");
    return *i;
}

std::size_t parse_cli_date(const MarketPanel& panel, const std::string& text) {
    Date d;
    try {
        d = parse_date(text);
    } catch (const Error& e) {
        throw ConfigError(std::string("--date: ") + e.what());
    }
    auto i = panel.find_date(d);
    if (!i) throw DataError("date " + text + " is not a panel date");
    return *i;
}

struct Windows {
    std::size_t fit_first, fit_last, bt_first, bt_last;
};

// Defaults: first half of the panel fits the model, second half trades.
Windows windows(const MarketPanel& panel, const Config& cfg) {
    const std::size_t n = panel.num_dates();
    Windows w;
    w.fit_first = date_index(panel, cfg, "fit.start", 0);
    w.fit_last = date_index(panel, cfg, "fit.end", n / 2 - 1);
    w.bt_first = date_index(panel, cfg, "backtest.start", n / 2);
    w.bt_last = date_index(panel, cfg, "backtest.end", n - 1);
    if (w.fit_last < w.fit_first) throw ConfigError("fit.end precedes fit.start");
    if (w.bt_last < w.bt_first) throw ConfigError("backtest.end precedes backtest.start");
    return w;
}

LinearModel model_for(const Workspace& w, const Config& cfg) {
    if (cfg.has("model")) return load_model(cfg.path("model"));
    auto win = windows(w.panel, cfg);
    const auto& d = w.panel.dates();
    return fit_linear_model(w.raw, w.panel, {d[win.fit_first], d[win.fit_last]},
                            static_cast<std::size_t>(cfg.integer("fit.horizon", 1)));
}

exec::ExecutionConfig exec_config(const Workspace& w, const Config& cfg) {
    exec::ExecutionConfig c;
    c.holding_days = static_cast<int>(cfg.integer("exec.holding_days", c.holding_days));
    c.top_n = static_cast<int>(cfg.integer("exec.top_n", c.top_n));
    c.fee_rate = cfg.number("exec.fee_rate", c.fee_rate);
    c.vwap_window = static_cast<int>(cfg.integer("exec.vwap_window", c.vwap_window));
    c.hold_if_unchanged = cfg.flag("exec.hold_if_unchanged", false);
    const std::string mode = cfg.str("exec.price_mode", w.minutes ? "vwap" : "close");
    if (mode == "vwap") {
        if (!w.minutes) throw ConfigError("exec.price_mode = vwap needs data.minutes");
        c.price_mode = exec::PriceMode::vwap;
    } else if (mode == "close") {
        c.price_mode = exec::PriceMode::close;
    } else {
        throw ConfigError("exec.price_mode must be vwap or close");
    }
    c.validate();
    return c;
}

reward::RewardConfig reward_config(const Config& cfg) {
    reward::RewardConfig c;
    const std::string mode = cfg.str("reward.mode", "frictionless");
    if (mode == "frictionless") {
        c.mode = reward::RewardMode::frictionless;
    } else if (mode == "vwap") {
        c.mode = reward::RewardMode::vwap;
    } else {
        throw ConfigError("reward.mode must be frictionless or vwap");
    }
    c.holding_days = static_cast<int>(cfg.integer("reward.holding_days", c.holding_days));
    c.top_n = static_cast<int>(cfg.integer("reward.top_n", c.top_n));
    c.fee_rate = cfg.number("reward.fee_rate", c.fee_rate);
    c.penalties.lambda_invalid = cfg.number("reward.lambda_invalid", c.penalties.lambda_invalid);
    c.penalties.lambda_unparsable = cfg.number("reward.lambda_unparsable", c.penalties.lambda_unparsable);
    c.penalties.lambda_size = cfg.number("reward.lambda_size", c.penalties.lambda_size);
    c.penalties.k_max = static_cast<int>(cfg.integer("reward.k_max", c.penalties.k_max));
    c.validate();
    return c;
}

context::GenerationParams generation_params(const Config& cfg) {
    context::GenerationParams p;
    p.model = cfg.str("client.model", p.model);
    p.temperature = cfg.number("client.temperature", p.temperature);
    p.top_p = cfg.number("client.top_p", p.top_p);
    p.max_tokens = static_cast<int>(cfg.integer("client.max_tokens", p.max_tokens));
    return p;
}

// Falls back to the mock only when the config asks for it.
class FallbackClient : public context::TextGenClient {
public:
    explicit FallbackClient(context::RemoteConfig rc) : remote_(std::move(rc)) {}
    using TextGenClient::complete;
    std::string complete(std::span<const context::ChatMessage> messages,
                         const context::GenerationParams& params) override {
        try {
            return remote_.complete(messages, params);
        } catch (const RemoteError& e) {
            log::warn(std::string("remote client failed, using mock: ") + e.what());
            return mock_.complete(messages, params);
        }
    }

private:
    context::RemoteClient remote_;
    context::MockClient mock_;
};

std::unique_ptr<context::TextGenClient> make_client(const Config& cfg) {
    const std::string kind = cfg.str("client.kind", "mock");
    if (kind == "mock") return std::make_unique<context::MockClient>();
    if (kind != "remote") throw ConfigError("client.kind must be mock or remote");
    context::RemoteConfig rc;
    rc.endpoint = cfg.str("client.endpoint");
    rc.path = cfg.str("client.path", rc.path);
    rc.token_env = cfg.str("client.token_env", rc.token_env);
    rc.retries = static_cast<int>(cfg.integer("client.retries", rc.retries));
    rc.timeout_seconds = cfg.number("client.timeout", rc.timeout_seconds);
    if (cfg.flag("client.fallback_to_mock", false)) return std::make_unique<FallbackClient>(std::move(rc));
    return std::make_unique<context::RemoteClient>(std::move(rc));
}

// Semantic pipeline plus the data it borrows.
struct Semantic {
    std::unique_ptr<context::TextGenClient> client;
    std::optional<context::NewsFeed> news;
    std::optional<Matrix> planted;
    std::unique_ptr<context::SemanticPipeline> pipeline;
};

std::unique_ptr<Semantic> make_semantic(const Workspace& w, const Config& cfg) {
    auto s = std::make_unique<Semantic>();
    s->client = make_client(cfg);
    if (cfg.has("context.news")) {
        s->news = context::load_news_csv(cfg.path("context.news"));
    } else {
        const std::string id = cfg.str("context.planted", w.planted);
        if (id.empty()) throw ConfigError("context needs context.news (or context.planted for synthetic news)");
        s->planted = w.raw.at(id);
    }
    context::SemanticConfig sc;
    sc.select_k = static_cast<std::size_t>(cfg.integer("context.select_k", static_cast<long long>(sc.select_k)));
    sc.max_in_flight = static_cast<std::size_t>(cfg.integer("context.max_in_flight", 1));
    sc.memory.max_chars = static_cast<std::size_t>(cfg.integer("context.memory_chars", 12000));
    sc.params = generation_params(cfg);
    sc.memory.params = sc.params;
    auto source = context::make_descriptor_source(w.panel, s->news ? &*s->news : nullptr,
                                                  s->planted ? &*s->planted : nullptr);
    s->pipeline = std::make_unique<context::SemanticPipeline>(w.panel, w.catalog, w.raw, *s->client, source, sc);
    auto win = windows(w.panel, cfg);
    s->pipeline->prepare(win.fit_first, win.fit_last);
    return s;
}

std::unique_ptr<baselines::GatingStrategy> make_strategy(const Workspace& w, const Config& cfg,
                                                         const LinearModel& model, Semantic* semantic) {
    const std::string kind = cfg.str("strategy", "fixed_list");
    if (kind == "all_factors") {
        std::vector<std::string> ids;
        for (const auto& c : model.coefficients) ids.push_back(c.id);
        return std::make_unique<baselines::AllFactors>(ids);
    }
    if (kind == "buy_and_hold") return std::make_unique<baselines::BuyAndHoldSentinel>();
    if (kind == "fixed_list") {
        auto ids = cfg.list("strategy.factors");
        const std::string planted = cfg.str("context.planted", w.planted);
        if (ids.empty() && !planted.empty()) ids = {planted};
        if (ids.empty()) throw ConfigError("strategy fixed_list needs strategy.factors (or context.planted)");
        return std::make_unique<baselines::FixedList>(w.catalog, ids);
    }
    if (kind == "ic_momentum") {
        return std::make_unique<baselines::IcMomentumGate>(
            ic_history(w.raw, forward_returns(w.panel, 1)), w.raw.ids,
            static_cast<std::size_t>(cfg.integer("strategy.window", 20)),
            static_cast<std::size_t>(cfg.integer("strategy.k", 10)));
    }
    if (kind == "lasso") {
        return std::make_unique<baselines::LassoGate>(w.z, w.panel, cfg.number("strategy.lambda", 0.001),
                                                      static_cast<std::size_t>(cfg.integer("strategy.window", 60)));
    }
    if (kind == "toy_policy") {
        if (!cfg.has("strategy.checkpoint")) throw ConfigError("strategy toy_policy needs strategy.checkpoint");
        std::ifstream in(cfg.path("strategy.checkpoint"));
        if (!in) throw DataError("cannot read checkpoint " + cfg.path("strategy.checkpoint"));
        std::vector<std::string> ids;
        auto policy = grpo::ToyPolicy::load(in, &ids);
        for (const auto& id : ids) {
            if (!w.catalog.contains(id)) throw ConfigError("checkpoint factor " + id + " is not in the catalog");
        }
        return std::make_unique<baselines::ToyPolicyGate>(std::move(policy), ids, w.panel,
                                                          static_cast<std::uint64_t>(cfg.integer("seed", 7)));
    }
    if (kind == "llm") {
        if (!semantic) throw ConfigError("strategy llm needs the semantic pipeline");
        return std::make_unique<baselines::LlmGate>(*semantic->pipeline);
    }
    throw ConfigError("unknown strategy '" + kind +
                      "' (all_factors, buy_and_hold, fixed_list, ic_momentum, lasso, toy_policy, llm)");
}

void write_backtest(RunDir& dir, const exec::EquityCurve& curve, std::ostream& out) {
    auto metrics = exec::metrics_json(exec::compute_metrics(curve));
    dir.write("metrics.json", metrics + "\n");
    dir.write("curve.jsonl", exec::curve_jsonl(curve));
    dir.write("trades.jsonl", exec::trades_jsonl(curve));
    out << metrics << "\n";
}

// ---- commands ----

void cmd_synth(const Config& cfg, RunDir& dir, std::ostream& out) {
    auto market = generate_synthetic_market(synth_spec(cfg));
    save_daily_bars(market.panel, dir.claim("daily.csv"));
    save_minute_bars(market.minutes, dir.claim("minutes.csv"));
    out << "generated " << market.panel.num_tickers() << " tickers x " << market.panel.num_dates()
        << " days, planted factor " << market.planted_factor << "\n";
}

void cmd_factors(const Config& cfg, RunDir& dir, std::ostream& out) {
    auto w = load_workspace(cfg);
    auto win = windows(w.panel, cfg);
    const std::vector<std::size_t> horizons{1, 5, 10};
    auto perf = factor_backtest(w.raw, w.panel, horizons, win.fit_first, win.fit_last);
    std::ostringstream csv_out;
    csv_out << "id,mean_ic_h1,mean_ic_h5,mean_ic_h10,ic_vol_h1,ic_count_h1,long_short,infeasible\n";
    for (const auto& p : perf) {
        csv_out << p.id;
        for (std::size_t h = 0; h < horizons.size(); ++h) csv_out << ',' << csv::format_number(p.mean_ic[h], 12);
        csv_out << ',' << csv::format_number(p.ic_vol[0], 12) << ',' << p.ic_count[0] << ','
                << csv::format_number(p.long_short, 12) << ',' << (p.infeasible ? "true" : "false") << "\n";
    }
    dir.write("factors.csv", csv_out.str());
    out << csv_out.str();
}

void cmd_fit(const Config& cfg, RunDir& dir, std::ostream& out) {
    auto w = load_workspace(cfg);
    auto model = model_for(w, cfg);
    save_model(model, dir.claim("model.txt").string());
    out << "fitted " << model.coefficients.size() << " coefficients on " << model.n_obs << " observations"
        << (model.ridge ? " (ridge)" : "") << ", dropped " << model.dropped.size() << "\n";
}

void cmd_backtest(const Config& cfg, RunDir& dir, std::ostream& out) {
    auto w = load_workspace(cfg);
    auto model = model_for(w, cfg);
    auto win = windows(w.panel, cfg);
    std::unique_ptr<Semantic> semantic;
    if (cfg.str("strategy") == "llm") semantic = make_semantic(w, cfg);
    auto strategy = make_strategy(w, cfg, model, semantic.get());
    exec::BacktestInputs in{w.panel, w.minutes ? &*w.minutes : nullptr, w.z, model};
    const auto& d = w.panel.dates();
    auto curve = baselines::run_strategy(in, *strategy, exec_config(w, cfg), d[win.bt_first], d[win.bt_last]);
    write_backtest(dir, curve, out);
}

void cmd_sweep(const Config& cfg, RunDir& dir, std::ostream& out) {
    auto w = load_workspace(cfg);
    auto model = model_for(w, cfg);
    auto win = windows(w.panel, cfg);
    if (cfg.str("strategy") == "llm") throw ConfigError("sweep does not support the llm strategy");
    auto strategy = make_strategy(w, cfg, model, nullptr);
    exec::BacktestInputs in{w.panel, w.minutes ? &*w.minutes : nullptr, w.z, model};
    const auto& d = w.panel.dates();
    auto grid = baselines::run_sweep(in, *strategy, cfg.int_list("sweep.top_n", baselines::kDefaultSweepTopN),
                                     cfg.int_list("sweep.holding_days", baselines::kDefaultSweepHoldingDays),
                                     exec_config(w, cfg), d[win.bt_first], d[win.bt_last],
                                     static_cast<unsigned>(cfg.integer("sweep.threads", 1)));
    auto text = grid.to_csv();
    dir.write("sweep.csv", text);
    out << text;
}

struct RewardOptions {
    std::string date;
    std::string response_file;
    std::string selection;
    std::string context_file;
};

void cmd_reward_eval(const Config& cfg, const RewardOptions& o, RunDir& dir, std::ostream& out) {
    if (o.response_file.empty() == o.selection.empty()) {
        throw ConfigError("reward-eval needs exactly one of --response or --selection");
    }
    auto w = load_workspace(cfg);
    auto model = model_for(w, cfg);
    const std::size_t t = parse_cli_date(w.panel, o.date);
    std::string response;
    if (!o.response_file.empty()) {
        response = read_text(o.response_file);
    } else {
        std::string ids = o.selection;
        std::replace(ids.begin(), ids.end(), ';', ',');
        response = "Selection supplied on the command line for " + o.date +
                   "; each listed factor is evaluated against the market feedback that follows the decision.\n"
                   "<selection>" + ids + "</selection>\n";
    }
    const std::string ctx = o.context_file.empty() ? "decision date " + o.date : read_text(o.context_file);
    reward::RewardInputs in{w.panel, w.minutes ? &*w.minutes : nullptr, w.z, model};
    std::unique_ptr<context::TextGenClient> client;
    std::unique_ptr<reward::ConsistencyJudge> judge;
    const std::string jk = cfg.str("reward.judge", "mock");
    if (jk == "mock") {
        judge = std::make_unique<reward::MockJudge>(w.catalog);
    } else if (jk == "remote") {
        client = make_client(cfg);
        judge = std::make_unique<reward::RemoteJudge>(*client, generation_params(cfg));
    } else {
        throw ConfigError("reward.judge must be mock or remote");
    }
    auto b = reward::final_reward(ctx, response, t, in, w.catalog, *judge, reward_config(cfg));
    auto text = b.to_json();
    dir.write("reward.json", text + "\n");
    out << text << "\n";
}

void cmd_grpo_train(const Config& cfg, RunDir& dir, std::ostream& out) {
    auto w = load_workspace(cfg);
    auto model = model_for(w, cfg);
    auto win = windows(w.panel, cfg);
    auto rc = reward_config(cfg);
    auto vocab = cfg.list("grpo.vocabulary");
    if (vocab.empty()) vocab = w.catalog.ids();
    const std::size_t n = w.panel.num_dates();
    const std::size_t h = static_cast<std::size_t>(rc.holding_days);
    if (n < h + 2) throw DataError("panel too short for the reward horizon");
    reward::RewardInputs in{w.panel, w.minutes ? &*w.minutes : nullptr, w.z, model};
    grpo::ToyEnvironment env{in, w.catalog, vocab, date_index(w.panel, cfg, "grpo.first", win.bt_first),
                             date_index(w.panel, cfg, "grpo.last", n - 1 - h), rc,
                             static_cast<std::size_t>(cfg.integer("grpo.max_length", std::min<long long>(15, static_cast<long long>(vocab.size()))))};
    if (env.first_date <= win.fit_last && !cfg.has("model")) {
        log::warn("grpo dates overlap the model fit window");
    }
    grpo::GrpoConfig gc;
    gc.epsilon = cfg.number("grpo.epsilon", gc.epsilon);
    gc.beta = cfg.number("grpo.beta", gc.beta);
    gc.group_size = static_cast<int>(cfg.integer("grpo.group_size", gc.group_size));
    gc.learning_rate = cfg.number("grpo.learning_rate", gc.learning_rate);
    gc.iterations = static_cast<int>(cfg.integer("grpo.iterations", gc.iterations));
    gc.inner_epochs = static_cast<int>(cfg.integer("grpo.inner_epochs", gc.inner_epochs));
    gc.seed = static_cast<std::uint64_t>(cfg.integer("grpo.seed", cfg.integer("seed", 7)));
    const std::string kl = cfg.str("grpo.kl_placement", "per_token");
    if (kl == "per_token") {
        gc.kl_placement = grpo::KlPlacement::per_token;
    } else if (kl == "sequence") {
        gc.kl_placement = grpo::KlPlacement::sequence;
    } else {
        throw ConfigError("grpo.kl_placement must be per_token or sequence");
    }

    std::ofstream log_out(dir.claim("train_log.jsonl"), std::ios::binary);
    auto res = grpo::train_toy_policy(env, gc, &log_out);
    log_out.close();
    {
        std::ofstream ck(dir.claim("policy.txt"), std::ios::binary);
        res.policy.save(ck, vocab);
    }
    ordered_json summary;
    summary["iterations"] = gc.iterations;
    double tail = 0.0;
    const std::size_t m = std::min<std::size_t>(50, res.history.size());
    for (std::size_t i = res.history.size() - m; i < res.history.size(); ++i) tail += res.history[i].mean_reward;
    summary["final_mean_reward"] = m ? tail / static_cast<double>(m) : 0.0;
    ordered_json rates = ordered_json::object();
    for (const auto& id : vocab) rates[id] = grpo::selection_rate(res.policy, env, id, 2000, gc.seed);
    summary["selection_rate"] = rates;
    auto text = summary.dump();
    dir.write("grpo_summary.json", text + "\n");
    out << text << "\n";
}

void cmd_context(const Config& cfg, const std::string& date, RunDir& dir, std::ostream& out) {
    auto w = load_workspace(cfg);
    auto semantic = make_semantic(w, cfg);
    auto ctx = semantic->pipeline->context_for(parse_cli_date(w.panel, date));
    auto problems = context::audit_provenance(ctx);
    if (!problems.empty()) throw DataError("context for " + date + " cites later data: " + problems.front());
    dir.write("context.txt", ctx.prompt);
    out << ctx.prompt;
}

void cmd_screen(const Config& cfg, const std::string& date, bool backtest, RunDir& dir, std::ostream& out) {
    auto w = load_workspace(cfg);
    auto semantic = make_semantic(w, cfg);
    if (!date.empty()) {
        const std::size_t t = parse_cli_date(w.panel, date);
        auto ctx = semantic->pipeline->context_for(t);
        std::string text;
        auto raw = semantic->pipeline->screen(ctx, &text);
        ordered_json j;
        j["date"] = date;
        j["selection"] = raw.selection;
        j["status"] = context::status_name(raw.status);
        j["invalid_ids"] = raw.invalid_ids;
        j["response"] = text;
        dir.write("screen.json", j.dump() + "\n");
        out << j.dump() << "\n";
    }
    if (backtest) {
        auto model = model_for(w, cfg);
        auto win = windows(w.panel, cfg);
        baselines::LlmGate gate(*semantic->pipeline);
        exec::BacktestInputs in{w.panel, w.minutes ? &*w.minutes : nullptr, w.z, model};
        const auto& d = w.panel.dates();
        auto curve = baselines::run_strategy(in, gate, exec_config(w, cfg), d[win.bt_first], d[win.bt_last]);
        std::string lines;
        for (const auto& [t, text] : gate.responses()) {
            ordered_json j;
            j["date"] = format_date(d[t]);
            j["response"] = text;
            lines += j.dump() + "\n";
        }
        dir.write("responses.jsonl", lines);
        write_backtest(dir, curve, out);
    }
    if (date.empty() && !backtest) throw ConfigError("screen needs --date and/or --backtest");
}

void write_manifest(RunDir& dir, const std::string& command, const Config& cfg) {
    ordered_json m;
    m["tool"] = "factorgate";
    m["version"] = kVersion;
    m["prompt_version"] = std::string(context::kPromptVersion);
    m["command"] = command;
    m["config_hash"] = sha256_hex(cfg.canonical());
    m["seed"] = cfg.integer("seed", 7);
    ordered_json c = ordered_json::object();
    for (const auto& [k, v] : cfg.entries()) c[k] = v;
    m["config"] = c;
    m["outputs"] = dir.files();
    std::ofstream out(dir.root() / "manifest.json", std::ios::binary);
    out << m.dump(2) << "\n";
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App cli{"factorgate: factor gating experiments on daily market data", "factorgate"};
    cli.set_version_flag("--version", std::string(kVersion));
    cli.require_subcommand(1);
    cli.fallthrough();

    std::string config_path, run_dir;
    std::vector<std::string> overrides;
    bool verbose = false, quiet = false;
    cli.add_option("-c,--config", config_path, "Flat key = value config file");
    cli.add_option("-s,--set", overrides, "Override a config key (key=value), repeatable");
    cli.add_option("-o,--run-dir", run_dir, "Output directory (default runs/<command>-<config hash>)");
    cli.add_flag("-v,--verbose", verbose, "Debug logging");
    cli.add_flag("-q,--quiet", quiet, "Errors only");

    auto* synth = cli.add_subcommand("synth", "Generate a synthetic market (daily.csv, minutes.csv)");
    auto* factors = cli.add_subcommand("factors", "RankIC report for every catalog factor");
    auto* fit = cli.add_subcommand("fit", "Fit the linear scoring model");
    auto* backtest = cli.add_subcommand("backtest", "Run a gating strategy through the execution engine");
    std::string strategy;
    backtest->add_option("--strategy", strategy, "Override the strategy key");
    auto* sweep = cli.add_subcommand("sweep", "TopN x holding-days grid");
    auto* reward_eval = cli.add_subcommand("reward-eval", "Reward breakdown for one response on one date");
    RewardOptions ro;
    reward_eval->add_option("--date", ro.date, "Decision date (YYYY-MM-DD)")->required();
    reward_eval->add_option("--response", ro.response_file, "File holding the screening response");
    reward_eval->add_option("--selection", ro.selection, "Comma-separated factor ids");
    reward_eval->add_option("--context", ro.context_file, "File holding the decision context for the judge");
    auto* grpo_train = cli.add_subcommand("grpo-train", "Train the toy selection policy");
    auto* context_cmd = cli.add_subcommand("context", "Emit the decision context prompt for a date");
    std::string date;
    context_cmd->add_option("--date", date, "Decision date (YYYY-MM-DD)")->required();
    auto* screen = cli.add_subcommand("screen", "Ask the language-model screener for a selection");
    bool screen_backtest = false;
    screen->add_option("--date", date, "Decision date (YYYY-MM-DD)");
    screen->add_flag("--backtest", screen_backtest, "Backtest the screener over the backtest window");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        cli.parse(reversed);
    } catch (const CLI::ParseError& e) {
        std::ostringstream o, e2;
        const int code = cli.exit(e, o, e2);
        out << o.str();
        err << e2.str();
        return code == 0 ? kExitOk : kExitUsage;
    }

    auto previous_sink = log::set_sink([&err](log::Level lvl, std::string_view msg) {
        static const char* names[] = {"debug", "info", "warn", "error"};
        err << "[" << names[static_cast<int>(lvl)] << "] " << msg << "\n";
    });
    const auto previous_level = log::level();
    log::set_level(verbose ? log::Level::debug : quiet ? log::Level::error : log::Level::warn);
    struct Restore {
        log::Sink sink;
        log::Level level;
        ~Restore() {
            log::set_sink(sink);
            log::set_level(level);
        }
    } restore{previous_sink, previous_level};

    auto* sub = cli.get_subcommands().front();
    const std::string command = sub->get_name();
    try {
        Config cfg = config_path.empty() ? Config{} : Config::load(config_path);
        for (const auto& o : overrides) cfg.apply_override(o);
        if (!strategy.empty()) cfg.set("strategy", strategy);
        if (run_dir.empty()) run_dir = cfg.str("run_dir");
        if (run_dir.empty()) run_dir = "runs/" + command + "-" + sha256_hex(cfg.canonical()).substr(0, 12);
        RunDir dir(run_dir);

        if (sub == synth) cmd_synth(cfg, dir, out);
        else if (sub == factors) cmd_factors(cfg, dir, out);
        else if (sub == fit) cmd_fit(cfg, dir, out);
        else if (sub == backtest) cmd_backtest(cfg, dir, out);
        else if (sub == sweep) cmd_sweep(cfg, dir, out);
        else if (sub == reward_eval) cmd_reward_eval(cfg, ro, dir, out);
        else if (sub == grpo_train) cmd_grpo_train(cfg, dir, out);
        else if (sub == context_cmd) cmd_context(cfg, date, dir, out);
        else if (sub == screen) cmd_screen(cfg, date, screen_backtest, dir, out);
        write_manifest(dir, command, cfg);
        return kExitOk;
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const RemoteError& e) {
        err << "remote error: " << e.what() << "\n";
        return kExitRemote;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitData;
    }
}

}  // namespace factorgate::app
