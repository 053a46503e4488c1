#include "factorgate/context/client.hpp"
#include "factorgate/context/prompts.hpp"
#include "factorgate/context/semantic.hpp"
#include "factorgate/dsl/evaluator.hpp"
#include "factorgate/dsl/parser.hpp"
#include "factorgate/errors.hpp"
#include "factorgate/log.hpp"
#include "factorgate/synthetic.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include "httplib.h"
#include "json.hpp"

#include <cstdlib>
#include <thread>

using namespace factorgate;
using namespace factorgate::context;

namespace {

struct World {
    SyntheticMarket market;
    FactorTensor raw;
    Matrix planted;

    World() : market(generate_synthetic_market(SyntheticSpec{})) {
        raw = evaluate_catalog(dsl::default_catalog(), market.panel);
        planted = raw.at(market.planted_factor);
    }
    DescriptorSource source() const { return make_descriptor_source(market.panel, nullptr, &planted); }
};

const World& world() {
    static const World w;
    return w;
}

std::vector<MarketDescriptors> descriptors(std::size_t first, std::size_t last) {
    auto src = world().source();
    std::vector<MarketDescriptors> out;
    for (std::size_t d = first; d <= last; ++d) out.push_back(src(d));
    return out;
}

// Minimal chat-completions server on a free local port.
class FixtureServer {
public:
    explicit FixtureServer(httplib::Server::Handler handler) {
        server_.Post("/v1/chat/completions", std::move(handler));
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }
    ~FixtureServer() {
        server_.stop();
        thread_.join();
    }
    RemoteConfig config() const {
        RemoteConfig c;
        c.endpoint = "http://127.0.0.1:" + std::to_string(port_);
        c.backoff_seconds = 0.01;
        c.timeout_seconds = 5;
        return c;
    }

private:
    httplib::Server server_;
    int port_ = 0;
    std::thread thread_;
};

std::string completion(const std::string& text) {
    nlohmann::json j;
    j["choices"] = nlohmann::json::array({{{"message", {{"role", "assistant"}, {"content", text}}}}});
    return j.dump();
}

}  // namespace

TEST(Prompts, RenderAndTasks) {
    EXPECT_EQ(render_template("a {{x}} b {{y}}", {{"x", "1"}, {"y", "2"}}), "a 1 b 2");
    EXPECT_THROW(render_template("{{nope}}", {}), ConfigError);
    EXPECT_THROW(render_template("{{open", {}), ConfigError);
    for (auto name : {"judge_rubric", "memory_update", "factor_profile", "market_state", "decision_context"}) {
        EXPECT_FALSE(prompt_template(name).empty()) << name;
    }
    EXPECT_EQ(prompt_task(prompt_template("decision_context")), "select");
    EXPECT_EQ(prompt_task("no task"), "");
    EXPECT_THROW(prompt_template("missing"), ConfigError);
}

TEST(MockClientTest, PureFunctionOfPrompt) {
    MockClient a, b;
    GenerationParams p;
    EXPECT_EQ(a.complete("task: judge\nwhatever", p), "0");
    EXPECT_EQ(a.complete("free text", p), b.complete("free text", p));
    EXPECT_NE(a.complete("free text", p), a.complete("free text!", p));
    EXPECT_EQ(a.calls(), 4u);
}

TEST(News, CsvParsing) {
    auto feed = parse_news_csv("date,headline,body\n2024-01-02,Rates steady,\"Calm, quiet day\"\n2024-01-02,Second,x\n");
    ASSERT_EQ(feed.size(), 1u);
    EXPECT_EQ(feed.begin()->second.size(), 2u);
    EXPECT_EQ(feed.begin()->second[0].body, "Calm, quiet day");
    auto text = describe_news(feed, parse_date("2024-01-02"));
    EXPECT_NE(text.find("Headline: Rates steady"), std::string::npos);
    EXPECT_EQ(describe_news(feed, parse_date("2024-01-03")), "");
    EXPECT_THROW(parse_news_csv("when,what\n"), DataError);
    EXPECT_THROW(parse_news_csv("date,headline,body\nyesterday,a,b\n"), DataError);
    factorgate::testing::TempDir dir("news");
    factorgate::testing::write_file(dir / "n.csv", "date,headline,body\n2024-02-01,H,B\n");
    EXPECT_EQ(load_news_csv((dir / "n.csv").string()).size(), 1u);
    EXPECT_THROW(load_news_csv((dir / "missing.csv").string()), DataError);
}

TEST(Descriptors, PriceTemplateIsCausal) {
    const auto& w = world();
    auto text = describe_price(w.market.panel, 30);
    EXPECT_NE(text.find(format_date(w.market.panel.dates()[30])), std::string::npos);
    EXPECT_NE(text.find("Breadth:"), std::string::npos);
    auto future = w.market.panel;
    for (std::size_t i = 0; i < future.num_tickers(); ++i) {
        DailyBar b = future.bar(31, i);
        b.close *= 2;
        future.set_bar(31, i, b);
    }
    EXPECT_EQ(describe_price(future, 30), text);
    auto news = synthetic_news(w.market.panel, w.planted, 30);
    EXPECT_NE(news.find("Headline:"), std::string::npos);
}

TEST(Memory, WeeklyProvenanceAndChaining) {
    MockClient client;
    auto desc = descriptors(0, 18);  // Tue 2024-01-02 .. Fri 2024-01-26
    auto weeks = group_by_week(desc);
    ASSERT_EQ(weeks.size(), 4u);
    EXPECT_EQ(weeks[0].size(), 4u);
    auto m1 = build_weekly_memory(weeks[0], nullptr, client);
    std::vector<Date> w1;
    for (const auto& d : weeks[0]) w1.push_back(d.date);
    EXPECT_EQ(m1.provenance, w1);
    EXPECT_EQ(m1.label, "2024-W01");
    for (const auto& d : weeks[0]) EXPECT_NE(m1.summary.find(format_date(d.date)), std::string::npos);

    MemoryState m = m1;
    for (std::size_t k = 1; k < 4; ++k) m = build_weekly_memory(weeks[k], &m, client);
    std::vector<Date> all;
    for (const auto& d : desc) all.push_back(d.date);
    EXPECT_EQ(m.provenance, all);

    std::vector<MarketDescriptors> mixed{desc[0], desc[7]};
    EXPECT_THROW(build_weekly_memory(mixed, nullptr, client), DataError);
    EXPECT_THROW(build_weekly_memory(weeks[0], &m, client), DataError);  // goes backwards
}

TEST(Memory, TruncationKeepsRecentContent) {
    MockClient client;
    auto desc = descriptors(0, 39);
    MemoryOptions small;
    small.max_chars = 600;
    log::Capture cap(log::Level::warn);
    auto g = build_global_memory(desc, client, small);
    EXPECT_TRUE(g.truncated);
    EXPECT_TRUE(cap.contains("truncated"));
    EXPECT_NE(g.summary.find(format_date(desc.back().date)), std::string::npos);
    EXPECT_EQ(g.summary.find("- " + format_date(desc.front().date)), std::string::npos);
}

TEST(Memory, GlobalRecursion) {
    MockClient client;
    auto one = descriptors(0, 3);
    auto g1 = build_global_memory(one, client);
    auto m1 = build_weekly_memory(group_by_week(one)[0], nullptr, client);
    EXPECT_EQ(g1.summary, m1.summary);
    EXPECT_TRUE(g1.global);

    auto eight = descriptors(4, 43);
    ASSERT_EQ(group_by_week(eight).size(), 8u);
    MockClient other;
    auto a = build_global_memory(eight, client);
    auto b = build_global_memory(eight, other);
    EXPECT_EQ(a.summary, b.summary);
    EXPECT_EQ(a.provenance.front(), eight.front().date);
    EXPECT_EQ(a.provenance.back(), eight.back().date);
    EXPECT_EQ(a.provenance.size(), 40u);
}

TEST(Profiles, MockEmbedsIdAndMetrics) {
    MockClient client;
    auto g = build_global_memory(descriptors(0, 9), client);
    std::size_t hs[] = {1, 5};
    auto perf = factor_backtest(world().raw, world().market.panel, hs, 0, 9);
    const auto& cat = dsl::default_catalog();
    auto p = profile_factor(g, perf[3], cat.entries()[3], client);
    EXPECT_EQ(p.factor_id, cat.entries()[3].id);
    EXPECT_NE(p.text.find(p.factor_id), std::string::npos);
    char digits[32];
    std::snprintf(digits, sizeof digits, "%.6f", perf[3].mean_rank_ic());
    EXPECT_NE(p.text.find(digits), std::string::npos);
    EXPECT_EQ(p.provenance.back(), world().market.panel.dates()[9]);

    auto again = profile_factor(g, perf[3], cat.entries()[3], client);
    EXPECT_EQ(again.text, p.text);
    auto twin = perf[3];
    twin.id = cat.entries()[4].id;
    auto q = profile_factor(g, twin, cat.entries()[4], client);
    auto strip = [](std::string s, const std::string& id, const std::string& formula) {
        for (const auto& needle : {id, formula}) {
            for (auto pos = s.find(needle); pos != std::string::npos; pos = s.find(needle)) s.erase(pos, needle.size());
        }
        return s;
    };
    EXPECT_EQ(strip(p.text, p.factor_id, cat.entries()[3].source), strip(q.text, q.factor_id, cat.entries()[4].source));
    EXPECT_THROW(profile_factor(g, perf[3], cat.entries()[4], client), Error);
}

TEST(MarketStateTest, MockAndMissingInput) {
    MockClient client;
    auto d = world().source()(50);
    auto s = build_market_state(d, client);
    EXPECT_EQ(s.text.rfind("MARKET STATE " + format_date(d.date), 0), 0u);
    EXPECT_NE(s.text.find("price | Equal-weight index"), std::string::npos);
    EXPECT_NE(s.text.find("news | Headline:"), std::string::npos);
    d.s_news.clear();
    try {
        build_market_state(d, client);
        FAIL() << "expected DataError";
    } catch (const DataError& e) {
        EXPECT_NE(std::string(e.what()).find("s_news"), std::string::npos);
        EXPECT_NE(std::string(e.what()).find(format_date(d.date)), std::string::npos);
    }
}

TEST(Context, OrderingAndCanonicalization) {
    MockClient client;
    auto cat = dsl::parse_catalog("c_1,close\na_1,open\nb_1,volume\n");
    auto state = build_market_state(world().source()(40), client);
    std::vector<FactorProfile> profiles{{"b_1", "profile b", {}, {}}, {"a_1", "profile a", {}, {}}, {"c_1", "profile c", {}, {}}};
    auto ctx = assemble_context(cat, profiles, state, state.date, 2);
    EXPECT_THROW(assemble_context(cat, profiles, state, add_days(state.date, -1), 2), DataError);
    EXPECT_EQ(ctx.candidate_ids, (std::vector<std::string>{"c_1", "a_1", "b_1"}));
    auto pc = ctx.prompt.find("] c_1"), pa = ctx.prompt.find("] a_1"), pb = ctx.prompt.find("] b_1");
    EXPECT_LT(pc, pa);
    EXPECT_LT(pa, pb);
    std::reverse(profiles.begin(), profiles.end());
    EXPECT_EQ(assemble_context(cat, profiles, state, state.date, 2).prompt, ctx.prompt);
    profiles.pop_back();
    EXPECT_THROW(assemble_context(cat, profiles, state, state.date, 2), DataError);
    std::vector<std::string> bogus{"zzz_1"};
    EXPECT_THROW(assemble_context(cat, profiles, state, state.date, 2, bogus), DataError);
    EXPECT_TRUE(audit_provenance(ctx).empty());
}

TEST(Context, AuditCatchesFutureDates) {
    MockClient client;
    auto cat = dsl::parse_catalog("a_1,open\n");
    auto state = build_market_state(world().source()(40), client);
    std::vector<FactorProfile> profiles{{"a_1", "fine", {}, {state.date}}};
    EXPECT_TRUE(audit_provenance(assemble_context(cat, profiles, state, state.date)).empty());
    profiles[0].text = "peeked at " + format_date(add_days(state.date, 3));
    EXPECT_EQ(audit_provenance(assemble_context(cat, profiles, state, state.date)).size(), 1u);
    profiles[0].text = "fine";
    profiles[0].provenance = {add_days(state.date, 1)};
    EXPECT_EQ(audit_provenance(assemble_context(cat, profiles, state, state.date)).size(), 1u);
}

TEST(Context, GoldenFortyFactorPrompt) {
    const auto& w = world();
    MockClient client;
    SemanticPipeline pipe(w.market.panel, dsl::default_catalog(), w.raw, client, w.source());
    pipe.prepare(0, 79);
    auto ctx = pipe.context_for(80);
    EXPECT_EQ(ctx.candidate_ids.size(), 40u);
    EXPECT_EQ(ctx.date, w.market.panel.dates()[80]);
    EXPECT_EQ(ctx.provenance.back(), w.market.panel.dates()[79]);  // previous session only
    const std::string path = std::string(FACTORGATE_TEST_DATA_DIR) + "/golden_context_40.txt";
    if (std::getenv("FACTORGATE_UPDATE_GOLDEN")) factorgate::testing::write_file(path, ctx.prompt);
    EXPECT_EQ(ctx.prompt, factorgate::testing::read_file(path));
    EXPECT_TRUE(audit_provenance(ctx).empty());

    std::string reply;
    auto sel = pipe.screen(ctx, &reply);
    EXPECT_EQ(sel.status, ParseStatus::clean);
    EXPECT_EQ(sel.selection.size(), 10u);
    EXPECT_NE(std::find(sel.selection.begin(), sel.selection.end(), w.market.planted_factor), sel.selection.end());
    EXPECT_THROW(pipe.context_for(79), DataError);
}

TEST(Context, ParallelProfilesMatchSequential) {
    const auto& w = world();
    MockClient a, b;
    SemanticConfig par;
    par.max_in_flight = 4;
    SemanticPipeline p1(w.market.panel, dsl::default_catalog(), w.raw, a, w.source());
    SemanticPipeline p2(w.market.panel, dsl::default_catalog(), w.raw, b, w.source(), par);
    p1.prepare(0, 59);
    p2.prepare(0, 59);
    ASSERT_EQ(p1.profiles().size(), p2.profiles().size());
    for (std::size_t i = 0; i < p1.profiles().size(); ++i) EXPECT_EQ(p1.profiles()[i].text, p2.profiles()[i].text);
}

TEST(RemoteClientTest, SendsWireContractAndReturnsBody) {
    nlohmann::json seen;
    std::string auth;
    FixtureServer server([&](const httplib::Request& req, httplib::Response& res) {
        seen = nlohmann::json::parse(req.body);
        auth = req.get_header_value("Authorization");
        res.set_content(completion("fixture body"), "application/json");
    });
    ::setenv("FACTORGATE_TEST_TOKEN", "secret", 1);
    auto cfg = server.config();
    cfg.token_env = "FACTORGATE_TEST_TOKEN";
    RemoteClient client(cfg);
    GenerationParams p;
    p.model = "screen-8b";
    EXPECT_EQ(client.complete("hello", p), "fixture body");
    EXPECT_EQ(seen["model"], "screen-8b");
    EXPECT_EQ(seen["temperature"], 0.0);
    EXPECT_EQ(seen["top_p"], 0.7);
    EXPECT_EQ(seen["max_tokens"], p.max_tokens);
    EXPECT_EQ(seen["messages"][0]["role"], "user");
    EXPECT_EQ(seen["messages"][0]["content"], "hello");
    EXPECT_EQ(auth, "Bearer secret");

    // Fixture body flows through every semantic step.
    auto desc = descriptors(0, 4);
    EXPECT_EQ(build_global_memory(desc, client).summary, "fixture body");
    EXPECT_EQ(build_market_state(desc[2], client).text, "fixture body");
    MemoryState g;
    std::size_t hs[] = {1};
    auto perf = factor_backtest(world().raw, world().market.panel, hs, 0, 30);
    EXPECT_EQ(profile_factor(g, perf[0], dsl::default_catalog().entries()[0], client).text, "fixture body");
}

TEST(RemoteClientTest, RetriesServerErrorsThenSucceeds) {
    std::atomic<int> hits{0};
    FixtureServer server([&](const httplib::Request&, httplib::Response& res) {
        if (++hits < 3) {
            res.status = 503;
            return;
        }
        res.set_content(R"({"text": "third time"})", "application/json");
    });
    RemoteClient client(server.config());
    log::Capture quiet(log::Level::error);
    EXPECT_EQ(client.complete("x", GenerationParams{}), "third time");
    EXPECT_EQ(hits.load(), 3);
}

TEST(RemoteClientTest, FailsFastOnClientErrorAndAfterRetries) {
    std::atomic<int> hits{0};
    FixtureServer bad([&](const httplib::Request&, httplib::Response& res) {
        ++hits;
        res.status = 401;
    });
    RemoteClient c1(bad.config());
    EXPECT_THROW(c1.complete("x", GenerationParams{}), RemoteError);
    EXPECT_EQ(hits.load(), 1);

    FixtureServer down([&](const httplib::Request&, httplib::Response& res) { res.status = 500; });
    RemoteClient c2(down.config());
    log::Capture quiet(log::Level::error);
    EXPECT_THROW(c2.complete("x", GenerationParams{}), RemoteError);

    FixtureServer junk([&](const httplib::Request&, httplib::Response& res) { res.set_content("{}", "application/json"); });
    RemoteClient c3(junk.config());
    EXPECT_THROW(c3.complete("x", GenerationParams{}), RemoteError);
    EXPECT_THROW(RemoteClient(RemoteConfig{}), ConfigError);
}
