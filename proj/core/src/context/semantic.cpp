#include "factorgate/context/semantic.hpp"

#include "factorgate/context/prompts.hpp"
#include "factorgate/csv.hpp"
#include "factorgate/errors.hpp"
#include "factorgate/log.hpp"
#include "factorgate/stats.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <regex>
#include <set>
#include <sstream>
#include <thread>

namespace factorgate::context {

namespace {

std::string fmt(const char* f, double v) {
    if (!std::isfinite(v)) return "nan";
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

std::string pct(double v) { return is_missing(v) ? std::string("n/a") : fmt("%+.2f%%", 100.0 * v); }

std::string first_line(std::string_view s) {
    auto nl = s.find('\n');
    return std::string(s.substr(0, nl));
}

std::vector<Date> merge_dates(std::vector<Date> a, std::span<const Date> b) {
    a.insert(a.end(), b.begin(), b.end());
    std::sort(a.begin(), a.end());
    a.erase(std::unique(a.begin(), a.end()), a.end());
    return a;
}

// Keeps the most recent (last) lines of `text` within max_chars.
std::string keep_recent(const std::string& text, std::size_t max_chars, bool& truncated) {
    truncated = text.size() > max_chars;
    if (!truncated) return text;
    std::size_t cut = text.size() - max_chars;
    auto nl = text.find('\n', cut);
    return nl == std::string::npos ? text.substr(cut) : text.substr(nl + 1);
}

double day_return(const MarketPanel& p, std::size_t d, std::size_t i) {
    if (d == 0) return kMissing;
    double a = p.value(Field::close, d - 1, i), b = p.value(Field::close, d, i);
    if (is_missing(a) || is_missing(b) || a <= 0.0) return kMissing;
    return b / a - 1.0;
}

double index_return(const MarketPanel& p, std::size_t d) {
    std::vector<double> r;
    for (std::size_t i = 0; i < p.num_tickers(); ++i) r.push_back(day_return(p, d, i));
    return stats::mean(r);
}

}  // namespace

NewsFeed parse_news_csv(std::string_view text) {
    NewsFeed feed;
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t line_no = 0;
    bool header = true;
    while (csv::read_line(in, line)) {
        ++line_no;
        if (csv::trim(line).empty()) continue;
        auto cells = csv::split_line(line);
        if (header) {
            header = false;
            if (cells.size() < 3 || csv::trim(cells[0]) != "date" || csv::trim(cells[1]) != "headline" ||
                csv::trim(cells[2]) != "body") {
                throw DataError("news CSV line 1: expected header date,headline,body");
            }
            continue;
        }
        if (cells.size() != 3) throw DataError("news CSV line " + std::to_string(line_no) + ": expected 3 fields");
        auto d = try_parse_date(csv::trim(cells[0]));
        if (!d) throw DataError("news CSV line " + std::to_string(line_no) + ": bad date '" + cells[0] + "'");
        feed[*d].push_back({*d, std::string(csv::trim(cells[1])), std::string(csv::trim(cells[2]))});
    }
    return feed;
}

NewsFeed load_news_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open news file " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_news_csv(ss.str());
}

std::string describe_price(const MarketPanel& panel, std::size_t d) {
    const std::size_t n = panel.num_tickers();
    std::vector<double> today(n);
    int up = 0, down = 0, flat = 0;
    for (std::size_t i = 0; i < n; ++i) {
        today[i] = day_return(panel, d, i);
        if (is_missing(today[i])) continue;
        (today[i] > 0 ? up : today[i] < 0 ? down : flat) += 1;
    }
    double r1 = stats::mean(today);
    double r5 = kMissing;
    if (d >= 5) {
        r5 = 1.0;
        for (std::size_t k = d - 4; k <= d; ++k) r5 *= 1.0 + index_return(panel, k);
        r5 -= 1.0;
    }
    double vol20 = kMissing;
    if (d >= 20) {
        std::vector<double> idx;
        for (std::size_t k = d - 19; k <= d; ++k) idx.push_back(index_return(panel, k));
        vol20 = stats::stddev(idx, true);
    }
    const std::size_t groups = std::min<std::size_t>(5, std::max<std::size_t>(1, n));
    std::vector<double> group_ret(groups);
    for (std::size_t g = 0; g < groups; ++g) {
        std::vector<double> r(today.begin() + static_cast<long>(g * n / groups),
                              today.begin() + static_cast<long>((g + 1) * n / groups));
        group_ret[g] = stats::mean(r);
    }
    std::size_t best = 0, worst = 0;
    for (std::size_t g = 1; g < groups; ++g) {
        if (!is_missing(group_ret[g]) && (is_missing(group_ret[best]) || group_ret[g] > group_ret[best])) best = g;
        if (!is_missing(group_ret[g]) && (is_missing(group_ret[worst]) || group_ret[g] < group_ret[worst])) worst = g;
    }
    std::string out = "Equal-weight index " + format_date(panel.dates()[d]) + ": " + pct(r1) + " today, " + pct(r5) +
                      " over 5 days.\n";
    out += "Breadth: " + std::to_string(up) + " advancers, " + std::to_string(down) + " decliners, " +
           std::to_string(flat) + " unchanged.\n";
    out += "Cross-sectional dispersion " + (is_missing(stats::stddev(today, false)) ? std::string("n/a") : fmt("%.2f%%", 100.0 * stats::stddev(today, false))) +
           "; 20-day index volatility " + (is_missing(vol20) ? std::string("n/a") : fmt("%.2f%%", 100.0 * vol20)) + " daily.\n";
    out += "Strongest group G" + std::to_string(best + 1) + " (" + pct(group_ret[best]) + "), weakest group G" +
           std::to_string(worst + 1) + " (" + pct(group_ret[worst]) + ").\n";
    return out;
}

std::string describe_news(const NewsFeed& feed, Date date) {
    auto it = feed.find(date);
    if (it == feed.end()) return {};
    std::string out;
    for (const auto& item : it->second) out += "Headline: " + item.headline + "\n" + item.body + "\n";
    return out;
}

std::string synthetic_news(const MarketPanel& panel, const Matrix& planted, std::size_t d) {
    double ic = kMissing;
    if (d >= 1) {
        std::vector<double> r(panel.num_tickers());
        for (std::size_t i = 0; i < r.size(); ++i) r[i] = day_return(panel, d, i);
        ic = stats::spearman(planted.row(d - 1), r);
    }
    std::string tag = is_missing(ic) ? "n/a" : fmt("%.2f", ic);
    if (is_missing(ic)) {
        return "Headline: Quiet session for flow-driven strategies\n"
               "Desk commentary has no read yet on volume-confirmed reversals.\n";
    }
    if (ic > 0.1) {
        return "Headline: Volume-confirmed reversals paid off (rank corr " + tag + ")\n"
               "Stocks that fell on rising volume bounced, and heavy-volume gainers gave back ground.\n";
    }
    if (ic < -0.1) {
        return "Headline: Reversal trades struggled (rank corr " + tag + ")\n"
               "Moves on rising volume extended instead of fading.\n";
    }
    return "Headline: Mixed session for reversal trades (rank corr " + tag + ")\n"
           "Volume-confirmed moves showed no consistent follow-through.\n";
}

DescriptorSource make_descriptor_source(const MarketPanel& panel, const NewsFeed* feed, const Matrix* planted) {
    return [&panel, feed, planted](std::size_t d) {
        MarketDescriptors m;
        m.date = panel.dates().at(d);
        m.s_price = describe_price(panel, d);
        if (feed) {
            m.s_news = describe_news(*feed, m.date);
        } else if (planted) {
            m.s_news = synthetic_news(panel, *planted, d);
        }
        return m;
    };
}

std::string week_label(int week_key) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-W%02d", week_key / 100, week_key % 100);
    return buf;
}

MemoryState build_weekly_memory(std::span<const MarketDescriptors> week, const MemoryState* previous,
                                TextGenClient& client, const MemoryOptions& options) {
    if (week.empty()) throw DataError("weekly memory needs at least one descriptor");
    const int key = iso_week_key(week.front().date);
    std::string inputs;
    std::vector<Date> dates;
    for (const auto& m : week) {
        if (iso_week_key(m.date) != key) {
            throw DataError("descriptor " + format_date(m.date) + " is outside week " + week_label(key));
        }
        if (previous && !previous->provenance.empty() && m.date <= previous->provenance.back()) {
            throw DataError("descriptor " + format_date(m.date) + " is not after the previous memory");
        }
        inputs += "- " + format_date(m.date) + ": " + first_line(m.s_price) + " | " + first_line(m.s_news) + "\n";
        dates.push_back(m.date);
    }
    MemoryState out;
    out.week_key = key;
    out.label = week_label(key);
    std::string prev = "(none)";
    if (previous) {
        prev = keep_recent(previous->summary, options.max_chars, out.truncated);
        if (out.truncated) log::warn("memory " + out.label + ": previous memory truncated to the most recent content");
    }
    const std::string prompt =
        render_template(prompt_template("memory_update"), {{"week", out.label}, {"previous", prev}, {"inputs", inputs}});
    try {
        out.summary = client.complete(prompt, options.params);
    } catch (const RemoteError& e) {
        throw RemoteError("memory " + out.label + ": " + e.what());
    }
    out.provenance = merge_dates(previous ? previous->provenance : std::vector<Date>{}, dates);
    return out;
}

std::vector<std::vector<MarketDescriptors>> group_by_week(std::span<const MarketDescriptors> descriptors) {
    std::vector<std::vector<MarketDescriptors>> weeks;
    for (const auto& m : descriptors) {
        if (weeks.empty() || iso_week_key(weeks.back().front().date) != iso_week_key(m.date)) weeks.emplace_back();
        weeks.back().push_back(m);
    }
    return weeks;
}

MemoryState build_global_memory(std::span<const MarketDescriptors> descriptors, TextGenClient& client,
                                const MemoryOptions& options) {
    auto weeks = group_by_week(descriptors);
    if (weeks.empty()) throw DataError("global memory needs at least one week of descriptors");
    MemoryState m;
    for (std::size_t w = 0; w < weeks.size(); ++w) m = build_weekly_memory(weeks[w], w ? &m : nullptr, client, options);
    m.global = true;
    return m;
}

std::string format_performance(const FactorPerformance& p) {
    std::string out;
    for (std::size_t h = 0; h < p.horizons.size(); ++h) {
        const std::string sfx = "_h" + std::to_string(p.horizons[h]) + ": ";
        out += "metric mean_rank_ic" + sfx + fmt("%.6f", p.mean_ic[h]) + "\n";
        out += "metric ic_vol" + sfx + fmt("%.6f", p.ic_vol[h]) + "\n";
        out += "metric ic_count" + sfx + std::to_string(p.ic_count[h]) + "\n";
    }
    out += "metric long_short: " + fmt("%.6f", p.long_short) + "\n";
    out += std::string("metric infeasible: ") + (p.infeasible ? "yes" : "no") + "\n";
    return out;
}

FactorProfile profile_factor(const MemoryState& global, const FactorPerformance& perf, const dsl::FactorEntry& entry,
                             TextGenClient& client, const GenerationParams& params) {
    if (perf.id != entry.id) throw Error("profile_factor: performance is for " + perf.id + ", entry is " + entry.id);
    const std::string window = format_date(perf.window_start) + " to " + format_date(perf.window_end);
    const std::string prompt = render_template(prompt_template("factor_profile"), {{"factor_id", entry.id},
                                                                                    {"formula", entry.source},
                                                                                    {"window", window},
                                                                                    {"metrics", format_performance(perf)},
                                                                                    {"memory", global.summary}});
    FactorProfile out;
    out.factor_id = entry.id;
    try {
        out.text = client.complete(prompt, params);
    } catch (const RemoteError& e) {
        throw RemoteError("profile " + entry.id + ": " + e.what());
    }
    if (out.text.empty()) throw RemoteError("profile " + entry.id + ": empty reply");
    out.snapshot = perf;
    std::vector<Date> span_dates{perf.window_start, perf.window_end};
    out.provenance = merge_dates(global.provenance, span_dates);
    return out;
}

MarketState build_market_state(const MarketDescriptors& m, TextGenClient& client, const GenerationParams& params) {
    if (m.s_price.empty()) throw DataError("missing s_price for " + format_date(m.date));
    if (m.s_news.empty()) throw DataError("missing s_news for " + format_date(m.date));
    const std::string prompt = render_template(
        prompt_template("market_state"), {{"date", format_date(m.date)}, {"price", m.s_price}, {"news", m.s_news}});
    MarketState s;
    s.date = m.date;
    try {
        s.text = client.complete(prompt, params);
    } catch (const RemoteError& e) {
        throw RemoteError("market state " + format_date(m.date) + ": " + e.what());
    }
    s.provenance = {m.date};
    return s;
}

DecisionContext assemble_context(const dsl::FactorCatalog& catalog, std::span<const FactorProfile> profiles,
                                 const MarketState& state, Date date, std::size_t select_k,
                                 std::span<const std::string> candidates) {
    if (state.date > date) throw DataError("market state " + format_date(state.date) + " is after " + format_date(date));
    std::map<std::string, const FactorProfile*> by_id;
    for (const auto& p : profiles) by_id[p.factor_id] = &p;
    for (const auto& c : candidates) {
        if (!catalog.contains(c)) throw DataError("candidate " + c + " is not in the catalog");
    }
    DecisionContext ctx;
    ctx.date = date;
    ctx.state = state.text;
    ctx.provenance = state.provenance;
    std::string block;
    std::size_t n = 0;
    for (const auto& e : catalog.entries()) {
        if (!candidates.empty() && std::find(candidates.begin(), candidates.end(), e.id) == candidates.end()) continue;
        auto it = by_id.find(e.id);
        if (it == by_id.end()) throw DataError("no profile for candidate " + e.id);
        ctx.candidate_ids.push_back(e.id);
        block += "### [" + std::to_string(++n) + "] " + e.id + "\n" + it->second->text;
        if (!it->second->text.empty() && it->second->text.back() != '\n') block += "\n";
        block += "\n";
        ctx.provenance = merge_dates(ctx.provenance, it->second->provenance);
    }
    ctx.prompt = render_template(prompt_template("decision_context"), {{"date", format_date(date)},
                                                                       {"select_k", std::to_string(select_k)},
                                                                       {"profiles", block},
                                                                       {"state", state.text}});
    return ctx;
}

std::vector<std::string> audit_provenance(const DecisionContext& ctx) {
    std::vector<std::string> issues;
    for (Date d : ctx.provenance) {
        if (d > ctx.date) issues.push_back("provenance date " + format_date(d) + " after " + format_date(ctx.date));
    }
    static const std::regex iso(R"(\b(\d{4}-\d{2}-\d{2})\b)");
    for (auto it = std::sregex_iterator(ctx.prompt.begin(), ctx.prompt.end(), iso); it != std::sregex_iterator(); ++it) {
        auto d = try_parse_date((*it)[1].str());
        if (d && *d > ctx.date) issues.push_back("prompt cites " + (*it)[1].str() + " after " + format_date(ctx.date));
    }
    return issues;
}

SemanticPipeline::SemanticPipeline(const MarketPanel& panel, const dsl::FactorCatalog& catalog,
                                   const FactorTensor& raw, TextGenClient& client, DescriptorSource descriptors,
                                   SemanticConfig config)
    : panel_(panel),
      catalog_(catalog),
      raw_(raw),
      client_(client),
      descriptors_(std::move(descriptors)),
      config_(std::move(config)) {}

void SemanticPipeline::prepare(std::size_t first, std::size_t last) {
    if (first > last || last >= panel_.num_dates()) throw DataError("semantic history window out of range");
    std::vector<MarketDescriptors> desc;
    for (std::size_t d = first; d <= last; ++d) desc.push_back(descriptors_(d));
    global_ = build_global_memory(desc, client_, config_.memory);

    auto perf = factor_backtest(raw_, panel_, config_.horizons, first, last);
    profiles_.assign(perf.size(), {});
    std::atomic<std::size_t> next{0};
    std::mutex err_mu;
    std::exception_ptr error;
    auto work = [&] {
        for (std::size_t i = next++; i < perf.size(); i = next++) {
            try {
                const auto* entry = catalog_.find(perf[i].id);
                if (!entry) throw DataError("factor " + perf[i].id + " is not in the catalog");
                profiles_[i] = profile_factor(global_, perf[i], *entry, client_, config_.params);
            } catch (...) {
                std::lock_guard lock(err_mu);
                if (!error) error = std::current_exception();
            }
        }
    };
    const std::size_t workers = std::max<std::size_t>(1, std::min(config_.max_in_flight, perf.size()));
    if (workers == 1) {
        work();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
    }
    if (error) std::rethrow_exception(error);
    last_ = last;
    prepared_ = true;
}

DecisionContext SemanticPipeline::context_for(std::size_t date_index) {
    if (!prepared_) throw Error("semantic pipeline used before prepare()");
    if (date_index <= last_ || date_index >= panel_.num_dates()) {
        throw DataError("decision date must follow the history window");
    }
    auto state = build_market_state(descriptors_(date_index - 1), client_, config_.params);
    return assemble_context(catalog_, profiles_, state, panel_.dates()[date_index], config_.select_k);
}

RawResponse SemanticPipeline::screen(const DecisionContext& context, std::string* response_text) {
    std::string reply;
    try {
        reply = client_.complete(context.prompt, config_.params);
    } catch (const RemoteError& e) {
        throw RemoteError("screen " + format_date(context.date) + ": " + e.what());
    }
    if (response_text) *response_text = reply;
    return parse_selection(reply, catalog_);
}

}  // namespace factorgate::context
