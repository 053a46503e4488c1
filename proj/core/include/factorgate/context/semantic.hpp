#pragma once

#include "factorgate/context/client.hpp"
#include "factorgate/context/selection.hpp"
#include "factorgate/date.hpp"
#include "factorgate/dsl/catalog.hpp"
#include "factorgate/factor_data.hpp"
#include "factorgate/linear_model.hpp"
#include "factorgate/market.hpp"

#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace factorgate::context {

struct NewsItem {
    Date date{};
    std::string headline;
    std::string body;
};

using NewsFeed = std::map<Date, std::vector<NewsItem>>;

// CSV with header date,headline,body. Throws DataError on malformed rows.
NewsFeed parse_news_csv(std::string_view text);
NewsFeed load_news_csv(const std::string& path);

struct MarketDescriptors {
    Date date{};
    std::string s_price;
    std::string s_news;
};

// Template over panel rows <= date_index: index move, breadth, dispersion,
// volatility and the best/worst of five ticker groups.
std::string describe_price(const MarketPanel& panel, std::size_t date_index);

// Headlines and bodies for the date; empty when the feed has none.
std::string describe_news(const NewsFeed& feed, Date date);

// Generated news tied to how the planted factor's previous-day values
// ranked today's returns. `planted` is the factor's series over the panel.
std::string synthetic_news(const MarketPanel& panel, const Matrix& planted, std::size_t date_index);

using DescriptorSource = std::function<MarketDescriptors(std::size_t date_index)>;

// Price template plus news from `feed` (or synthetic news when `planted`
// is given and `feed` is null).
DescriptorSource make_descriptor_source(const MarketPanel& panel, const NewsFeed* feed, const Matrix* planted);

struct MemoryState {
    int week_key = 0;  // year * 100 + ISO week
    std::string label;
    std::string summary;
    std::vector<Date> provenance;  // sorted descriptor dates folded into the summary
    bool global = false;
    bool truncated = false;
};

struct MemoryOptions {
    std::size_t max_chars = 12000;  // previous memory is cut to its most recent lines beyond this
    GenerationParams params;
};

std::string week_label(int week_key);

// Folds one ISO week of descriptors into the running memory. Throws
// DataError if a descriptor falls outside the week, RemoteError (tagged
// with the week) if the client fails.
MemoryState build_weekly_memory(std::span<const MarketDescriptors> week, const MemoryState* previous,
                                TextGenClient& client, const MemoryOptions& options = {});

// Splits descriptors by ISO week, in date order.
std::vector<std::vector<MarketDescriptors>> group_by_week(std::span<const MarketDescriptors> descriptors);

// Runs the weekly recursion over every week and tags the result global.
MemoryState build_global_memory(std::span<const MarketDescriptors> descriptors, TextGenClient& client,
                                const MemoryOptions& options = {});

struct FactorProfile {
    std::string factor_id;
    std::string text;
    FactorPerformance snapshot;
    std::vector<Date> provenance;
};

// The statistics block embedded in profile prompts, one "metric" per line.
std::string format_performance(const FactorPerformance& perf);

FactorProfile profile_factor(const MemoryState& global, const FactorPerformance& perf, const dsl::FactorEntry& entry,
                             TextGenClient& client, const GenerationParams& params = {});

struct MarketState {
    Date date{};
    std::string text;
    std::vector<Date> provenance;
};

// Throws DataError naming the date and field when a descriptor is empty.
MarketState build_market_state(const MarketDescriptors& descriptors, TextGenClient& client,
                               const GenerationParams& params = {});

struct DecisionContext {
    Date date{};
    std::vector<std::string> candidate_ids;  // catalog order
    std::string state;
    std::string prompt;
    std::vector<Date> provenance;
};

// Context for trading on `date`. The state must not be dated after it.
// Profiles may come in any order; candidates default to the whole catalog.
// Throws DataError when a candidate has no profile or is not in the catalog.
DecisionContext assemble_context(const dsl::FactorCatalog& catalog, std::span<const FactorProfile> profiles,
                                 const MarketState& state, Date date, std::size_t select_k = 10,
                                 std::span<const std::string> candidates = {});

// Problems found: provenance dates after the context date, or ISO dates in
// the prompt text after it. Empty when the context is clean.
std::vector<std::string> audit_provenance(const DecisionContext& context);

struct SemanticConfig {
    std::size_t select_k = 10;
    std::vector<std::size_t> horizons{1, 5, 10};
    MemoryOptions memory;
    GenerationParams params;
    std::size_t max_in_flight = 1;  // concurrent profile requests
};

// Memory and profiles over a history window, then per-day contexts and
// screening after it.
class SemanticPipeline {
public:
    SemanticPipeline(const MarketPanel& panel, const dsl::FactorCatalog& catalog, const FactorTensor& raw,
                     TextGenClient& client, DescriptorSource descriptors, SemanticConfig config = {});

    // History window [first, last] (panel date indices).
    void prepare(std::size_t first, std::size_t last);

    const MemoryState& global_memory() const { return global_; }
    const std::vector<FactorProfile>& profiles() const { return profiles_; }
    std::size_t history_end() const { return last_; }

    // Decision dates must follow the history window. The state comes from
    // the previous session, since orders fill in the opening window.
    DecisionContext context_for(std::size_t date_index);
    RawResponse screen(const DecisionContext& context, std::string* response_text = nullptr);

private:
    const MarketPanel& panel_;
    const dsl::FactorCatalog& catalog_;
    const FactorTensor& raw_;
    TextGenClient& client_;
    DescriptorSource descriptors_;
    SemanticConfig config_;
    MemoryState global_;
    std::vector<FactorProfile> profiles_;
    std::size_t last_ = 0;
    bool prepared_ = false;
};

}  // namespace factorgate::context
