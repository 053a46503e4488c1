#include "factorgate/context/client.hpp"

#include "factorgate/errors.hpp"
#include "factorgate/log.hpp"

#include "httplib.h"
#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <sstream>
#include <thread>

namespace factorgate::context {

namespace {

std::vector<std::string> lines_of(std::string_view text) {
    std::vector<std::string> out;
    std::string line;
    std::istringstream in{std::string(text)};
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        out.push_back(line);
    }
    return out;
}

std::string trim(std::string_view s) {
    auto b = s.find_first_not_of(" \t");
    if (b == std::string_view::npos) return {};
    auto e = s.find_last_not_of(" \t");
    return std::string(s.substr(b, e - b + 1));
}

bool starts_with(std::string_view s, std::string_view p) { return s.substr(0, p.size()) == p; }

std::string header_value(const std::vector<std::string>& lines, std::string_view key) {
    for (const auto& l : lines) {
        if (starts_with(l, key)) return trim(std::string_view(l).substr(key.size()));
    }
    return {};
}

// Lines of the "## <title>" section, up to the next "## " heading.
std::vector<std::string> section(const std::vector<std::string>& lines, std::string_view title) {
    std::vector<std::string> out;
    bool in = false;
    for (const auto& l : lines) {
        if (starts_with(l, "## ")) {
            in = starts_with(std::string_view(l).substr(3), title);
            continue;
        }
        if (in && !trim(l).empty()) out.push_back(l);
    }
    return out;
}

std::string mock_memory(const std::vector<std::string>& lines) {
    std::string out = "MEMORY " + header_value(lines, "week:") + "\n";
    for (const auto& l : lines) {
        if (starts_with(l, "- ")) out += l + "\n";
    }
    return out;
}

std::string mock_profile(const std::vector<std::string>& lines) {
    const std::string id = header_value(lines, "factor:");
    const std::string formula = header_value(lines, "formula:");
    double ic1 = 0.0;
    std::string out = "Profile of " + id + ".\nFormula: " + formula + "\n";
    for (const auto& l : section(lines, "Backtest statistics")) {
        out += l + "\n";
        if (starts_with(l, "metric mean_rank_ic_h1:")) ic1 = std::atof(l.c_str() + 23);
    }
    if (std::fabs(ic1) < 0.02) {
        out += "Mechanism: no reliable ranking power in the backtest window.\n"
               "Suitable regimes: none identified.\n"
               "Failure conditions: most regimes; treat as noise.\n";
    } else if (ic1 > 0) {
        out += "Mechanism: ranks next-period winners above losers.\n"
               "Suitable regimes: markets where the captured pattern persists.\n"
               "Failure conditions: regime breaks that reverse the pattern.\n";
    } else {
        out += "Mechanism: ranks next-period winners below losers; the inverse carried information.\n"
               "Suitable regimes: none for long-only use.\n"
               "Failure conditions: whenever held long.\n";
    }
    auto memory = section(lines, "Market history");
    if (!memory.empty()) out += "Backdrop: " + trim(memory.back()) + "\n";
    return out;
}

std::string mock_state(const std::vector<std::string>& lines) {
    std::string out = "MARKET STATE " + header_value(lines, "date:") + "\n";
    for (const auto& l : section(lines, "Price market")) out += "price | " + trim(l) + "\n";
    for (const auto& l : section(lines, "News market")) out += "news | " + trim(l) + "\n";
    return out;
}

std::string mock_select(const std::vector<std::string>& lines) {
    std::size_t k = 10;
    if (auto v = header_value(lines, "select_k:"); !v.empty()) k = static_cast<std::size_t>(std::max(0, std::atoi(v.c_str())));
    std::vector<std::pair<std::string, double>> cands;
    for (const auto& l : section(lines, "Candidate factors")) {
        if (starts_with(l, "### ")) {
            auto close = l.find(']');
            cands.emplace_back(trim(std::string_view(l).substr(close == std::string::npos ? 4 : close + 1)), 0.0);
        } else if (!cands.empty() && starts_with(l, "metric mean_rank_ic_h1:")) {
            double v = std::atof(l.c_str() + 23);
            cands.back().second = std::isfinite(v) ? v : 0.0;
        }
    }
    std::stable_sort(cands.begin(), cands.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
    if (cands.size() > k) cands.resize(k);
    auto state = section(lines, "Market state");
    std::string out = "Regime read: " + (state.empty() ? std::string("no state provided") : trim(state.front())) + ".\n";
    std::string sel;
    for (const auto& [id, ic] : cands) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.4f", ic);
        out += "Activate " + id + ": backtest mean RankIC " + buf + ".\n";
        sel += (sel.empty() ? "" : ", ") + id;
    }
    out += "<selection>" + sel + "</selection>\n";
    return out;
}

std::string digest(std::string_view s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    char buf[32];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace

std::string TextGenClient::complete(std::string_view user_prompt, const GenerationParams& params) {
    std::vector<ChatMessage> messages{{"user", std::string(user_prompt)}};
    return complete(messages, params);
}

std::string prompt_task(std::string_view prompt) { return header_value(lines_of(prompt), "task:"); }

std::string MockClient::complete(std::span<const ChatMessage> messages, const GenerationParams&) {
    ++calls_;
    std::string_view prompt;
    for (const auto& m : messages) {
        if (m.role == "user") prompt = m.content;
    }
    auto lines = lines_of(prompt);
    const std::string task = header_value(lines, "task:");
    if (task == "memory") return mock_memory(lines);
    if (task == "profile") return mock_profile(lines);
    if (task == "state") return mock_state(lines);
    if (task == "judge") return "0";
    if (task == "select") return mock_select(lines);
    return "ECHO " + digest(prompt) + " " + std::to_string(prompt.size());
}

RemoteClient::RemoteClient(RemoteConfig config) : config_(std::move(config)) {
    if (config_.endpoint.empty()) throw ConfigError("remote client needs an endpoint");
    if (config_.retries < 0) throw ConfigError("remote retries must be >= 0");
    if (const char* t = std::getenv(config_.token_env.c_str())) token_ = t;
}

std::string RemoteClient::complete(std::span<const ChatMessage> messages, const GenerationParams& params) {
    nlohmann::json body;
    body["model"] = params.model;
    body["messages"] = nlohmann::json::array();
    for (const auto& m : messages) body["messages"].push_back({{"role", m.role}, {"content", m.content}});
    body["temperature"] = params.temperature;
    body["top_p"] = params.top_p;
    body["max_tokens"] = params.max_tokens;
    const std::string payload = body.dump();

    httplib::Client cli(config_.endpoint);
    auto secs = std::chrono::duration<double>(config_.timeout_seconds);
    cli.set_connection_timeout(std::chrono::duration_cast<std::chrono::microseconds>(secs));
    cli.set_read_timeout(std::chrono::duration_cast<std::chrono::microseconds>(secs));
    cli.set_write_timeout(std::chrono::duration_cast<std::chrono::microseconds>(secs));
    httplib::Headers headers;
    if (!token_.empty()) headers.emplace("Authorization", "Bearer " + token_);

    std::string last_error;
    double backoff = config_.backoff_seconds;
    for (int attempt = 0; attempt <= config_.retries; ++attempt) {
        if (attempt > 0) {
            log::warn("remote call failed (" + last_error + "), retry " + std::to_string(attempt));
            std::this_thread::sleep_for(std::chrono::duration<double>(backoff));
            backoff *= 2.0;
        }
        auto res = cli.Post(config_.path, headers, payload, "application/json");
        if (!res) {
            last_error = "transport: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status == 429 || res->status >= 500) {
            last_error = "HTTP " + std::to_string(res->status);
            continue;
        }
        if (res->status != 200) throw RemoteError("remote service returned HTTP " + std::to_string(res->status));
        auto j = nlohmann::json::parse(res->body, nullptr, false);
        if (j.is_discarded()) throw RemoteError("remote service returned invalid JSON");
        if (j.contains("choices") && j["choices"].is_array() && !j["choices"].empty()) {
            const auto& c = j["choices"][0];
            if (c.contains("message") && c["message"].contains("content") && c["message"]["content"].is_string()) {
                return c["message"]["content"].get<std::string>();
            }
            if (c.contains("text") && c["text"].is_string()) return c["text"].get<std::string>();
        }
        if (j.contains("text") && j["text"].is_string()) return j["text"].get<std::string>();
        throw RemoteError("remote reply has no completion text");
    }
    throw RemoteError("remote service unavailable after " + std::to_string(config_.retries + 1) +
                      " attempts: " + last_error);
}

}  // namespace factorgate::context
