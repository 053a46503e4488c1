#include "config.hpp"

#include "factorgate/csv.hpp"
#include "factorgate/matrix.hpp"
#include "factorgate/errors.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

namespace factorgate::app {

const std::vector<std::string>& Config::known_keys() {
    static const std::vector<std::string> keys{
        "seed", "run_dir", "threads", "catalog", "model",
        "data.daily", "data.minutes", "data.limit_ratio",
        "synth.seed", "synth.tickers", "synth.days", "synth.signal", "synth.noise", "synth.planted", "synth.start",
        "fit.start", "fit.end", "fit.horizon",
        "backtest.start", "backtest.end",
        "exec.holding_days", "exec.top_n", "exec.fee_rate", "exec.price_mode", "exec.hold_if_unchanged",
        "exec.vwap_window",
        "strategy", "strategy.factors", "strategy.window", "strategy.k", "strategy.lambda", "strategy.checkpoint",
        "sweep.top_n", "sweep.holding_days", "sweep.threads",
        "reward.mode", "reward.holding_days", "reward.top_n", "reward.fee_rate", "reward.lambda_invalid",
        "reward.lambda_unparsable", "reward.lambda_size", "reward.k_max", "reward.judge",
        "grpo.epsilon", "grpo.beta", "grpo.group_size", "grpo.learning_rate", "grpo.iterations", "grpo.seed",
        "grpo.inner_epochs", "grpo.vocabulary", "grpo.first", "grpo.last", "grpo.max_length", "grpo.kl_placement",
        "client.kind", "client.endpoint", "client.path", "client.model", "client.token_env", "client.retries",
        "client.timeout", "client.temperature", "client.top_p", "client.max_tokens", "client.fallback_to_mock",
        "context.select_k", "context.news", "context.planted", "context.max_in_flight", "context.memory_chars",
    };
    return keys;
}

namespace {

bool known(const std::string& key) {
    const auto& k = Config::known_keys();
    return std::find(k.begin(), k.end(), key) != k.end();
}

}  // namespace

Config Config::parse(std::string_view text, std::string_view origin) {
    Config c;
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t lineno = 0;
    while (csv::read_line(in, line)) {
        ++lineno;
        auto body = csv::trim(line);
        if (body.empty() || body.front() == '#') continue;
        auto eq = body.find('=');
        if (eq == std::string_view::npos) {
            throw ConfigError(std::string(origin) + ":" + std::to_string(lineno) + ": expected key = value");
        }
        std::string key(csv::trim(body.substr(0, eq)));
        std::string value(csv::trim(body.substr(eq + 1)));
        if (!known(key)) throw ConfigError(std::string(origin) + ":" + std::to_string(lineno) + ": unknown key '" + key + "'");
        if (c.entries_.count(key)) {
            throw ConfigError(std::string(origin) + ":" + std::to_string(lineno) + ": duplicate key '" + key + "'");
        }
        c.entries_[key] = value;
    }
    return c;
}

Config Config::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read config file " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    Config c = parse(ss.str(), path.string());
    c.base_dir_ = path.parent_path();
    return c;
}

void Config::apply_override(std::string_view assignment) {
    auto eq = assignment.find('=');
    if (eq == std::string_view::npos) throw ConfigError("override must look like key=value: " + std::string(assignment));
    set(std::string(csv::trim(assignment.substr(0, eq))), std::string(csv::trim(assignment.substr(eq + 1))));
}

void Config::set(const std::string& key, std::string value) {
    if (!known(key)) throw ConfigError("unknown config key '" + key + "'");
    entries_[key] = std::move(value);
}

bool Config::has(const std::string& key) const {
    auto it = entries_.find(key);
    return it != entries_.end() && !it->second.empty();
}

std::string Config::str(const std::string& key, const std::string& fallback) const {
    return has(key) ? entries_.at(key) : fallback;
}

double Config::number(const std::string& key, double fallback) const {
    if (!has(key)) return fallback;
    auto v = csv::parse_number(entries_.at(key));
    if (!v || is_missing(*v)) throw ConfigError("config key " + key + ": not a number: " + entries_.at(key));
    return *v;
}

long long Config::integer(const std::string& key, long long fallback) const {
    if (!has(key)) return fallback;
    const auto& s = entries_.at(key);
    long long v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size()) throw ConfigError("config key " + key + ": not an integer: " + s);
    return v;
}

bool Config::flag(const std::string& key, bool fallback) const {
    if (!has(key)) return fallback;
    const auto& s = entries_.at(key);
    if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
    if (s == "false" || s == "0" || s == "no" || s == "off") return false;
    throw ConfigError("config key " + key + ": not a boolean: " + s);
}

std::optional<Date> Config::date(const std::string& key) const {
    if (!has(key)) return std::nullopt;
    try {
        return parse_date(entries_.at(key));
    } catch (const Error& e) {
        throw ConfigError("config key " + key + ": " + e.what());
    }
}

std::string Config::path(const std::string& key) const {
    std::filesystem::path p = str(key);
    if (p.empty() || p.is_absolute() || base_dir_.empty()) return p.string();
    return (base_dir_ / p).string();
}

std::vector<std::string> Config::list(const std::string& key) const {
    std::vector<std::string> out;
    if (!has(key)) return out;
    std::string cur;
    for (char ch : entries_.at(key) + ",") {
        if (ch == ',' || ch == ';' || ch == ' ' || ch == '\t') {
            if (!cur.empty()) out.push_back(cur);
            cur.clear();
        } else {
            cur += ch;
        }
    }
    return out;
}

std::vector<int> Config::int_list(const std::string& key, const std::vector<int>& fallback) const {
    if (!has(key)) return fallback;
    std::vector<int> out;
    for (const auto& item : list(key)) {
        int v = 0;
        auto [p, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
        if (ec != std::errc{} || p != item.data() + item.size()) {
            throw ConfigError("config key " + key + ": not an integer list item: " + item);
        }
        out.push_back(v);
    }
    return out;
}

std::string Config::canonical() const {
    std::string out;
    for (const auto& [k, v] : entries_) out += k + "=" + v + "\n";
    return out;
}

std::string sha256_hex(std::string_view data) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
        throw Error("SHA-256 failed");
    }
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[digest[i] >> 4];
        out += hex[digest[i] & 15];
    }
    return out;
}

}  // namespace factorgate::app
