#pragma once

#include "factorgate/date.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace factorgate::app {

// Flat `key = value` configuration. Blank lines and lines starting with '#'
// are ignored. Unknown keys are rejected so typos fail loudly.
class Config {
public:
    static Config parse(std::string_view text, std::string_view origin = "config");
    static Config load(const std::filesystem::path& path);

    // Accepts "key=value"; throws ConfigError otherwise.
    void apply_override(std::string_view assignment);
    void set(const std::string& key, std::string value);

    bool has(const std::string& key) const;
    std::string str(const std::string& key, const std::string& fallback = "") const;
    double number(const std::string& key, double fallback) const;
    long long integer(const std::string& key, long long fallback) const;
    bool flag(const std::string& key, bool fallback) const;
    std::optional<Date> date(const std::string& key) const;
    // File path; relative values resolve against the config file's directory.
    std::string path(const std::string& key) const;
    // Comma- or whitespace-separated items; empty when the key is absent.
    std::vector<std::string> list(const std::string& key) const;
    std::vector<int> int_list(const std::string& key, const std::vector<int>& fallback) const;

    // Sorted "key=value\n" lines; the config hash is taken over this text.
    std::string canonical() const;
    const std::map<std::string, std::string>& entries() const { return entries_; }

    static const std::vector<std::string>& known_keys();

private:
    std::map<std::string, std::string> entries_;
    std::filesystem::path base_dir_;
};

std::string sha256_hex(std::string_view data);

}  // namespace factorgate::app
