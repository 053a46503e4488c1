#include "factorgate/context/selection.hpp"

#include <algorithm>
#include <cctype>
#include <regex>

namespace factorgate::context {

namespace {

constexpr std::string_view kOpen = "<selection>";
constexpr std::string_view kClose = "</selection>";

struct Block {
    std::size_t begin = std::string_view::npos;  // start of the open tag
    std::size_t end = 0;                         // one past the close tag
    std::string_view body;
};

Block last_block(std::string_view text) {
    Block b;
    std::size_t open = text.rfind(kOpen);
    while (open != std::string_view::npos) {
        std::size_t body = open + kOpen.size();
        std::size_t close = text.find(kClose, body);
        if (close != std::string_view::npos) {
            b.begin = open;
            b.end = close + kClose.size();
            b.body = text.substr(body, close - body);
            return b;
        }
        if (open == 0) break;
        open = text.rfind(kOpen, open - 1);
    }
    return b;
}

std::vector<std::string> split_ids(std::string_view body) {
    std::vector<std::string> out;
    std::string cur;
    auto flush = [&] {
        if (!cur.empty()) out.push_back(cur);
        cur.clear();
    };
    for (char c : body) {
        if (c == ',' || c == ';' || std::isspace(static_cast<unsigned char>(c))) {
            flush();
        } else {
            cur += c;
        }
    }
    flush();
    return out;
}

void push_unique(std::vector<std::string>& v, const std::string& s) {
    if (std::find(v.begin(), v.end(), s) == v.end()) v.push_back(s);
}

std::vector<std::string> catalog_order(const std::vector<std::string>& ids, const dsl::FactorCatalog& catalog) {
    std::vector<std::string> out;
    for (const auto& e : catalog.entries()) {
        if (std::find(ids.begin(), ids.end(), e.id) != ids.end()) out.push_back(e.id);
    }
    return out;
}

}  // namespace

std::string_view status_name(ParseStatus s) {
    switch (s) {
        case ParseStatus::clean: return "clean";
        case ParseStatus::recovered: return "recovered";
        case ParseStatus::unparsable: return "unparsable";
    }
    return "unknown";
}

std::vector<std::string> find_id_tokens(std::string_view text) {
    static const std::regex id_re("[A-Za-z][A-Za-z0-9]*_[0-9]+");
    std::vector<std::string> out;
    const std::string s(text);
    for (auto it = std::sregex_iterator(s.begin(), s.end(), id_re); it != std::sregex_iterator(); ++it) {
        // Skip matches glued to a longer identifier.
        auto pos = static_cast<std::size_t>(it->position());
        auto end = pos + static_cast<std::size_t>(it->length());
        auto word = [&](std::size_t i) { return std::isalnum(static_cast<unsigned char>(s[i])) || s[i] == '_'; };
        if (pos > 0 && word(pos - 1)) continue;
        if (end < s.size() && word(end)) continue;
        out.push_back(it->str());
    }
    return out;
}

std::string reasoning_text(std::string_view text) {
    Block b = last_block(text);
    if (b.begin == std::string_view::npos) return std::string(text);
    return std::string(text.substr(0, b.begin)) + std::string(text.substr(b.end));
}

RawResponse parse_selection(std::string_view text, const dsl::FactorCatalog& catalog) {
    RawResponse r;
    r.text = std::string(text);
    std::vector<std::string> valid;

    Block b = last_block(text);
    if (b.begin != std::string_view::npos) {
        for (const auto& id : split_ids(b.body)) {
            if (catalog.contains(id)) {
                push_unique(valid, id);
            } else {
                push_unique(r.invalid_ids, id);
            }
        }
        r.status = ParseStatus::clean;
        r.selection = catalog_order(valid, catalog);
        return r;
    }

    std::vector<std::string> alien;
    for (const auto& id : find_id_tokens(text)) {
        if (catalog.contains(id)) {
            push_unique(valid, id);
        } else {
            push_unique(alien, id);
        }
    }
    if (valid.empty()) return r;  // unparsable
    r.status = ParseStatus::recovered;
    r.selection = catalog_order(valid, catalog);
    r.invalid_ids = std::move(alien);
    return r;
}

}  // namespace factorgate::context
