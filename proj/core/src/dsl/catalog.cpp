#include "factorgate/dsl/catalog.hpp"

#include "factorgate/csv.hpp"
#include "factorgate/dsl/parser.hpp"

#include <fstream>
#include <sstream>

namespace factorgate::assets {
std::string_view alpha40_csv();
}

namespace factorgate::dsl {

void FactorCatalog::add(FactorEntry entry) {
    if (index_.count(entry.id)) throw CatalogError("duplicate factor id '" + entry.id + "'", 0, entry.id);
    index_.emplace(entry.id, entries_.size());
    entries_.push_back(std::move(entry));
}

const FactorEntry* FactorCatalog::find(std::string_view id) const {
    auto i = index_of(id);
    return i ? &entries_[*i] : nullptr;
}

std::optional<std::size_t> FactorCatalog::index_of(std::string_view id) const {
    auto it = index_.find(std::string(id));
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

std::vector<std::string> FactorCatalog::ids() const {
    std::vector<std::string> out;
    out.reserve(entries_.size());
    for (const auto& e : entries_) out.push_back(e.id);
    return out;
}

void FactorCatalog::set_description(std::string_view id, std::string description) {
    auto i = index_of(id);
    if (!i) throw Error("unknown factor id '" + std::string(id) + "'");
    entries_[*i].description = std::move(description);
}

FactorCatalog parse_catalog(std::string_view text) {
    FactorCatalog catalog;
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t line_no = 0;
    while (csv::read_line(in, line)) {
        ++line_no;
        std::string_view body = csv::trim(line);
        if (body.empty() || body.front() == '#') continue;
        auto comma = body.find(',');
        if (comma == std::string_view::npos) {
            throw CatalogError("line " + std::to_string(line_no) + ": expected 'factor_id,formula'", line_no, "");
        }
        std::string id(csv::trim(body.substr(0, comma)));
        std::string source(csv::trim(body.substr(comma + 1)));
        if (id.empty()) throw CatalogError("line " + std::to_string(line_no) + ": empty factor id", line_no, id);
        if (catalog.contains(id)) {
            throw CatalogError("line " + std::to_string(line_no) + ": duplicate factor id '" + id + "'", line_no, id);
        }
        ExprPtr expr;
        try {
            expr = parse_alpha(source);
        } catch (const ParseError& e) {
            throw CatalogError("line " + std::to_string(line_no) + ": factor '" + id + "': " + e.what(), line_no, id,
                               e.offset());
        }
        catalog.add({id, source, expr, ""});
    }
    return catalog;
}

FactorCatalog load_catalog(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open catalog file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_catalog(ss.str());
}

std::string_view default_catalog_text() { return assets::alpha40_csv(); }

const FactorCatalog& default_catalog() {
    static const FactorCatalog catalog = parse_catalog(default_catalog_text());
    return catalog;
}

}  // namespace factorgate::dsl
