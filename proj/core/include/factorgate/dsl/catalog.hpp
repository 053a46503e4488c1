#pragma once

#include "factorgate/dsl/ast.hpp"
#include "factorgate/errors.hpp"

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace factorgate::dsl {

struct FactorEntry {
    std::string id;
    std::string source;
    ExprPtr expr;
    std::string description;
};

// Raised while loading a catalog. line is 1-based; offset is the parse
// offset within the formula when the failure is a parse error.
class CatalogError : public Error {
public:
    CatalogError(const std::string& what, std::size_t line, std::string id, std::optional<std::size_t> offset = {})
        : Error(what), line_(line), id_(std::move(id)), offset_(offset) {}

    std::size_t line() const noexcept { return line_; }
    const std::string& id() const noexcept { return id_; }
    std::optional<std::size_t> offset() const noexcept { return offset_; }

private:
    std::size_t line_;
    std::string id_;
    std::optional<std::size_t> offset_;
};

// Ordered factor universe. Iteration order is insertion order.
class FactorCatalog {
public:
    // Throws CatalogError on a duplicate id.
    void add(FactorEntry entry);

    std::size_t size() const { return entries_.size(); }
    bool empty() const { return entries_.empty(); }
    const std::vector<FactorEntry>& entries() const { return entries_; }
    const FactorEntry& operator[](std::size_t i) const { return entries_[i]; }

    const FactorEntry* find(std::string_view id) const;
    std::optional<std::size_t> index_of(std::string_view id) const;
    bool contains(std::string_view id) const { return index_of(id).has_value(); }
    std::vector<std::string> ids() const;

    void set_description(std::string_view id, std::string description);

private:
    std::vector<FactorEntry> entries_;
    std::unordered_map<std::string, std::size_t> index_;
};

// `factor_id,formula` lines; blank lines and lines starting with '#' are skipped.
FactorCatalog parse_catalog(std::string_view text);
FactorCatalog load_catalog(const std::string& path);

// The shipped 40-formula candidate set.
const FactorCatalog& default_catalog();
std::string_view default_catalog_text();

}  // namespace factorgate::dsl
