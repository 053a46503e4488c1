#pragma once

#include <span>
#include <string_view>

namespace factorgate::dsl {

struct BuiltinSpec {
    std::string_view name;
    int arity;
    bool windowed;         // last argument is a positive integer literal window
    bool cross_sectional;  // computed across tickers on each date
};

// The frozen operator set, in a stable order.
std::span<const BuiltinSpec> builtin_catalog();

// Lookup by canonical lowercase name. Also resolves the alias "sum" -> ts_sum.
const BuiltinSpec* find_builtin(std::string_view lowercase_name);

}  // namespace factorgate::dsl
