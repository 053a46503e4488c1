#include "factorgate/dsl/builtins.hpp"

#include <array>

namespace factorgate::dsl {

namespace {
constexpr std::array<BuiltinSpec, 22> kBuiltins{{
    {"rank", 1, false, true},
    {"delay", 2, true, false},
    {"delta", 2, true, false},
    {"ts_sum", 2, true, false},
    {"ts_mean", 2, true, false},
    {"ts_min", 2, true, false},
    {"ts_max", 2, true, false},
    {"ts_rank", 2, true, false},
    {"ts_argmax", 2, true, false},
    {"ts_argmin", 2, true, false},
    {"stddev", 2, true, false},
    {"correlation", 3, true, false},
    {"covariance", 3, true, false},
    {"decay_linear", 2, true, false},
    {"signedpower", 2, false, false},
    {"scale", 1, false, true},
    {"abs", 1, false, false},
    {"log", 1, false, false},
    {"sign", 1, false, false},
    {"min", 2, false, false},
    {"max", 2, false, false},
    {"adv", 1, true, false},
}};
}  // namespace

std::span<const BuiltinSpec> builtin_catalog() { return kBuiltins; }

const BuiltinSpec* find_builtin(std::string_view name) {
    if (name == "sum") name = "ts_sum";
    for (const auto& b : kBuiltins) {
        if (b.name == name) return &b;
    }
    return nullptr;
}

}  // namespace factorgate::dsl
