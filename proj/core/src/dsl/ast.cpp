#include "factorgate/dsl/ast.hpp"

#include "factorgate/dsl/builtins.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace factorgate::dsl {

std::string_view field_ref_name(FieldRef f) {
    switch (f) {
        case FieldRef::open: return "open";
        case FieldRef::high: return "high";
        case FieldRef::low: return "low";
        case FieldRef::close: return "close";
        case FieldRef::volume: return "volume";
        case FieldRef::vwap: return "vwap";
        case FieldRef::returns: return "returns";
    }
    return "?";
}

std::string_view binary_op_symbol(BinaryOp op) {
    switch (op) {
        case BinaryOp::add: return "+";
        case BinaryOp::sub: return "-";
        case BinaryOp::mul: return "*";
        case BinaryOp::div: return "/";
        case BinaryOp::pow: return "^";
        case BinaryOp::lt: return "<";
        case BinaryOp::le: return "<=";
        case BinaryOp::gt: return ">";
        case BinaryOp::ge: return ">=";
        case BinaryOp::eq: return "==";
        case BinaryOp::ne: return "!=";
        case BinaryOp::logical_and: return "&&";
        case BinaryOp::logical_or: return "||";
    }
    return "?";
}

ExprPtr make_field(FieldRef f, Span span) { return std::make_shared<Expr>(Expr{FieldNode{f}, span}); }
ExprPtr make_number(double v, Span span) { return std::make_shared<Expr>(Expr{NumberNode{v}, span}); }
ExprPtr make_unary(UnaryOp op, ExprPtr operand, Span span) {
    return std::make_shared<Expr>(Expr{UnaryNode{op, std::move(operand)}, span});
}
ExprPtr make_binary(BinaryOp op, ExprPtr lhs, ExprPtr rhs, Span span) {
    return std::make_shared<Expr>(Expr{BinaryNode{op, std::move(lhs), std::move(rhs)}, span});
}
ExprPtr make_conditional(ExprPtr c, ExprPtr t, ExprPtr f, Span span) {
    return std::make_shared<Expr>(Expr{ConditionalNode{std::move(c), std::move(t), std::move(f)}, span});
}
ExprPtr make_call(std::string function, std::vector<ExprPtr> args, Span span) {
    return std::make_shared<Expr>(Expr{CallNode{std::move(function), std::move(args)}, span});
}

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

std::string format_literal(double v) {
    char buf[40];
    if (v == std::floor(v) && std::fabs(v) < 1e15) {
        std::snprintf(buf, sizeof buf, "%.0f", v);
    } else {
        std::snprintf(buf, sizeof buf, "%.17g", v);
    }
    std::string s = buf;
    if (std::signbit(v)) s = "(" + s + ")";
    return s;
}

// Window argument of a windowed call, assumed validated by the parser.
std::size_t window_of(const CallNode& c) {
    const auto& last = *c.args.back();
    return static_cast<std::size_t>(std::get<NumberNode>(last.node).value);
}

}  // namespace

bool structurally_equal(const Expr& a, const Expr& b) {
    if (a.node.index() != b.node.index()) return false;
    return std::visit(
        overloaded{
            [&](const FieldNode& x) { return x.field == std::get<FieldNode>(b.node).field; },
            [&](const NumberNode& x) { return x.value == std::get<NumberNode>(b.node).value; },
            [&](const UnaryNode& x) {
                const auto& y = std::get<UnaryNode>(b.node);
                return x.op == y.op && structurally_equal(*x.operand, *y.operand);
            },
            [&](const BinaryNode& x) {
                const auto& y = std::get<BinaryNode>(b.node);
                return x.op == y.op && structurally_equal(*x.lhs, *y.lhs) && structurally_equal(*x.rhs, *y.rhs);
            },
            [&](const ConditionalNode& x) {
                const auto& y = std::get<ConditionalNode>(b.node);
                return structurally_equal(*x.condition, *y.condition) &&
                       structurally_equal(*x.if_true, *y.if_true) && structurally_equal(*x.if_false, *y.if_false);
            },
            [&](const CallNode& x) {
                const auto& y = std::get<CallNode>(b.node);
                if (x.function != y.function || x.args.size() != y.args.size()) return false;
                for (std::size_t i = 0; i < x.args.size(); ++i) {
                    if (!structurally_equal(*x.args[i], *y.args[i])) return false;
                }
                return true;
            },
        },
        a.node);
}

std::string unparse(const Expr& e) {
    return std::visit(
        overloaded{
            [](const FieldNode& x) { return std::string(field_ref_name(x.field)); },
            [](const NumberNode& x) { return format_literal(x.value); },
            [](const UnaryNode& x) {
                return std::string(x.op == UnaryOp::negate ? "(-" : "(!") + unparse(*x.operand) + ")";
            },
            [](const BinaryNode& x) {
                return "(" + unparse(*x.lhs) + " " + std::string(binary_op_symbol(x.op)) + " " + unparse(*x.rhs) +
                       ")";
            },
            [](const ConditionalNode& x) {
                return "(" + unparse(*x.condition) + " ? " + unparse(*x.if_true) + " : " + unparse(*x.if_false) +
                       ")";
            },
            [](const CallNode& x) {
                std::string s = x.function + "(";
                for (std::size_t i = 0; i < x.args.size(); ++i) {
                    if (i) s += ", ";
                    s += unparse(*x.args[i]);
                }
                return s + ")";
            },
        },
        e.node);
}

std::size_t max_lookback(const Expr& e) {
    return std::visit(
        overloaded{
            [](const FieldNode& x) -> std::size_t { return x.field == FieldRef::returns ? 1 : 0; },
            [](const NumberNode&) -> std::size_t { return 0; },
            [](const UnaryNode& x) { return max_lookback(*x.operand); },
            [](const BinaryNode& x) { return std::max(max_lookback(*x.lhs), max_lookback(*x.rhs)); },
            [](const ConditionalNode& x) {
                return std::max({max_lookback(*x.condition), max_lookback(*x.if_true), max_lookback(*x.if_false)});
            },
            [](const CallNode& x) -> std::size_t {
                const BuiltinSpec* spec = find_builtin(x.function);
                std::size_t inner = 0;
                std::size_t n_series = spec && spec->windowed ? x.args.size() - 1 : x.args.size();
                for (std::size_t i = 0; i < n_series; ++i) inner = std::max(inner, max_lookback(*x.args[i]));
                if (!spec || !spec->windowed) return inner;
                std::size_t w = window_of(x);
                if (x.function == "delay" || x.function == "delta") return inner + w;
                return inner + w - 1;
            },
        },
        e.node);
}

}  // namespace factorgate::dsl
