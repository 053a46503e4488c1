#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace factorgate::dsl {

enum class FieldRef { open, high, low, close, volume, vwap, returns };

enum class UnaryOp { negate, logical_not };

enum class BinaryOp {
    add, sub, mul, div, pow,
    lt, le, gt, ge, eq, ne,
    logical_and, logical_or,
};

std::string_view field_ref_name(FieldRef f);
std::string_view binary_op_symbol(BinaryOp op);

// Location of a node in the formula source.
struct Span {
    std::size_t offset = 0;
    std::size_t length = 0;
};

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

struct FieldNode {
    FieldRef field;
};

struct NumberNode {
    double value;
};

struct UnaryNode {
    UnaryOp op;
    ExprPtr operand;
};

struct BinaryNode {
    BinaryOp op;
    ExprPtr lhs;
    ExprPtr rhs;
};

struct ConditionalNode {
    ExprPtr condition;
    ExprPtr if_true;
    ExprPtr if_false;
};

// Builtin application; `function` is the canonical lowercase name.
struct CallNode {
    std::string function;
    std::vector<ExprPtr> args;
};

struct Expr {
    std::variant<FieldNode, NumberNode, UnaryNode, BinaryNode, ConditionalNode, CallNode> node;
    Span span;
};

ExprPtr make_field(FieldRef f, Span span = {});
ExprPtr make_number(double v, Span span = {});
ExprPtr make_unary(UnaryOp op, ExprPtr operand, Span span = {});
ExprPtr make_binary(BinaryOp op, ExprPtr lhs, ExprPtr rhs, Span span = {});
ExprPtr make_conditional(ExprPtr c, ExprPtr t, ExprPtr f, Span span = {});
ExprPtr make_call(std::string function, std::vector<ExprPtr> args, Span span = {});

// Equality of tree shape and values; spans are ignored.
bool structurally_equal(const Expr& a, const Expr& b);

// Canonical, fully parenthesised source text. parse(unparse(e)) is
// structurally equal to e for any tree the parser can produce.
std::string unparse(const Expr& e);

// Number of trailing history rows (beyond the evaluation date) the
// expression needs to produce a value.
std::size_t max_lookback(const Expr& e);

}  // namespace factorgate::dsl
