#pragma once

#include "factorgate/dsl/ast.hpp"

#include <string_view>

namespace factorgate::dsl {

// Parses an Alpha101-style formula.
//
// Grammar (lowest to highest precedence):
//   cond    := or ('?' cond ':' cond)?
//   or      := and ('||' and)*
//   and     := eq ('&&' eq)*
//   eq      := rel (('==' | '!=') rel)*
//   rel     := add (('<' | '<=' | '>' | '>=') add)*
//   add     := mul (('+' | '-') mul)*
//   mul     := unary (('*' | '/') unary)*
//   unary   := ('-' | '!' | '+') unary | power
//   power   := primary ('^' unary)?          right associative
//   primary := number | field | adv<d> | name '(' args ')' | '(' cond ')'
//
// Function names are case-insensitive. A minus applied directly to a numeric
// literal folds into a negative literal. Throws ParseError with the source span.
ExprPtr parse_alpha(std::string_view source);

}  // namespace factorgate::dsl
