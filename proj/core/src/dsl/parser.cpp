#include "factorgate/dsl/parser.hpp"

#include "factorgate/dsl/builtins.hpp"
#include "factorgate/errors.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <string>

namespace factorgate::dsl {

namespace {

enum class Tok { number, ident, op, lparen, rparen, comma, question, colon, end };

struct Token {
    Tok kind;
    std::string text;
    double number = 0.0;
    std::size_t offset = 0;
};

std::string lower(std::string_view s) {
    std::string out(s);
    for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

class Lexer {
public:
    explicit Lexer(std::string_view src) : src_(src) {}

    Token next() {
        while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
        std::size_t start = pos_;
        if (pos_ >= src_.size()) return {Tok::end, "", 0.0, start};
        char c = src_[pos_];
        if (std::isdigit(static_cast<unsigned char>(c)) ||
            (c == '.' && pos_ + 1 < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_ + 1])))) {
            return lex_number(start);
        }
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            while (pos_ < src_.size() &&
                   (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_')) {
                ++pos_;
            }
            return {Tok::ident, std::string(src_.substr(start, pos_ - start)), 0.0, start};
        }
        ++pos_;
        switch (c) {
            case '(': return {Tok::lparen, "(", 0.0, start};
            case ')': return {Tok::rparen, ")", 0.0, start};
            case ',': return {Tok::comma, ",", 0.0, start};
            case '?': return {Tok::question, "?", 0.0, start};
            case ':': return {Tok::colon, ":", 0.0, start};
            case '+': case '-': case '*': case '/': case '^':
                return {Tok::op, std::string(1, c), 0.0, start};
            case '<': case '>': case '=': case '!':
                if (pos_ < src_.size() && src_[pos_] == '=') {
                    ++pos_;
                    return {Tok::op, std::string{c, '='}, 0.0, start};
                }
                if (c == '=') throw ParseError("unexpected '=' (use '==')", start, 1);
                return {Tok::op, std::string(1, c), 0.0, start};
            case '&': case '|':
                if (pos_ < src_.size() && src_[pos_] == c) {
                    ++pos_;
                    return {Tok::op, std::string(2, c), 0.0, start};
                }
                break;
            default: break;
        }
        throw ParseError(std::string("unexpected character '") + c + "'", start, 1);
    }

private:
    Token lex_number(std::size_t start) {
        auto digits = [&] {
            while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_;
        };
        digits();
        if (pos_ < src_.size() && src_[pos_] == '.') {
            ++pos_;
            digits();
        }
        if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
            std::size_t save = pos_;
            ++pos_;
            if (pos_ < src_.size() && (src_[pos_] == '+' || src_[pos_] == '-')) ++pos_;
            if (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) {
                digits();
            } else {
                pos_ = save;
            }
        }
        std::string text(src_.substr(start, pos_ - start));
        double v = std::strtod(text.c_str(), nullptr);
        if (!std::isfinite(v)) throw ParseError("numeric literal out of range", start, text.size());
        return {Tok::number, text, v, start};
    }

    std::string_view src_;
    std::size_t pos_ = 0;
};

class Parser {
public:
    explicit Parser(std::string_view src) : lexer_(src), src_(src) { advance(); }

    ExprPtr parse() {
        ExprPtr e = conditional();
        if (cur_.kind != Tok::end) fail("unexpected '" + cur_.text + "'");
        return e;
    }

private:
    [[noreturn]] void fail(const std::string& msg) {
        if (cur_.kind == Tok::end) throw ParseError("unexpected end of input", cur_.offset, 0);
        throw ParseError(msg, cur_.offset, cur_.text.size());
    }

    void advance() {
        prev_end_ = cur_.offset + cur_.text.size();
        cur_ = lexer_.next();
    }

    bool accept_op(std::string_view op) {
        if (cur_.kind == Tok::op && cur_.text == op) {
            advance();
            return true;
        }
        return false;
    }

    void expect(Tok kind, const char* what) {
        if (cur_.kind != kind) fail(std::string("expected ") + what);
        advance();
    }

    Span span_from(std::size_t start) const {
        std::size_t end = prev_end_;
        return {start, end > start ? end - start : 0};
    }

    ExprPtr conditional() {
        std::size_t start = cur_.offset;
        ExprPtr c = logical_or();
        if (cur_.kind == Tok::question) {
            advance();
            ExprPtr t = conditional();
            expect(Tok::colon, "':'");
            ExprPtr f = conditional();
            return make_conditional(c, t, f, span_from(start));
        }
        return c;
    }

    template <class Next>
    ExprPtr left_assoc(Next next, std::initializer_list<std::pair<std::string_view, BinaryOp>> ops) {
        std::size_t start = cur_.offset;
        ExprPtr lhs = (this->*next)();
        for (;;) {
            bool matched = false;
            for (auto [sym, op] : ops) {
                if (accept_op(sym)) {
                    ExprPtr rhs = (this->*next)();
                    lhs = make_binary(op, lhs, rhs, span_from(start));
                    matched = true;
                    break;
                }
            }
            if (!matched) return lhs;
        }
    }

    ExprPtr logical_or() { return left_assoc(&Parser::logical_and, {{"||", BinaryOp::logical_or}}); }
    ExprPtr logical_and() { return left_assoc(&Parser::equality, {{"&&", BinaryOp::logical_and}}); }
    ExprPtr equality() {
        return left_assoc(&Parser::relational, {{"==", BinaryOp::eq}, {"!=", BinaryOp::ne}});
    }
    ExprPtr relational() {
        return left_assoc(&Parser::additive, {{"<=", BinaryOp::le},
                                              {">=", BinaryOp::ge},
                                              {"<", BinaryOp::lt},
                                              {">", BinaryOp::gt}});
    }
    ExprPtr additive() {
        return left_assoc(&Parser::multiplicative, {{"+", BinaryOp::add}, {"-", BinaryOp::sub}});
    }
    ExprPtr multiplicative() {
        return left_assoc(&Parser::unary, {{"*", BinaryOp::mul}, {"/", BinaryOp::div}});
    }

    ExprPtr unary() {
        std::size_t start = cur_.offset;
        if (accept_op("-")) {
            ExprPtr operand = unary();
            if (const auto* n = std::get_if<NumberNode>(&operand->node)) {
                return make_number(-n->value, span_from(start));
            }
            return make_unary(UnaryOp::negate, operand, span_from(start));
        }
        if (accept_op("!")) return make_unary(UnaryOp::logical_not, unary(), span_from(start));
        if (accept_op("+")) return unary();
        return power();
    }

    ExprPtr power() {
        std::size_t start = cur_.offset;
        ExprPtr base = primary();
        if (accept_op("^")) {
            ExprPtr exponent = unary();
            return make_binary(BinaryOp::pow, base, exponent, span_from(start));
        }
        return base;
    }

    ExprPtr primary() {
        std::size_t start = cur_.offset;
        switch (cur_.kind) {
            case Tok::number: {
                double v = cur_.number;
                consume();
                return make_number(v, span_from(start));
            }
            case Tok::lparen: {
                advance();
                ExprPtr e = conditional();
                if (cur_.kind != Tok::rparen) fail("expected ')'");
                consume();
                return e;
            }
            case Tok::ident: return identifier();
            default: fail("expected an expression");
        }
    }

    void consume() { advance(); }

    ExprPtr identifier() {
        Token tok = cur_;
        std::string name = lower(tok.text);
        consume();
        if (cur_.kind == Tok::lparen) return call(tok, name);

        static const std::pair<std::string_view, FieldRef> fields[] = {
            {"open", FieldRef::open},     {"high", FieldRef::high},     {"low", FieldRef::low},
            {"close", FieldRef::close},   {"volume", FieldRef::volume}, {"vwap", FieldRef::vwap},
            {"returns", FieldRef::returns},
        };
        for (auto [fname, f] : fields) {
            if (name == fname) return make_field(f, span_from(tok.offset));
        }
        if (name.size() > 3 && name.compare(0, 3, "adv") == 0 &&
            name.find_first_not_of("0123456789", 3) == std::string::npos) {
            int window = std::atoi(name.c_str() + 3);
            if (window <= 0) throw ParseError("adv window must be positive", tok.offset, tok.text.size());
            Span s{tok.offset, tok.text.size()};
            return make_call("adv", {make_number(window, s)}, s);
        }
        throw ParseError("unknown field '" + tok.text + "'", tok.offset, tok.text.size());
    }

    ExprPtr call(const Token& name_tok, const std::string& name) {
        const BuiltinSpec* spec = find_builtin(name);
        if (!spec) {
            throw ParseError("unknown function '" + name_tok.text + "'", name_tok.offset, name_tok.text.size());
        }
        advance();  // '('
        std::vector<ExprPtr> args;
        if (cur_.kind != Tok::rparen) {
            args.push_back(conditional());
            while (cur_.kind == Tok::comma) {
                advance();
                args.push_back(conditional());
            }
        }
        if (cur_.kind != Tok::rparen) fail("expected ',' or ')'");
        consume();
        Span span = span_from(name_tok.offset);
        if (static_cast<int>(args.size()) != spec->arity) {
            throw ParseError(std::string(spec->name) + " expects " + std::to_string(spec->arity) + " argument(s), got " +
                                 std::to_string(args.size()),
                             span.offset, span.length);
        }
        if (spec->windowed) {
            const Expr& w = *args.back();
            const auto* n = std::get_if<NumberNode>(&w.node);
            if (!n || n->value < 1.0 || n->value != std::floor(n->value) || n->value > 1e6) {
                throw ParseError(std::string(spec->name) + " window must be a positive integer literal",
                                 w.span.offset, w.span.length);
            }
        }
        return make_call(std::string(spec->name), std::move(args), span);
    }

    Lexer lexer_;
    std::string_view src_;
    Token cur_{Tok::end, "", 0.0, 0};
    std::size_t prev_end_ = 0;
};

}  // namespace

ExprPtr parse_alpha(std::string_view source) { return Parser(source).parse(); }

}  // namespace factorgate::dsl
