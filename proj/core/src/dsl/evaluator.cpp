#include "factorgate/dsl/evaluator.hpp"

#include "factorgate/dsl/builtins.hpp"
#include "factorgate/errors.hpp"
#include "factorgate/stats.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

namespace factorgate::dsl {

namespace {

double finite_or_missing(double v) { return std::isfinite(v) ? v : kMissing; }

// Evaluates on panel rows [first, first + count).
class Evaluator {
public:
    Evaluator(const MarketPanel& panel, std::size_t first, std::size_t count)
        : panel_(panel), first_(first), rows_(count), cols_(panel.num_tickers()) {}

    Matrix eval(const Expr& e) {
        return std::visit([&](const auto& node) { return eval_node(node); }, e.node);
    }

private:
    Matrix field(Field f) const { return panel_.field(f).slice_rows(first_, rows_); }

    Matrix eval_node(const FieldNode& n) {
        switch (n.field) {
            case FieldRef::open: return field(Field::open);
            case FieldRef::high: return field(Field::high);
            case FieldRef::low: return field(Field::low);
            case FieldRef::close: return field(Field::close);
            case FieldRef::volume: return field(Field::volume);
            case FieldRef::vwap: return vwap_proxy();
            case FieldRef::returns: {
                Matrix c = field(Field::close);
                Matrix prev = shift(c, 1);
                return pointwise(c, prev, [](double a, double b) { return a / b - 1.0; });
            }
        }
        return Matrix(rows_, cols_);
    }

    Matrix vwap_proxy() const {
        Matrix h = field(Field::high), l = field(Field::low), c = field(Field::close);
        Matrix out(rows_, cols_);
        for (std::size_t i = 0; i < out.data().size(); ++i) {
            out.data()[i] = finite_or_missing((h.data()[i] + l.data()[i] + c.data()[i]) / 3.0);
        }
        return out;
    }

    Matrix eval_node(const NumberNode& n) { return Matrix(rows_, cols_, n.value); }

    Matrix eval_node(const UnaryNode& n) {
        Matrix x = eval(*n.operand);
        for (double& v : x.data()) {
            if (is_missing(v)) continue;
            v = n.op == UnaryOp::negate ? -v : (v != 0.0 ? 0.0 : 1.0);
        }
        return x;
    }

    Matrix eval_node(const BinaryNode& n) {
        Matrix a = eval(*n.lhs);
        Matrix b = eval(*n.rhs);
        auto truth = [](double v) { return v != 0.0; };
        switch (n.op) {
            case BinaryOp::add: return pointwise(a, b, std::plus<>{});
            case BinaryOp::sub: return pointwise(a, b, std::minus<>{});
            case BinaryOp::mul: return pointwise(a, b, std::multiplies<>{});
            case BinaryOp::div: return pointwise(a, b, std::divides<>{});
            case BinaryOp::pow: return pointwise(a, b, [](double x, double y) { return std::pow(x, y); });
            case BinaryOp::lt: return pointwise(a, b, [](double x, double y) { return x < y ? 1.0 : 0.0; });
            case BinaryOp::le: return pointwise(a, b, [](double x, double y) { return x <= y ? 1.0 : 0.0; });
            case BinaryOp::gt: return pointwise(a, b, [](double x, double y) { return x > y ? 1.0 : 0.0; });
            case BinaryOp::ge: return pointwise(a, b, [](double x, double y) { return x >= y ? 1.0 : 0.0; });
            case BinaryOp::eq: return pointwise(a, b, [](double x, double y) { return x == y ? 1.0 : 0.0; });
            case BinaryOp::ne: return pointwise(a, b, [](double x, double y) { return x != y ? 1.0 : 0.0; });
            case BinaryOp::logical_and:
                return pointwise(a, b, [&](double x, double y) { return truth(x) && truth(y) ? 1.0 : 0.0; });
            case BinaryOp::logical_or:
                return pointwise(a, b, [&](double x, double y) { return truth(x) || truth(y) ? 1.0 : 0.0; });
        }
        return Matrix(rows_, cols_);
    }

    Matrix eval_node(const ConditionalNode& n) {
        Matrix c = eval(*n.condition);
        Matrix t = eval(*n.if_true);
        Matrix f = eval(*n.if_false);
        Matrix out(rows_, cols_);
        for (std::size_t i = 0; i < out.data().size(); ++i) {
            double cv = c.data()[i];
            if (is_missing(cv)) continue;
            out.data()[i] = cv != 0.0 ? t.data()[i] : f.data()[i];
        }
        return out;
    }

    Matrix eval_node(const CallNode& n) {
        const std::string& fn = n.function;
        auto window = [&]() {
            return static_cast<std::size_t>(std::get<NumberNode>(n.args.back()->node).value);
        };
        if (fn == "adv") {
            Matrix dollar = pointwise(field(Field::volume), vwap_proxy(), std::multiplies<>{});
            return rolling(dollar, window(), [](std::span<const double> w) { return mean_of(w); });
        }
        Matrix x = eval(*n.args[0]);
        if (fn == "rank") return cross_section(x, [](std::span<const double> row) {
            auto r = stats::average_ranks(row);
            std::size_t count = 0;
            for (double v : r) count += is_missing(v) ? 0 : 1;
            for (double& v : r) {
                if (!is_missing(v)) v /= static_cast<double>(count);
            }
            return r;
        });
        if (fn == "scale") return cross_section(x, [](std::span<const double> row) {
            double s = 0;
            for (double v : row) s += is_missing(v) ? 0.0 : std::fabs(v);
            std::vector<double> out(row.begin(), row.end());
            for (double& v : out) v = s > 0.0 ? v / s : kMissing;
            return out;
        });
        if (fn == "abs") return map(x, [](double v) { return std::fabs(v); });
        if (fn == "log") return map(x, [](double v) { return v > 0.0 ? std::log(v) : kMissing; });
        if (fn == "sign") return map(x, [](double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); });
        if (fn == "signedpower") {
            Matrix e = eval(*n.args[1]);
            return pointwise(x, e, [](double a, double p) {
                double s = a > 0.0 ? 1.0 : (a < 0.0 ? -1.0 : 0.0);
                return s * std::pow(std::fabs(a), p);
            });
        }
        if (fn == "min" || fn == "max") {
            Matrix y = eval(*n.args[1]);
            bool is_min = fn == "min";
            return pointwise(x, y, [is_min](double a, double b) { return is_min ? std::min(a, b) : std::max(a, b); });
        }
        if (fn == "correlation" || fn == "covariance") {
            Matrix y = eval(*n.args[1]);
            bool corr = fn == "correlation";
            return rolling2(x, y, window(), [corr](std::span<const double> a, std::span<const double> b) {
                return corr ? stats::pearson(a, b) : covariance_of(a, b);
            });
        }
        std::size_t d = window();
        if (fn == "delay") return shift(x, d);
        if (fn == "delta") return pointwise(x, shift(x, d), std::minus<>{});
        if (fn == "ts_sum") return rolling(x, d, [](std::span<const double> w) {
            double s = 0;
            for (double v : w) s += v;
            return s;
        });
        if (fn == "ts_mean") return rolling(x, d, [](std::span<const double> w) { return mean_of(w); });
        if (fn == "ts_min") return rolling(x, d, [](std::span<const double> w) {
            return *std::min_element(w.begin(), w.end());
        });
        if (fn == "ts_max") return rolling(x, d, [](std::span<const double> w) {
            return *std::max_element(w.begin(), w.end());
        });
        if (fn == "ts_argmax") return rolling(x, d, [](std::span<const double> w) {
            return static_cast<double>(std::max_element(w.begin(), w.end()) - w.begin() + 1);
        });
        if (fn == "ts_argmin") return rolling(x, d, [](std::span<const double> w) {
            return static_cast<double>(std::min_element(w.begin(), w.end()) - w.begin() + 1);
        });
        if (fn == "ts_rank") return rolling(x, d, [](std::span<const double> w) {
            double last = w.back();
            double below = 0, equal = 0;
            for (double v : w) {
                if (v < last) below += 1;
                else if (v == last) equal += 1;
            }
            return (below + 0.5 * (equal + 1.0)) / static_cast<double>(w.size());
        });
        if (fn == "stddev") return rolling(x, d, [](std::span<const double> w) {
            return stats::stddev(w, true);
        });
        if (fn == "decay_linear") return rolling(x, d, [](std::span<const double> w) {
            double num = 0, den = 0;
            for (std::size_t i = 0; i < w.size(); ++i) {
                double weight = static_cast<double>(i + 1);
                num += weight * w[i];
                den += weight;
            }
            return num / den;
        });
        throw Error("evaluator: unsupported function " + fn);
    }

    static double mean_of(std::span<const double> w) {
        double s = 0;
        for (double v : w) s += v;
        return s / static_cast<double>(w.size());
    }

    static double covariance_of(std::span<const double> a, std::span<const double> b) {
        if (a.size() < 2) return kMissing;
        double ma = mean_of(a), mb = mean_of(b), s = 0;
        for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - ma) * (b[i] - mb);
        return s / static_cast<double>(a.size() - 1);
    }

    template <class Fn>
    Matrix pointwise(const Matrix& a, const Matrix& b, Fn fn) const {
        Matrix out(rows_, cols_);
        for (std::size_t i = 0; i < out.data().size(); ++i) {
            double x = a.data()[i], y = b.data()[i];
            if (is_missing(x) || is_missing(y)) continue;
            out.data()[i] = finite_or_missing(fn(x, y));
        }
        return out;
    }

    template <class Fn>
    Matrix map(Matrix x, Fn fn) const {
        for (double& v : x.data()) {
            if (!is_missing(v)) v = finite_or_missing(fn(v));
        }
        return x;
    }

    Matrix shift(const Matrix& x, std::size_t d) const {
        Matrix out(rows_, cols_);
        for (std::size_t r = d; r < rows_; ++r) {
            for (std::size_t c = 0; c < cols_; ++c) out(r, c) = x(r - d, c);
        }
        return out;
    }

    template <class Fn>
    Matrix rolling(const Matrix& x, std::size_t d, Fn fn) const {
        Matrix out(rows_, cols_);
        std::vector<double> w(d);
        for (std::size_t c = 0; c < cols_; ++c) {
            for (std::size_t r = d - 1; r < rows_; ++r) {
                bool ok = true;
                for (std::size_t k = 0; k < d; ++k) {
                    w[k] = x(r + 1 - d + k, c);
                    if (is_missing(w[k])) {
                        ok = false;
                        break;
                    }
                }
                if (ok) out(r, c) = finite_or_missing(fn(std::span<const double>(w)));
            }
        }
        return out;
    }

    template <class Fn>
    Matrix rolling2(const Matrix& x, const Matrix& y, std::size_t d, Fn fn) const {
        Matrix out(rows_, cols_);
        std::vector<double> wx(d), wy(d);
        for (std::size_t c = 0; c < cols_; ++c) {
            for (std::size_t r = d - 1; r < rows_; ++r) {
                bool ok = true;
                for (std::size_t k = 0; k < d && ok; ++k) {
                    wx[k] = x(r + 1 - d + k, c);
                    wy[k] = y(r + 1 - d + k, c);
                    ok = !is_missing(wx[k]) && !is_missing(wy[k]);
                }
                if (ok) out(r, c) = finite_or_missing(fn(std::span<const double>(wx), std::span<const double>(wy)));
            }
        }
        return out;
    }

    template <class Fn>
    Matrix cross_section(const Matrix& x, Fn fn) const {
        Matrix out(rows_, cols_);
        for (std::size_t r = 0; r < rows_; ++r) {
            auto res = fn(x.row(r));
            for (std::size_t c = 0; c < cols_; ++c) out(r, c) = finite_or_missing(res[c]);
        }
        return out;
    }

    const MarketPanel& panel_;
    std::size_t first_;
    std::size_t rows_;
    std::size_t cols_;
};

}  // namespace

Matrix evaluate_series(const Expr& expr, const MarketPanel& panel) {
    return Evaluator(panel, 0, panel.num_dates()).eval(expr);
}

std::vector<double> evaluate_alpha_at(const Expr& expr, const MarketPanel& panel, std::size_t date_index) {
    if (date_index >= panel.num_dates()) throw DataError("date index out of range");
    std::size_t lookback = max_lookback(expr);
    if (date_index < lookback) {
        throw InsufficientHistory("insufficient history at " + format_date(panel.dates()[date_index]) + ": need " +
                                      std::to_string(lookback) + " prior dates, have " + std::to_string(date_index),
                                  lookback, date_index);
    }
    std::size_t first = date_index - lookback;
    Matrix m = Evaluator(panel, first, lookback + 1).eval(expr);
    auto row = m.row(lookback);
    return {row.begin(), row.end()};
}

std::vector<double> evaluate_alpha(const Expr& expr, const MarketPanel& panel, Date date) {
    return evaluate_alpha_at(expr, panel, panel.date_index(date));
}

}  // namespace factorgate::dsl
