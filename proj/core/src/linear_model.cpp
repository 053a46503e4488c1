#include "factorgate/linear_model.hpp"

#include "factorgate/csv.hpp"
#include "factorgate/errors.hpp"
#include "factorgate/log.hpp"
#include "factorgate/stats.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

namespace factorgate {

namespace {

constexpr double kConditionLimit = 1e10;
constexpr double kRidgeScale = 1e-6;

std::string g12(double v) {
    if (is_missing(v)) return "nan";
    return csv::format_number(v, 12);
}

double parse_g(const std::string& s) {
    if (s == "nan") return kMissing;
    auto v = csv::parse_number(s);
    if (!v) throw DataError("model file: bad number '" + s + "'");
    return *v;
}

}  // namespace

const Coefficient* LinearModel::find(std::string_view id) const {
    for (const auto& c : coefficients) {
        if (c.id == id) return &c;
    }
    return nullptr;
}

LinearModel fit_ols(const FactorTensor& factors, const Matrix& forward, std::span<const Date> dates,
                    const FitWindow& window) {
    std::vector<std::size_t> rows;
    for (std::size_t d = 0; d < dates.size(); ++d) {
        if (dates[d] >= window.start && dates[d] <= window.end) rows.push_back(d);
    }
    if (rows.empty()) throw DataError("fit_ols: empty fit window");
    const std::size_t n_tickers = forward.cols();

    // Retained factors: present and non-constant in the window.
    std::vector<std::size_t> keep;
    LinearModel model;
    model.window = window;
    for (std::size_t f = 0; f < factors.num_factors(); ++f) {
        std::vector<double> vals;
        for (std::size_t d : rows) {
            for (std::size_t i = 0; i < n_tickers; ++i) {
                double v = factors.values[f](d, i);
                if (!is_missing(v) && !is_missing(forward(d, i))) vals.push_back(v);
            }
        }
        double sd = stats::stddev(vals, false);
        if (vals.empty() || !(sd > 0.0)) {
            log::warn("fit_ols: dropping factor " + factors.ids[f] + (vals.empty() ? " (all missing)" : " (constant)"));
            model.dropped.push_back(factors.ids[f]);
        } else {
            keep.push_back(f);
        }
    }

    // Complete-case pool. Dropping a factor can only enlarge the pool, so
    // iterate until the retained set is stable under pooled std > 0.
    std::vector<std::pair<std::size_t, std::size_t>> pool;
    std::vector<double> means, stds;
    for (;;) {
        pool.clear();
        for (std::size_t d : rows) {
            for (std::size_t i = 0; i < n_tickers; ++i) {
                if (is_missing(forward(d, i))) continue;
                bool ok = true;
                for (std::size_t f : keep) {
                    if (is_missing(factors.values[f](d, i))) {
                        ok = false;
                        break;
                    }
                }
                if (ok) pool.emplace_back(d, i);
            }
        }
        means.assign(keep.size(), 0.0);
        stds.assign(keep.size(), 0.0);
        std::vector<std::size_t> still;
        bool changed = false;
        for (std::size_t j = 0; j < keep.size(); ++j) {
            std::vector<double> col;
            col.reserve(pool.size());
            for (auto [d, i] : pool) col.push_back(factors.values[keep[j]](d, i));
            means[j] = stats::mean(col);
            stds[j] = stats::stddev(col, false);
            if (pool.empty() || !(stds[j] > 0.0)) {
                log::warn("fit_ols: dropping factor " + factors.ids[keep[j]] + " (constant on the pool)");
                model.dropped.push_back(factors.ids[keep[j]]);
                changed = true;
            } else {
                still.push_back(keep[j]);
            }
        }
        if (!changed) break;
        keep = still;
    }

    std::set<std::size_t> pool_dates;
    for (auto [d, i] : pool) pool_dates.insert(d);
    if (pool.empty()) throw DataError("fit_ols: no complete observations in the fit window");
    if (pool_dates.size() < 2) throw DataError("fit_ols: fit window needs at least 2 distinct dates");

    const std::size_t n = pool.size(), k = keep.size();
    Eigen::MatrixXd x(n, k + 1);
    Eigen::VectorXd y(n);
    for (std::size_t r = 0; r < n; ++r) {
        auto [d, i] = pool[r];
        x(r, 0) = 1.0;
        for (std::size_t j = 0; j < k; ++j) x(r, j + 1) = (factors.values[keep[j]](d, i) - means[j]) / stds[j];
        y(r) = forward(d, i);
    }
    Eigen::MatrixXd xtx = x.transpose() * x;
    Eigen::VectorXd xty = x.transpose() * y;

    Eigen::JacobiSVD<Eigen::MatrixXd> svd(xtx);
    const auto& sv = svd.singularValues();
    double cond = sv(sv.size() - 1) > 0.0 ? sv(0) / sv(sv.size() - 1) : std::numeric_limits<double>::infinity();
    if (k > 0 && !(cond <= kConditionLimit)) {
        double trace = xtx.diagonal().tail(k).sum();
        model.ridge = true;
        model.ridge_lambda = kRidgeScale * trace / static_cast<double>(k);
        for (std::size_t j = 1; j <= k; ++j) xtx(j, j) += model.ridge_lambda;
        log::info("fit_ols: ill-conditioned design (cond " + std::to_string(cond) + "), ridge fallback");
    }
    Eigen::VectorXd beta = xtx.ldlt().solve(xty);

    model.beta0 = beta(0);
    model.n_obs = n;
    for (std::size_t j = 0; j < k; ++j) {
        model.coefficients.push_back({factors.ids[keep[j]], beta(j + 1), means[j], stds[j]});
    }
    // Keep dropped ids in tensor order for stable output.
    std::vector<std::string> ordered;
    for (const auto& id : factors.ids) {
        if (std::find(model.dropped.begin(), model.dropped.end(), id) != model.dropped.end()) ordered.push_back(id);
    }
    model.dropped = ordered;
    return model;
}

LinearModel fit_linear_model(const FactorTensor& raw_factors, const MarketPanel& panel, const FitWindow& window,
                             std::size_t horizon) {
    Matrix fwd = forward_returns(panel, horizon);
    // Mask forward returns that would reach past the window end.
    const auto& dates = panel.dates();
    for (std::size_t d = 0; d < dates.size(); ++d) {
        if (d + horizon >= dates.size() || dates[d + horizon] > window.end) {
            for (std::size_t i = 0; i < fwd.cols(); ++i) fwd(d, i) = kMissing;
        }
    }
    return fit_ols(cross_sectional_zscore(raw_factors), fwd, dates, window);
}

std::vector<double> predict_returns(const LinearModel& model, std::span<const std::string> selection,
                                    const std::vector<std::pair<std::string, std::vector<double>>>& values,
                                    std::size_t n_tickers) {
    std::vector<double> score(n_tickers, model.beta0);
    std::set<std::string_view> seen;
    for (const auto& id : selection) {
        if (!seen.insert(id).second) continue;
        const Coefficient* c = model.find(id);
        if (!c) continue;
        const std::vector<double>* v = nullptr;
        for (const auto& [vid, vals] : values) {
            if (vid == id) v = &vals;
        }
        if (!v) {
            std::fill(score.begin(), score.end(), kMissing);
            continue;
        }
        for (std::size_t i = 0; i < n_tickers; ++i) {
            double x = (*v)[i];
            score[i] = is_missing(x) ? kMissing : score[i] + c->beta * ((x - c->mean) / c->std);
        }
    }
    return score;
}

std::vector<double> predict_returns(const LinearModel& model, std::span<const std::string> selection,
                                    const FactorTensor& factors, std::size_t date_index) {
    std::vector<std::pair<std::string, std::vector<double>>> values;
    std::size_t n = 0;
    for (std::size_t f = 0; f < factors.num_factors(); ++f) {
        auto row = factors.values[f].row(date_index);
        n = row.size();
        if (std::find(selection.begin(), selection.end(), factors.ids[f]) == selection.end()) continue;
        values.emplace_back(factors.ids[f], std::vector<double>(row.begin(), row.end()));
    }
    if (factors.num_factors() == 0) return {};
    return predict_returns(model, selection, values, n);
}

void save_model(const LinearModel& model, std::ostream& out) {
    out << "factorgate-linear-model 1\n";
    out << "fit_window " << format_date(model.window.start) << ' ' << format_date(model.window.end) << '\n';
    out << "n_obs " << model.n_obs << '\n';
    out << "ridge " << (model.ridge ? 1 : 0) << ' ' << g12(model.ridge_lambda) << '\n';
    out << "beta0 " << g12(model.beta0) << '\n';
    out << "coefficients " << model.coefficients.size() << '\n';
    for (const auto& c : model.coefficients) {
        out << c.id << ' ' << g12(c.beta) << ' ' << g12(c.mean) << ' ' << g12(c.std) << '\n';
    }
    out << "dropped " << model.dropped.size() << '\n';
    for (const auto& id : model.dropped) out << id << '\n';
}

LinearModel load_model(std::istream& in) {
    LinearModel m;
    std::string tag, a, b;
    auto expect = [&](const char* want) {
        if (!(in >> tag) || tag != want) throw DataError(std::string("model file: expected '") + want + "'");
    };
    expect("factorgate-linear-model");
    in >> a;
    expect("fit_window");
    in >> a >> b;
    m.window = {parse_date(a), parse_date(b)};
    expect("n_obs");
    in >> m.n_obs;
    expect("ridge");
    int ridge = 0;
    in >> ridge >> a;
    m.ridge = ridge != 0;
    m.ridge_lambda = parse_g(a);
    expect("beta0");
    in >> a;
    m.beta0 = parse_g(a);
    expect("coefficients");
    std::size_t count = 0;
    in >> count;
    for (std::size_t i = 0; i < count; ++i) {
        Coefficient c;
        std::string beta, mean, sd;
        if (!(in >> c.id >> beta >> mean >> sd)) throw DataError("model file: truncated coefficients");
        c.beta = parse_g(beta);
        c.mean = parse_g(mean);
        c.std = parse_g(sd);
        m.coefficients.push_back(c);
    }
    expect("dropped");
    in >> count;
    for (std::size_t i = 0; i < count; ++i) {
        if (!(in >> a)) throw DataError("model file: truncated dropped list");
        m.dropped.push_back(a);
    }
    return m;
}

void save_model(const LinearModel& model, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path);
    save_model(model, out);
}

LinearModel load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open model file " + path);
    return load_model(in);
}

double rank_ic(std::span<const double> factor, std::span<const double> forward) {
    return stats::spearman(factor, forward, 3);
}

Matrix ic_history(const FactorTensor& factors, const Matrix& forward) {
    Matrix out(forward.rows(), factors.num_factors());
    for (std::size_t f = 0; f < factors.num_factors(); ++f) {
        for (std::size_t d = 0; d < forward.rows(); ++d) out(d, f) = rank_ic(factors.values[f].row(d), forward.row(d));
    }
    return out;
}

std::vector<FactorPerformance> factor_backtest(const FactorTensor& factors, const MarketPanel& panel,
                                               std::span<const std::size_t> horizons, std::size_t first_date,
                                               std::size_t last_date) {
    if (horizons.empty()) throw Error("factor_backtest: no horizons");
    for (auto h : horizons) {
        if (h == 0) throw Error("factor_backtest: horizons must be positive");
    }
    last_date = std::min(last_date, panel.num_dates() == 0 ? 0 : panel.num_dates() - 1);
    std::vector<Matrix> fwd;
    for (auto h : horizons) fwd.push_back(forward_returns(panel, h));
    Matrix fwd1 = forward_returns(panel, 1);

    std::vector<FactorPerformance> out;
    for (std::size_t f = 0; f < factors.num_factors(); ++f) {
        const Matrix& v = factors.values[f];
        FactorPerformance p;
        p.id = factors.ids[f];
        p.horizons.assign(horizons.begin(), horizons.end());
        if (panel.num_dates() > 0) {
            p.window_start = panel.dates()[std::min(first_date, last_date)];
            p.window_end = panel.dates()[last_date];
        }
        for (std::size_t hi = 0; hi < horizons.size(); ++hi) {
            std::vector<double> ics;
            for (std::size_t d = first_date; d + horizons[hi] <= last_date; ++d) {
                double ic = rank_ic(v.row(d), fwd[hi].row(d));
                if (!is_missing(ic)) ics.push_back(ic);
            }
            p.mean_ic.push_back(stats::mean(ics));
            p.ic_vol.push_back(ics.size() >= 2 ? stats::stddev(ics, true) : kMissing);
            p.ic_count.push_back(ics.size());
        }

        double nav = 1.0;
        for (std::size_t d = first_date; d + 1 <= last_date; ++d) {
            std::vector<std::pair<double, double>> xs;  // (factor, 1-day forward)
            for (std::size_t i = 0; i < v.cols(); ++i) {
                if (!is_missing(v(d, i)) && !is_missing(fwd1(d, i))) xs.emplace_back(v(d, i), fwd1(d, i));
            }
            if (xs.size() < 2) continue;
            std::stable_sort(xs.begin(), xs.end(), [](auto& a, auto& b) { return a.first < b.first; });
            std::size_t q = std::max<std::size_t>(1, xs.size() / 10);
            double top = 0, bottom = 0;
            for (std::size_t j = 0; j < q; ++j) {
                bottom += xs[j].second;
                top += xs[xs.size() - 1 - j].second;
            }
            nav *= 1.0 + (top - bottom) / static_cast<double>(q);
        }
        p.long_short = nav - 1.0;
        p.infeasible = p.ic_count.front() == 0;
        out.push_back(std::move(p));
    }
    return out;
}

std::vector<FactorPerformance> factor_backtest(const dsl::FactorCatalog& catalog, const MarketPanel& panel,
                                               std::span<const std::size_t> horizons) {
    return factor_backtest(evaluate_catalog(catalog, panel), panel, horizons);
}

}  // namespace factorgate
