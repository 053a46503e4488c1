#pragma once

// Independent reference implementations used as test oracles.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace factorgate::testing {

// Gaussian elimination with partial pivoting.
inline std::vector<double> solve_dense(std::vector<std::vector<double>> a, std::vector<double> b) {
    const std::size_t n = b.size();
    for (std::size_t c = 0; c < n; ++c) {
        std::size_t piv = c;
        for (std::size_t r = c + 1; r < n; ++r) {
            if (std::fabs(a[r][c]) > std::fabs(a[piv][c])) piv = r;
        }
        if (a[piv][c] == 0.0) throw std::runtime_error("singular");
        std::swap(a[c], a[piv]);
        std::swap(b[c], b[piv]);
        for (std::size_t r = c + 1; r < n; ++r) {
            double f = a[r][c] / a[c][c];
            for (std::size_t k = c; k < n; ++k) a[r][k] -= f * a[c][k];
            b[r] -= f * b[c];
        }
    }
    std::vector<double> x(n);
    for (std::size_t i = n; i-- > 0;) {
        double s = b[i];
        for (std::size_t k = i + 1; k < n; ++k) s -= a[i][k] * x[k];
        x[i] = s / a[i][i];
    }
    return x;
}

// Rank by counting: rank = #less + (#equal + 1) / 2.
inline std::vector<double> brute_ranks(const std::vector<double>& x) {
    std::vector<double> r(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        double less = 0, equal = 0;
        for (double y : x) {
            less += y < x[i];
            equal += y == x[i];
        }
        r[i] = less + (equal + 1.0) / 2.0;
    }
    return r;
}

inline double brute_pearson(const std::vector<double>& x, const std::vector<double>& y) {
    double n = static_cast<double>(x.size()), mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i] / n;
        my += y[i] / n;
    }
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    return sxy / std::sqrt(sxx * syy);
}

inline double brute_spearman(const std::vector<double>& x, const std::vector<double>& y) {
    return brute_pearson(brute_ranks(x), brute_ranks(y));
}

// Maximum drawdown over all (peak, trough) pairs with peak before trough.
inline double brute_mdd(const std::vector<double>& nav) {
    double best = 0;
    for (std::size_t i = 0; i < nav.size(); ++i) {
        for (std::size_t j = i; j < nav.size(); ++j) best = std::max(best, (nav[i] - nav[j]) / nav[i]);
    }
    return best;
}

}  // namespace factorgate::testing
