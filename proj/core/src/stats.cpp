#include "factorgate/stats.hpp"

#include "factorgate/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace factorgate::stats {

std::vector<double> average_ranks(std::span<const double> values) {
    std::vector<double> ranks(values.size(), kMissing);
    std::vector<std::size_t> order;
    order.reserve(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (!is_missing(values[i])) order.push_back(i);
    }
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
        // positions i..j (0-based) share ranks i+1..j+1
        double avg = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
        i = j + 1;
    }
    return ranks;
}

double pearson(std::span<const double> x, std::span<const double> y) {
    const std::size_t n = std::min(x.size(), y.size());
    double sx = 0, sy = 0;
    std::size_t m = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (is_missing(x[i]) || is_missing(y[i])) continue;
        sx += x[i];
        sy += y[i];
        ++m;
    }
    if (m < 2) return kMissing;
    double mx = sx / static_cast<double>(m), my = sy / static_cast<double>(m);
    double sxx = 0, syy = 0, sxy = 0, qx = 0, qy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (is_missing(x[i]) || is_missing(y[i])) continue;
        double dx = x[i] - mx, dy = y[i] - my;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
        qx += x[i] * x[i];
        qy += y[i] * y[i];
    }
    // Relative threshold so that constant windows (with rounding noise) count as zero variance.
    constexpr double kRel = 1e-14;
    if (sxx <= kRel * qx || syy <= kRel * qy || sxx <= 0.0 || syy <= 0.0) return kMissing;
    double r = sxy / std::sqrt(sxx * syy);
    return std::clamp(r, -1.0, 1.0);
}

double spearman(std::span<const double> x, std::span<const double> y, std::size_t min_count) {
    const std::size_t n = std::min(x.size(), y.size());
    std::vector<double> cx, cy;
    for (std::size_t i = 0; i < n; ++i) {
        if (is_missing(x[i]) || is_missing(y[i])) continue;
        cx.push_back(x[i]);
        cy.push_back(y[i]);
    }
    if (cx.size() < min_count) return kMissing;
    auto rx = average_ranks(cx);
    auto ry = average_ranks(cy);
    return pearson(rx, ry);
}

double mean(std::span<const double> values) {
    double s = 0;
    std::size_t n = 0;
    for (double v : values) {
        if (is_missing(v)) continue;
        s += v;
        ++n;
    }
    return n == 0 ? kMissing : s / static_cast<double>(n);
}

double stddev(std::span<const double> values, bool sample) {
    double m = mean(values);
    if (is_missing(m)) return kMissing;
    double ss = 0;
    std::size_t n = 0;
    for (double v : values) {
        if (is_missing(v)) continue;
        ss += (v - m) * (v - m);
        ++n;
    }
    std::size_t denom = sample ? n - 1 : n;
    if (n == 0 || denom == 0) return kMissing;
    return std::sqrt(ss / static_cast<double>(denom));
}

std::vector<double> zscore(std::span<const double> values) {
    std::vector<double> out(values.size(), kMissing);
    std::size_t n = 0;
    for (double v : values) n += is_missing(v) ? 0 : 1;
    if (n < 2) return out;
    double m = mean(values);
    double s = stddev(values, false);
    if (!(s > 0.0)) return out;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (!is_missing(values[i])) out[i] = (values[i] - m) / s;
    }
    return out;
}

}  // namespace factorgate::stats
