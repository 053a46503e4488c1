#pragma once

#include <span>
#include <vector>

namespace factorgate::stats {

// 1-based average-tie ranks of the non-missing entries; missing stays missing.
std::vector<double> average_ranks(std::span<const double> values);

// Pearson correlation over pairs where both sides are present.
// Missing if fewer than 2 pairs or either side has zero variance.
double pearson(std::span<const double> x, std::span<const double> y);

// Spearman rho (Pearson on average-tie ranks of the common support).
// Missing when fewer than `min_count` common pairs.
double spearman(std::span<const double> x, std::span<const double> y, std::size_t min_count = 3);

double mean(std::span<const double> values);  // skips missing; missing if none

// Population (divide by n) or sample (n - 1) standard deviation, skipping missing.
double stddev(std::span<const double> values, bool sample);

// Cross-sectional z-score with population std; missing if std == 0 or < 2 values.
std::vector<double> zscore(std::span<const double> values);

}  // namespace factorgate::stats
