#pragma once

#include "factorgate/dsl/catalog.hpp"
#include "factorgate/market.hpp"

#include <optional>
#include <string>
#include <vector>

namespace factorgate {

// Per-factor date x ticker values aligned with a panel's axes.
struct FactorTensor {
    std::vector<std::string> ids;
    std::vector<Matrix> values;

    std::size_t num_factors() const { return ids.size(); }
    std::optional<std::size_t> index_of(std::string_view id) const;
    const Matrix& at(std::string_view id) const;  // throws Error when absent
};

// Evaluates every catalog factor over the whole panel. `threads` = 0 uses
// the hardware concurrency.
FactorTensor evaluate_catalog(const dsl::FactorCatalog& catalog, const MarketPanel& panel, unsigned threads = 1);

// Row-wise cross-sectional z-score (population std).
Matrix cross_sectional_zscore(const Matrix& m);
FactorTensor cross_sectional_zscore(const FactorTensor& t);

// fwd(d, i) = close(d + h, i) / close(d, i) - 1; missing for the last h rows.
Matrix forward_returns(const MarketPanel& panel, std::size_t h);

}  // namespace factorgate
