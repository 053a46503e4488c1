#include "factorgate/factor_data.hpp"

#include "factorgate/dsl/evaluator.hpp"
#include "factorgate/errors.hpp"
#include "factorgate/stats.hpp"

#include <atomic>
#include <thread>

namespace factorgate {

std::optional<std::size_t> FactorTensor::index_of(std::string_view id) const {
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (ids[i] == id) return i;
    }
    return std::nullopt;
}

const Matrix& FactorTensor::at(std::string_view id) const {
    auto i = index_of(id);
    if (!i) throw Error("factor '" + std::string(id) + "' not in tensor");
    return values[*i];
}

FactorTensor evaluate_catalog(const dsl::FactorCatalog& catalog, const MarketPanel& panel, unsigned threads) {
    FactorTensor out;
    out.ids = catalog.ids();
    out.values.resize(catalog.size());
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(1, catalog.size())));

    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (std::size_t i = next++; i < catalog.size(); i = next++) {
            out.values[i] = dsl::evaluate_series(*catalog[i].expr, panel);
        }
    };
    if (threads <= 1) {
        work();
    } else {
        std::vector<std::jthread> pool;
        for (unsigned i = 0; i < threads; ++i) pool.emplace_back(work);
    }
    return out;
}

Matrix cross_sectional_zscore(const Matrix& m) {
    Matrix out(m.rows(), m.cols());
    for (std::size_t r = 0; r < m.rows(); ++r) {
        auto z = stats::zscore(m.row(r));
        std::copy(z.begin(), z.end(), out.row(r).begin());
    }
    return out;
}

FactorTensor cross_sectional_zscore(const FactorTensor& t) {
    FactorTensor out;
    out.ids = t.ids;
    for (const auto& m : t.values) out.values.push_back(cross_sectional_zscore(m));
    return out;
}

Matrix forward_returns(const MarketPanel& panel, std::size_t h) {
    const Matrix& close = panel.field(Field::close);
    Matrix out(close.rows(), close.cols());
    for (std::size_t d = 0; d + h < close.rows(); ++d) {
        for (std::size_t i = 0; i < close.cols(); ++i) {
            double a = close(d, i), b = close(d + h, i);
            if (!is_missing(a) && !is_missing(b) && a > 0.0) out(d, i) = b / a - 1.0;
        }
    }
    return out;
}

}  // namespace factorgate
