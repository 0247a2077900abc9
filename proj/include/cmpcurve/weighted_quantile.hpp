#pragma once

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <span>
#include <vector>

#include "cmpcurve/error.hpp"

namespace cmpcurve {

/// Weighted quantiles by inversion of the weighted ECDF: for each v, the
/// smallest value x with (sum of weights of values <= x) / (total) >= v.
/// With unit weights this is the left-continuous empirical quantile.
inline std::vector<double> weighted_quantiles(std::span<const double> values, std::span<const double> weights,
                                              std::span<const double> probs) {
    if (values.empty()) throw Error(ErrorCode::EmptyInput, "weighted quantile of an empty sample");
    if (values.size() != weights.size()) throw Error(ErrorCode::DimensionMismatch, "values and weights differ in length");

    std::vector<std::size_t> order(values.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });

    std::vector<double> cum(order.size());
    double total = 0.0;
    for (std::size_t k = 0; k < order.size(); ++k) {
        if (weights[order[k]] < 0.0) throw Error(ErrorCode::InvalidConfig, "negative weight in quantile");
        total += weights[order[k]];
        cum[k] = total;
    }
    if (!(total > 0.0)) throw Error(ErrorCode::EmptyInput, "weighted quantile with zero total weight");

    std::vector<double> out(probs.size());
    for (std::size_t j = 0; j < probs.size(); ++j) {
        // Relative slack absorbs rounding in the running sum at exact ties.
        const double target = probs[j] * total * (1.0 - 1e-12);
        const auto it = std::lower_bound(cum.begin(), cum.end(), target);
        const auto k = std::min<std::size_t>(static_cast<std::size_t>(it - cum.begin()), cum.size() - 1);
        out[j] = values[order[k]];
    }
    return out;
}

inline double weighted_quantile(std::span<const double> values, std::span<const double> weights, double v) {
    const double p[] = {v};
    return weighted_quantiles(values, weights, p).front();
}

}  // namespace cmpcurve
