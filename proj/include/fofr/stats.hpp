#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <vector>

#include "fofr/errors.hpp"

namespace fofr {

/// Quantile by linear interpolation of order statistics: h = (n - 1) * prob + 1
/// (1-based), interpolating between the floor(h)-th and next order statistic.
inline double quantile(std::span<const double> values, double prob) {
    if (values.empty()) throw PreconditionError("quantile of an empty set");
    std::vector<double> v(values.begin(), values.end());
    std::sort(v.begin(), v.end());
    const double h = static_cast<double>(v.size() - 1) * prob;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

inline double mean(std::span<const double> values) {
    if (values.empty()) return 0.0;
    return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

/// Five-number summary plus mean and Tukey fence outlier counts.
struct Distribution {
    std::size_t count = 0;
    double mean = 0, min = 0, q1 = 0, median = 0, q3 = 0, max = 0;
    std::size_t outliers_low = 0;
    std::size_t outliers_high = 0;

    double iqr() const noexcept { return q3 - q1; }
};

inline Distribution describe(std::span<const double> values) {
    Distribution d;
    d.count = values.size();
    if (values.empty()) return d;
    d.mean = fofr::mean(values);
    d.min = *std::min_element(values.begin(), values.end());
    d.max = *std::max_element(values.begin(), values.end());
    d.q1 = quantile(values, 0.25);
    d.median = quantile(values, 0.5);
    d.q3 = quantile(values, 0.75);
    const double lo = d.q1 - 1.5 * d.iqr();
    const double hi = d.q3 + 1.5 * d.iqr();
    for (double v : values) {
        if (v < lo) ++d.outliers_low;
        if (v > hi) ++d.outliers_high;
    }
    return d;
}

} // namespace fofr
