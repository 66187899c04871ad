#pragma once

// Real-data pipeline: a univariate time series in a CSV column is cut into
// days, optionally log transformed and outlier filtered, paired into
// (covariate, response) curves and assessed by leave-one-out cross-validation.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <system_error>
#include <utility>
#include <vector>

#include "fofr/errors.hpp"
#include "fofr/estimator.hpp"
#include "fofr/grid_fn.hpp"
#include "fofr/parallel.hpp"
#include "fofr/selection.hpp"
#include "fofr/stats.hpp"

namespace fofr {

struct SeriesTable {
    std::vector<std::string> timestamps;  // empty when no timestamp column was requested
    std::vector<double> values;
    std::size_t points_per_day = 144;
    std::size_t dropped = 0;  // trailing readings of an incomplete day

    std::size_t days() const noexcept { return points_per_day ? values.size() / points_per_day : 0; }
};

struct CsvOptions {
    char delimiter = ',';
    std::optional<std::string> timestamp_column;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r' || s.front() == '"')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r' || s.back() == '"')) s.remove_suffix(1);
    return s;
}

inline std::vector<std::string_view> split_fields(std::string_view line, char delim) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    bool quoted = false;
    for (std::size_t i = 0; i <= line.size(); ++i) {
        if (i < line.size() && line[i] == '"') quoted = !quoted;
        if (i == line.size() || (line[i] == delim && !quoted)) {
            out.push_back(trim(line.substr(start, i - start)));
            start = i + 1;
        }
    }
    return out;
}

inline std::optional<double> parse_double(std::string_view s) {
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || s.empty() || !std::isfinite(v)) return std::nullopt;
    return v;
}

} // namespace detail

/// Reads one numeric column of a CSV file with a header row. Rows in error
/// messages are 1-based data rows (the header is not counted).
inline SeriesTable load_series(const std::string& path, const std::string& column, std::size_t points_per_day,
                               const CsvOptions& options = {}) {
    if (points_per_day == 0) throw PreconditionError("points_per_day must be positive");
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open file: " + path);

    std::string line;
    if (!std::getline(in, line)) throw ParseError(path + ": missing header row");
    if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
    const auto header = detail::split_fields(line, options.delimiter);
    auto find_column = [&](const std::string& name) {
        const auto it = std::find(header.begin(), header.end(), std::string_view(name));
        if (it == header.end()) throw ParseError(path + ": no column named '" + name + "'");
        return static_cast<std::size_t>(it - header.begin());
    };
    const std::size_t col = find_column(column);
    std::optional<std::size_t> ts_col;
    if (options.timestamp_column) ts_col = find_column(*options.timestamp_column);

    SeriesTable table;
    table.points_per_day = points_per_day;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        if (detail::trim(line).empty()) continue;
        ++row;
        const auto fields = detail::split_fields(line, options.delimiter);
        const std::string where = path + ": row " + std::to_string(row);
        if (col >= fields.size() || fields[col].empty())
            throw ParseError(where + ": missing value in column '" + column + "'", row);
        const auto v = detail::parse_double(fields[col]);
        if (!v) throw ParseError(where + ": non-numeric value '" + std::string(fields[col]) + "'", row);
        table.values.push_back(*v);
        if (ts_col) table.timestamps.emplace_back(*ts_col < fields.size() ? fields[*ts_col] : std::string_view());
    }

    const std::size_t full = table.values.size() / points_per_day;
    if (full == 0)
        throw ParseError(path + ": fewer than " + std::to_string(points_per_day) + " readings, no full day");
    table.dropped = table.values.size() - full * points_per_day;
    table.values.resize(full * points_per_day);
    if (!table.timestamps.empty()) table.timestamps.resize(full * points_per_day);
    return table;
}

/// Day d (0-based) holds readings d*q .. d*q + q - 1 on the q-point grid.
inline FunctionalSample split_days(const SeriesTable& series) {
    const std::size_t q = series.points_per_day;
    const std::size_t days = series.days();
    if (days == 0) throw EmptySample();
    Matrix rows(static_cast<Eigen::Index>(days), static_cast<Eigen::Index>(q));
    for (std::size_t d = 0; d < days; ++d)
        for (std::size_t k = 0; k < q; ++k)
            rows(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(k)) = series.values[d * q + k];
    return FunctionalSample(Grid(q), std::move(rows));
}

inline std::vector<double> flatten(const FunctionalSample& sample) {
    std::vector<double> out;
    out.reserve(sample.size() * sample.grid().size());
    for (Eigen::Index i = 0; i < sample.values().rows(); ++i)
        for (Eigen::Index k = 0; k < sample.values().cols(); ++k) out.push_back(sample.values()(i, k));
    return out;
}

/// X_i = day i, Y_i = day i + 1.
inline std::pair<FunctionalSample, FunctionalSample> lag_pairs(const FunctionalSample& days) {
    if (days.size() < 2) throw PreconditionError("lag_pairs requires at least 2 days");
    const auto n = static_cast<Eigen::Index>(days.size());
    return {FunctionalSample(days.grid(), days.values().topRows(n - 1)),
            FunctionalSample(days.grid(), days.values().bottomRows(n - 1))};
}

/// log(x + offset) pointwise; every value must satisfy x + offset > 0.
inline FunctionalSample log_transform(const FunctionalSample& sample, double offset = 0.0) {
    Matrix rows = sample.values();
    for (Eigen::Index i = 0; i < rows.rows(); ++i)
        for (Eigen::Index k = 0; k < rows.cols(); ++k) {
            const double v = rows(i, k) + offset;
            if (!(v > 0.0))
                throw PreconditionError("log transform of a non-positive value at day " + std::to_string(i + 1) +
                                        ", node " + std::to_string(k + 1));
            rows(i, k) = std::log(v);
        }
    return FunctionalSample(sample.grid(), std::move(rows));
}

struct OutlierResult {
    FunctionalSample kept;
    std::vector<std::size_t> removed;  // 0-based indices into the input
    std::vector<std::size_t> kept_indices;
    std::vector<double> maxima;
    double q1 = 0, q3 = 0, fence = 0;
};

/// Removes days whose maximum exceeds Q3 + 1.5 (Q3 - Q1) of the daily maxima.
/// The fence is computed once, from all days.
inline OutlierResult filter_outliers(const FunctionalSample& sample) {
    if (sample.size() < 4) throw PreconditionError("filter_outliers requires at least 4 days");
    std::vector<double> maxima(sample.size());
    for (std::size_t d = 0; d < sample.size(); ++d)
        maxima[d] = sample.values().row(static_cast<Eigen::Index>(d)).maxCoeff();
    const double q1 = quantile(maxima, 0.25);
    const double q3 = quantile(maxima, 0.75);
    const double fence = q3 + 1.5 * (q3 - q1);
    std::vector<std::size_t> kept, removed;
    for (std::size_t d = 0; d < sample.size(); ++d) (maxima[d] > fence ? removed : kept).push_back(d);
    return {sample.subset(kept), std::move(removed), std::move(kept), std::move(maxima), q1, q3, fence};
}

enum class Pairing {
    Lag,     // X = day d - 1, Y = day d of one series
    Paired,  // X and Y are two series observed on the same day
};

struct PreprocessSpec {
    Pairing pairing = Pairing::Lag;
    bool log_response = false;
    double response_offset = 0.0;
    bool log_covariate = false;  // Paired mode only; Lag mode follows the response
    double covariate_offset = 0.0;
    bool outlier_filter = false;  // on the response days' maxima, before any transform
};

struct PreparedData {
    FunctionalSample xs;
    FunctionalSample ys;
    std::vector<std::size_t> response_days;  // 0-based source day of each Y_i
    std::vector<std::size_t> removed_days;
    std::optional<OutlierResult> outliers;
};

/// In Lag mode a pair (d - 1, d) is kept only if both days survive the filter.
inline PreparedData prepare(const SeriesTable& response, const SeriesTable* covariate, const PreprocessSpec& spec) {
    FunctionalSample ydays = split_days(response);
    std::optional<FunctionalSample> xdays;
    if (spec.pairing == Pairing::Paired) {
        if (!covariate) throw PreconditionError("paired mode needs a covariate series");
        xdays = split_days(*covariate);
        require_same_grid(xdays->grid(), ydays.grid());
        if (xdays->size() != ydays.size())
            throw PreconditionError("covariate and response series cover a different number of days");
    }

    std::vector<bool> keep(ydays.size(), true);
    std::optional<OutlierResult> outliers;
    if (spec.outlier_filter) {
        outliers = filter_outliers(ydays);
        for (std::size_t d : outliers->removed) keep[d] = false;
    }

    if (spec.log_response) ydays = log_transform(ydays, spec.response_offset);
    std::vector<std::size_t> x_idx, y_idx;
    if (spec.pairing == Pairing::Lag) {
        for (std::size_t d = 1; d < ydays.size(); ++d)
            if (keep[d - 1] && keep[d]) {
                x_idx.push_back(d - 1);
                y_idx.push_back(d);
            }
        xdays = ydays;
    } else {
        if (spec.log_covariate) xdays = log_transform(*xdays, spec.covariate_offset);
        for (std::size_t d = 0; d < ydays.size(); ++d)
            if (keep[d]) {
                x_idx.push_back(d);
                y_idx.push_back(d);
            }
    }
    if (y_idx.empty()) throw EmptySample();

    PreparedData out{xdays->subset(x_idx), ydays.subset(y_idx), y_idx, {}, std::move(outliers)};
    if (out.outliers) out.removed_days = out.outliers->removed;
    return out;
}

struct CvRow {
    std::size_t index = 0;
    std::size_t m1_hat = 0;
    double l2_error = 0.0;  // ||Y_i - Y_hat_i^{(-i)}||
    bool failed = false;
    std::string failure;
};

struct CvReport {
    std::vector<CvRow> rows;
    Matrix predictions;  // n x p, de-centered Y_hat_i^{(-i)}
    std::map<std::size_t, std::size_t> dimension_histogram;
    Distribution errors;
    std::size_t failures = 0;
    std::size_t best = 0, median = 0, worst = 0;
    bool global_centering = false;
};

struct CvOptions {
    bool global_centering = false;
    std::size_t threads = 1;
};

/// Training sample of fold i: every observation but i, centered with the
/// fold's own mean (or with the full-sample mean under global centering).
inline std::pair<FunctionalSample, FunctionalSample> loo_fold(const FunctionalSample& xs, const FunctionalSample& ys,
                                                              std::size_t i, bool global_centering) {
    std::vector<std::size_t> others;
    others.reserve(xs.size() - 1);
    for (std::size_t j = 0; j < xs.size(); ++j)
        if (j != i) others.push_back(j);
    if (global_centering) {
        const FunctionalSample xc = center(xs), yc = center(ys);
        return {xc.subset(others), yc.subset(others)};
    }
    return {center(xs.subset(others)), center(ys.subset(others))};
}

inline CvReport loo_cv(const FunctionalSample& xs, const FunctionalSample& ys, const SelectionConfig& config,
                       const CvOptions& options = {}) {
    require_aligned(xs, ys);
    if (xs.size() < 3) throw PreconditionError("loo_cv requires at least 3 observations");
    const std::size_t n = xs.size();
    const auto p = static_cast<Eigen::Index>(xs.grid().size());

    // Raw (uncentered) coordinates of the inputs.
    Matrix x_raw = xs.values(), y_raw = ys.values();
    if (xs.centered()) x_raw.rowwise() += xs.mean().values().transpose();
    if (ys.centered()) y_raw.rowwise() += ys.mean().values().transpose();
    const FunctionalSample x_src(xs.grid(), x_raw), y_src(ys.grid(), y_raw);
    std::optional<FunctionalSample> x_glob, y_glob;
    if (options.global_centering) {
        x_glob = center(x_src);
        y_glob = center(y_src);
    }

    CvReport report;
    report.global_centering = options.global_centering;
    report.rows.resize(n);
    report.predictions = Matrix::Zero(static_cast<Eigen::Index>(n), p);
    parallel_for(n, options.threads, [&](std::size_t i) {
        CvRow& row = report.rows[i];
        row.index = i;
        try {
            std::vector<std::size_t> others;
            for (std::size_t j = 0; j < n; ++j)
                if (j != i) others.push_back(j);
            const FunctionalSample fx = x_glob ? x_glob->subset(others) : center(x_src.subset(others));
            const FunctionalSample fy = y_glob ? y_glob->subset(others) : center(y_src.subset(others));
            const Selection sel = select_m1(fx, fy, config);
            const GridFunction y_hat = predict(sel.model, x_src[i], true);
            row.m1_hat = sel.result.m1_hat;
            row.l2_error = norm(y_src[i] - y_hat);
            report.predictions.row(static_cast<Eigen::Index>(i)) = y_hat.values().transpose();
        } catch (const Error& e) {
            row.failed = true;
            row.failure = e.what();
        }
    });

    std::vector<std::pair<double, std::size_t>> ranked;
    std::vector<double> errs;
    for (const auto& row : report.rows) {
        if (row.failed) {
            ++report.failures;
            continue;
        }
        ++report.dimension_histogram[row.m1_hat];
        ranked.emplace_back(row.l2_error, row.index);
        errs.push_back(row.l2_error);
    }
    if (!ranked.empty()) {
        std::sort(ranked.begin(), ranked.end());
        report.best = ranked.front().second;
        report.worst = ranked.back().second;
        report.median = ranked[(ranked.size() - 1) / 2].second;
        report.errors = describe(errs);
    }
    return report;
}

} // namespace fofr
