#pragma once

// Functions on [0,1] sampled at the p uniform midpoints t_k = (k - 0.5)/p.
// Inner products use the composite midpoint rule with equal weights 1/p, so
// <f, g> is the dot product of the value vectors divided by p.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "fofr/errors.hpp"

namespace fofr {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

class Grid {
public:
    explicit Grid(std::size_t p = 100) : p_(p) {
        if (p == 0) throw PreconditionError("grid size must be positive");
    }

    std::size_t size() const noexcept { return p_; }
    double weight() const noexcept { return 1.0 / static_cast<double>(p_); }

    /// Node k in 0-based indexing, i.e. (k + 0.5) / p.
    double node(std::size_t k) const noexcept {
        return (static_cast<double>(k) + 0.5) / static_cast<double>(p_);
    }

    Vector nodes() const {
        Vector t(static_cast<Eigen::Index>(p_));
        for (std::size_t k = 0; k < p_; ++k) t[static_cast<Eigen::Index>(k)] = node(k);
        return t;
    }

    friend bool operator==(const Grid&, const Grid&) = default;

private:
    std::size_t p_;
};

inline void require_same_grid(const Grid& a, const Grid& b) {
    if (a != b) throw GridMismatch(a.size(), b.size());
}

class GridFunction {
public:
    explicit GridFunction(const Grid& grid) : grid_(grid), values_(Vector::Zero(dim())) {}

    GridFunction(const Grid& grid, Vector values) : grid_(grid), values_(std::move(values)) {
        if (static_cast<std::size_t>(values_.size()) != grid_.size())
            throw GridMismatch(grid_.size(), static_cast<std::size_t>(values_.size()));
        if (!values_.allFinite()) throw PreconditionError("grid function has non-finite values");
    }

    GridFunction(const Grid& grid, std::span<const double> values)
        : GridFunction(grid, Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size()))) {}

    template <class F>
    static GridFunction sample(const Grid& grid, F&& f) {
        Vector v(static_cast<Eigen::Index>(grid.size()));
        for (std::size_t k = 0; k < grid.size(); ++k) v[static_cast<Eigen::Index>(k)] = f(grid.node(k));
        return GridFunction(grid, std::move(v));
    }

    static GridFunction constant(const Grid& grid, double c) {
        return GridFunction(grid, Vector::Constant(static_cast<Eigen::Index>(grid.size()), c));
    }

    const Grid& grid() const noexcept { return grid_; }
    const Vector& values() const noexcept { return values_; }
    std::size_t size() const noexcept { return grid_.size(); }
    double operator[](std::size_t k) const { return values_[static_cast<Eigen::Index>(k)]; }
    double sup_norm() const { return values_.size() ? values_.cwiseAbs().maxCoeff() : 0.0; }

    GridFunction& operator+=(const GridFunction& o) {
        require_same_grid(grid_, o.grid_);
        values_ += o.values_;
        return *this;
    }
    GridFunction& operator-=(const GridFunction& o) {
        require_same_grid(grid_, o.grid_);
        values_ -= o.values_;
        return *this;
    }
    GridFunction& operator*=(double c) {
        values_ *= c;
        return *this;
    }

    friend GridFunction operator+(GridFunction a, const GridFunction& b) { return a += b; }
    friend GridFunction operator-(GridFunction a, const GridFunction& b) { return a -= b; }
    friend GridFunction operator*(double c, GridFunction a) { return a *= c; }
    friend GridFunction operator*(GridFunction a, double c) { return a *= c; }
    friend GridFunction operator-(GridFunction a) { return a *= -1.0; }

private:
    Eigen::Index dim() const { return static_cast<Eigen::Index>(grid_.size()); }

    Grid grid_;
    Vector values_;
};

inline double inner_product(const GridFunction& f, const GridFunction& g) {
    require_same_grid(f.grid(), g.grid());
    return f.values().dot(g.values()) * f.grid().weight();
}

inline double norm(const GridFunction& f) { return std::sqrt(inner_product(f, f)); }

/// n functions on a shared grid, stored as the rows of an n x p matrix.
///
/// `mean()` is always the empirical mean of the raw (uncentered) data. When
/// `centered()` is true the rows have had that mean subtracted.
class FunctionalSample {
public:
    FunctionalSample(const Grid& grid, Matrix rows)
        : grid_(grid), rows_(std::move(rows)), mean_(grid), centered_(false) {
        check_shape();
        if (rows_.rows() > 0) mean_ = GridFunction(grid_, Vector(rows_.colwise().mean().transpose()));
    }

    FunctionalSample(const std::vector<GridFunction>& functions)
        : grid_(functions.empty() ? Grid(1) : functions.front().grid()), mean_(grid_), centered_(false) {
        if (functions.empty()) throw EmptySample();
        rows_.resize(static_cast<Eigen::Index>(functions.size()), static_cast<Eigen::Index>(grid_.size()));
        for (std::size_t i = 0; i < functions.size(); ++i) {
            require_same_grid(grid_, functions[i].grid());
            rows_.row(static_cast<Eigen::Index>(i)) = functions[i].values().transpose();
        }
        mean_ = GridFunction(grid_, Vector(rows_.colwise().mean().transpose()));
    }

    /// Wraps rows that the caller declares centered with respect to `raw_mean`
    /// without checking that their pointwise mean vanishes. Used for subsets
    /// of a globally centered sample.
    static FunctionalSample assume_centered(const Grid& grid, Matrix rows, GridFunction raw_mean) {
        FunctionalSample s(grid, Matrix(0, static_cast<Eigen::Index>(grid.size())));
        s.rows_ = std::move(rows);
        s.check_shape();
        require_same_grid(grid, raw_mean.grid());
        s.mean_ = std::move(raw_mean);
        s.centered_ = true;
        return s;
    }

    const Grid& grid() const noexcept { return grid_; }
    std::size_t size() const noexcept { return static_cast<std::size_t>(rows_.rows()); }
    bool empty() const noexcept { return rows_.rows() == 0; }
    const Matrix& values() const noexcept { return rows_; }
    const GridFunction& mean() const noexcept { return mean_; }
    bool centered() const noexcept { return centered_; }

    GridFunction operator[](std::size_t i) const {
        return GridFunction(grid_, Vector(rows_.row(static_cast<Eigen::Index>(i)).transpose()));
    }

    /// Rows at `indices`, in that order. Centering metadata is carried over
    /// as-is; recentre the result if a fresh mean is wanted.
    FunctionalSample subset(std::span<const std::size_t> indices) const {
        Matrix m(static_cast<Eigen::Index>(indices.size()), rows_.cols());
        for (std::size_t r = 0; r < indices.size(); ++r) {
            if (indices[r] >= size()) throw PreconditionError("subset index out of range");
            m.row(static_cast<Eigen::Index>(r)) = rows_.row(static_cast<Eigen::Index>(indices[r]));
        }
        if (centered_) return assume_centered(grid_, std::move(m), mean_);
        return FunctionalSample(grid_, std::move(m));
    }

    /// Same rows, scaled by c (means scale too).
    FunctionalSample scaled(double c) const {
        FunctionalSample s = *this;
        s.rows_ *= c;
        s.mean_ *= c;
        return s;
    }

    friend FunctionalSample center(const FunctionalSample& sample);

private:
    void check_shape() const {
        if (static_cast<std::size_t>(rows_.cols()) != grid_.size())
            throw GridMismatch(grid_.size(), static_cast<std::size_t>(rows_.cols()));
        if (!rows_.allFinite()) throw PreconditionError("sample has non-finite values");
    }

    Grid grid_;
    Matrix rows_;
    GridFunction mean_;
    bool centered_;
};

/// Subtracts the pointwise mean from every function. Centering an already
/// centered sample removes only its residual mean and keeps the raw mean.
inline FunctionalSample center(const FunctionalSample& sample) {
    if (sample.empty()) throw EmptySample();
    FunctionalSample out = sample;
    const Vector residual_mean = sample.rows_.colwise().mean().transpose();
    out.rows_.rowwise() -= residual_mean.transpose();
    if (sample.centered_) {
        out.mean_ = GridFunction(sample.grid_, sample.mean_.values() + residual_mean);
    } else {
        out.mean_ = GridFunction(sample.grid_, residual_mean);
    }
    out.centered_ = true;
    return out;
}

inline void require_aligned(const FunctionalSample& xs, const FunctionalSample& ys) {
    require_same_grid(xs.grid(), ys.grid());
    if (xs.size() != ys.size())
        throw PreconditionError("samples differ in size: " + std::to_string(xs.size()) + " vs " +
                                std::to_string(ys.size()));
}

} // namespace fofr
