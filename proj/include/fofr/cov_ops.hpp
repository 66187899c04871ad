#pragma once

// Empirical covariance / cross-covariance operators and functional PCA.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>

#include "fofr/errors.hpp"
#include "fofr/grid_fn.hpp"

namespace fofr {

/// Integral operator on a grid: (T f)(t_a) = (1/p) sum_b K(a, b) f(t_b).
class GridOperator {
public:
    explicit GridOperator(const Grid& grid)
        : grid_(grid), kernel_(Matrix::Zero(dim(grid), dim(grid))) {}

    GridOperator(const Grid& grid, Matrix kernel) : grid_(grid), kernel_(std::move(kernel)) {
        if (kernel_.rows() != dim(grid_) || kernel_.cols() != dim(grid_))
            throw GridMismatch(grid_.size(), static_cast<std::size_t>(kernel_.rows()));
        if (!kernel_.allFinite()) throw PreconditionError("operator kernel has non-finite entries");
    }

    /// Discretizes Sf(t) = int_0^1 S(s, t) f(s) ds, so K(a, b) = S(t_b, t_a).
    template <class F>
    static GridOperator from_kernel(const Grid& grid, F&& kernel_st) {
        Matrix k(dim(grid), dim(grid));
        for (Eigen::Index a = 0; a < k.rows(); ++a)
            for (Eigen::Index b = 0; b < k.cols(); ++b)
                k(a, b) = kernel_st(grid.node(static_cast<std::size_t>(b)), grid.node(static_cast<std::size_t>(a)));
        return GridOperator(grid, std::move(k));
    }

    static GridOperator identity(const Grid& grid) {
        return GridOperator(grid, Matrix::Identity(dim(grid), dim(grid)) * static_cast<double>(grid.size()));
    }

    const Grid& grid() const noexcept { return grid_; }
    const Matrix& kernel() const noexcept { return kernel_; }

    GridFunction apply(const GridFunction& f) const {
        require_same_grid(grid_, f.grid());
        return GridFunction(grid_, Vector(kernel_ * f.values() * grid_.weight()));
    }

    /// Applies the operator to every row of an n x p matrix of function values.
    Matrix apply_rows(const Matrix& rows) const { return rows * kernel_.transpose() * grid_.weight(); }

    GridOperator operator-(const GridOperator& o) const {
        require_same_grid(grid_, o.grid_);
        return GridOperator(grid_, kernel_ - o.kernel_);
    }

private:
    static Eigen::Index dim(const Grid& g) { return static_cast<Eigen::Index>(g.size()); }

    Grid grid_;
    Matrix kernel_;
};

/// Gamma_n = (1/n) sum_i X_i (x) X_i. The sample must be centered.
inline GridOperator empirical_covariance(const FunctionalSample& xs) {
    if (xs.empty()) throw EmptySample();
    if (!xs.centered()) throw PreconditionError("empirical_covariance requires a centered sample");
    const auto n = static_cast<double>(xs.size());
    Matrix k = Matrix(xs.values().transpose() * xs.values()) / n;
    return GridOperator(xs.grid(), std::move(k));
}

/// Delta_n = (1/n) sum_i Y_i (x) X_i, i.e. f -> (1/n) sum_i <X_i, f> Y_i.
inline GridOperator empirical_cross_covariance(const FunctionalSample& xs, const FunctionalSample& ys) {
    if (xs.empty()) throw EmptySample();
    require_aligned(xs, ys);
    if (!xs.centered() || !ys.centered())
        throw PreconditionError("empirical_cross_covariance requires centered samples");
    const auto n = static_cast<double>(xs.size());
    Matrix k = Matrix(ys.values().transpose() * xs.values()) / n;
    return GridOperator(xs.grid(), std::move(k));
}

/// Eigen-elements of Gamma_n, eigenvalues non-increasing.
///
/// All p eigenfunctions are kept: the trailing ones (zero eigenvalues) complete
/// the basis of the grid space and are needed when projecting responses.
struct PcaBasis {
    Grid grid;
    Vector eigenvalues;      // length p, clamped at 0
    Matrix eigenfunctions;   // p x p, column j holds phi_j at the nodes
    std::size_t m_max = 0;   // numerical rank
    double rank_threshold = 1e-10;
    std::size_t n = 0;

    std::size_t size() const noexcept { return static_cast<std::size_t>(eigenvalues.size()); }
    double eigenvalue(std::size_t j) const { return eigenvalues[static_cast<Eigen::Index>(j)]; }
    GridFunction eigenfunction(std::size_t j) const {
        return GridFunction(grid, Vector(eigenfunctions.col(static_cast<Eigen::Index>(j))));
    }
};

inline constexpr double kRankThreshold = 1e-10;
inline constexpr double kEigenFloor = 1e-300;

inline PcaBasis pca(const GridOperator& gamma_n, std::size_t n) {
    const Grid& grid = gamma_n.grid();
    const Matrix& k = gamma_n.kernel();
    const double scale = std::max(1.0, k.cwiseAbs().maxCoeff());
    if ((k - k.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale)
        throw PreconditionError("pca: covariance operator is not symmetric");

    // Uniform weights: the weighted eigenproblem is the plain one for K / p.
    const Matrix sym = 0.5 * (k + k.transpose()) * grid.weight();
    Eigen::SelfAdjointEigenSolver<Matrix> solver(sym);
    if (solver.info() != Eigen::Success) throw Error("pca: eigensolver failed");

    const Eigen::Index p = sym.rows();
    PcaBasis basis{grid, Vector(p), Matrix(p, p), 0, kRankThreshold, n};
    const double root_p = std::sqrt(static_cast<double>(p));
    for (Eigen::Index j = 0; j < p; ++j) {
        const Eigen::Index src = p - 1 - j;
        basis.eigenvalues[j] = std::max(0.0, solver.eigenvalues()[src]);
        Vector v = solver.eigenvectors().col(src) * root_p;
        const double vmax = v.cwiseAbs().maxCoeff();
        for (Eigen::Index a = 0; a < p; ++a) {
            if (std::abs(v[a]) > 1e-10 * vmax) {
                if (v[a] < 0) v = -v;
                break;
            }
        }
        basis.eigenfunctions.col(j) = v;
    }

    const double cutoff = kRankThreshold * std::max(basis.eigenvalues[0], kEigenFloor);
    std::size_t rank = 0;
    while (rank < static_cast<std::size_t>(p) && basis.eigenvalues[static_cast<Eigen::Index>(rank)] > cutoff) ++rank;
    basis.m_max = std::min(rank, n);
    return basis;
}

/// PCA of a centered sample.
inline PcaBasis pca(const FunctionalSample& xs) { return pca(empirical_covariance(xs), xs.size()); }

/// <row_i, phi_j> for the first m basis functions: an n x m score matrix.
inline Matrix scores(const Matrix& rows, const PcaBasis& basis, std::size_t m) {
    return rows * basis.eigenfunctions.leftCols(static_cast<Eigen::Index>(m)) * basis.grid.weight();
}

/// Gamma^dagger_{n,m1} f = sum_{j <= min(m1, m_max)} <phi_j, f> / lambda_j phi_j.
inline GridFunction pseudo_inverse_apply(const PcaBasis& basis, std::size_t m1, const GridFunction& f) {
    require_same_grid(basis.grid, f.grid());
    if (m1 == 0) throw PreconditionError("pseudo_inverse_apply: m1 must be at least 1");
    if (basis.m_max == 0) throw DegenerateSample();
    const auto m = static_cast<Eigen::Index>(std::min(m1, basis.m_max));
    const auto phi = basis.eigenfunctions.leftCols(m);
    Vector coords = phi.transpose() * f.values() * basis.grid.weight();
    coords.array() /= basis.eigenvalues.head(m).array();
    return GridFunction(basis.grid, Vector(phi * coords));
}

} // namespace fofr
