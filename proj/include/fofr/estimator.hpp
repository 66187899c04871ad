#pragma once

// Least-squares projection estimators of the slope operator S in Y = S X + eps.
//
// A fitted model is   S_hat = sum_{j <= m1} sum_{k <= m2} b_{j,k} phi_k (x) phi_j,
// i.e. S_hat x = sum_k ( sum_j b_{j,k} <phi_j, x> ) phi_k.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "fofr/cov_ops.hpp"
#include "fofr/errors.hpp"
#include "fofr/grid_fn.hpp"

namespace fofr {

/// Output dimension meaning "no truncation": the whole grid space.
inline constexpr std::size_t kFull = std::numeric_limits<std::size_t>::max();

inline constexpr double kMaxCondition = 1e12;

struct FittedModel {
    Grid grid;
    std::size_t m1 = 0;
    std::size_t m2 = 0;
    Matrix coeffs;       // m1 x m2
    Matrix basis;        // p x max(m1, m2), column j is phi_j
    Vector eigenvalues;  // lambda_j of the basis columns (PCA fits only)
    GridFunction x_mean;
    GridFunction y_mean;
    std::optional<double> sigma_plugin;
    std::optional<double> kappa;
    std::string created_from;
    std::vector<std::string> warnings;

    auto input_basis() const { return basis.leftCols(static_cast<Eigen::Index>(m1)); }
    auto output_basis() const { return basis.leftCols(static_cast<Eigen::Index>(m2)); }

    /// S_hat applied to each row of an n x p matrix of centered covariates.
    Matrix apply_rows(const Matrix& rows) const {
        const Matrix s = rows * input_basis() * grid.weight();
        return s * coeffs * output_basis().transpose();
    }
};

inline Matrix apply_rows(const FittedModel& model, const Matrix& rows) { return model.apply_rows(rows); }
inline Matrix apply_rows(const GridOperator& op, const Matrix& rows) { return op.apply_rows(rows); }

template <class T>
concept RowPredictor = requires(const T& t, const Matrix& m) {
    { apply_rows(t, m) } -> std::convertible_to<Matrix>;
};

/// gamma_n(T) = (1/n) sum_i ||Y_i - T X_i||^2, evaluated on the rows as given.
template <RowPredictor P>
double contrast(const P& predictor, const FunctionalSample& xs, const FunctionalSample& ys) {
    require_aligned(xs, ys);
    if (xs.empty()) throw EmptySample();
    const Matrix residual = ys.values() - apply_rows(predictor, xs.values());
    return residual.squaredNorm() * xs.grid().weight() / static_cast<double>(xs.size());
}

/// ||T||_n^2 = (1/n) sum_i ||T X_i||^2.
template <RowPredictor P>
double empirical_norm_sq(const P& predictor, const FunctionalSample& xs) {
    if (xs.empty()) throw EmptySample();
    return apply_rows(predictor, xs.values()).squaredNorm() * xs.grid().weight() / static_cast<double>(xs.size());
}

/// Difference of two models as a predictor, for ||S_1 - S_2||_n.
struct ModelDifference {
    const FittedModel& lhs;
    const FittedModel& rhs;
};
inline Matrix apply_rows(const ModelDifference& d, const Matrix& rows) {
    return d.lhs.apply_rows(rows) - d.rhs.apply_rows(rows);
}

/// Centered pair of samples plus its PCA, shared by every (m1, m2) fit.
///
/// Cross-covariance terms are formed from score products,
/// <Delta_n phi_j, phi_k> = (1/n) sum_i <X_i, phi_j> <Y_i, phi_k>.
class PcaProblem {
public:
    PcaProblem(const FunctionalSample& xs, const FunctionalSample& ys)
        : xs_(xs.centered() ? xs : center(xs)), ys_(ys.centered() ? ys : center(ys)) {
        require_aligned(xs_, ys_);
        basis_ = pca(xs_);
        if (basis_.m_max == 0) throw DegenerateSample();
        x_scores_ = scores(xs_.values(), basis_, basis_.m_max);
    }

    const FunctionalSample& xs() const noexcept { return xs_; }
    const FunctionalSample& ys() const noexcept { return ys_; }
    const PcaBasis& basis() const noexcept { return basis_; }
    std::size_t n() const noexcept { return xs_.size(); }
    std::size_t p() const noexcept { return xs_.grid().size(); }
    std::size_t m_max() const noexcept { return basis_.m_max; }
    const Matrix& x_scores() const noexcept { return x_scores_; }

    FittedModel fit(std::size_t m1, std::size_t m2) const {
        if (m1 == 0) throw PreconditionError("fit_pca: m1 must be at least 1");
        if (m2 == 0) throw PreconditionError("fit_pca: m2 must be at least 1");
        std::vector<std::string> warnings;
        if (m1 > m_max()) {
            warnings.push_back("m1 = " + std::to_string(m1) + " exceeds m_max = " + std::to_string(m_max()) +
                               "; clamped");
            m1 = m_max();
        }
        if (m2 == kFull || m2 > p()) m2 = p();

        const auto em1 = static_cast<Eigen::Index>(m1);
        const auto em2 = static_cast<Eigen::Index>(m2);
        const Matrix y_scores = scores(ys_.values(), basis_, m2);
        Matrix b = x_scores_.leftCols(em1).transpose() * y_scores / static_cast<double>(n());
        for (Eigen::Index j = 0; j < em1; ++j) b.row(j) /= basis_.eigenvalues[j];

        const std::size_t width = std::max(m1, m2);
        FittedModel model{xs_.grid(),
                          m1,
                          m2,
                          std::move(b),
                          basis_.eigenfunctions.leftCols(static_cast<Eigen::Index>(width)),
                          basis_.eigenvalues.head(static_cast<Eigen::Index>(width)),
                          xs_.mean(),
                          ys_.mean(),
                          std::nullopt,
                          std::nullopt,
                          "pca",
                          std::move(warnings)};
        model.sigma_plugin = fofr::contrast(model, xs_, ys_);
        return model;
    }

    /// p x count matrix whose column j is (Delta_n phi_j) / lambda_j, so that
    /// S_hat_{m1, FULL} x = sum_{j <= m1} <phi_j, x> column_j.
    Matrix full_directions(std::size_t count) const {
        count = std::min(count, m_max());
        const auto c = static_cast<Eigen::Index>(count);
        Matrix d = ys_.values().transpose() * x_scores_.leftCols(c) / static_cast<double>(n());
        for (Eigen::Index j = 0; j < c; ++j) d.col(j) /= basis_.eigenvalues[j];
        return d;
    }

    /// gamma_n(S_hat_{m1, FULL}) for m1 = 1..count, computed by peeling one
    /// rank-one term off the residual per dimension.
    std::vector<double> full_contrasts(std::size_t count) const {
        count = std::min(count, m_max());
        std::vector<double> out;
        out.reserve(count);
        Matrix residual = ys_.values();
        const double nn = static_cast<double>(n());
        const double w = xs_.grid().weight();
        for (std::size_t j = 0; j < count; ++j) {
            const auto ej = static_cast<Eigen::Index>(j);
            const auto s = x_scores_.col(ej);
            // (Delta_n phi_j) / lambda_j evaluated at the nodes.
            const Vector direction = ys_.values().transpose() * s / (nn * basis_.eigenvalues[ej]);
            residual.noalias() -= s * direction.transpose();
            out.push_back(residual.squaredNorm() * w / nn);
        }
        return out;
    }

private:
    FunctionalSample xs_;
    FunctionalSample ys_;
    PcaBasis basis_;
    Matrix x_scores_;  // n x m_max
};

/// Double-truncation estimator on the empirical PCA basis. m2 = kFull keeps
/// the whole grid space. m1 above the numerical rank is clamped (recorded in
/// `warnings`).
inline FittedModel fit_pca(const FunctionalSample& xs, const FunctionalSample& ys, std::size_t m1,
                           std::size_t m2 = kFull) {
    return PcaProblem(xs, ys).fit(m1, m2);
}

/// A user supplied orthonormal system phi_1, phi_2, ... on one grid.
class BasisSpec {
public:
    BasisSpec(const Grid& grid, Matrix columns) : grid_(grid), columns_(std::move(columns)) {
        if (static_cast<std::size_t>(columns_.rows()) != grid_.size())
            throw GridMismatch(grid_.size(), static_cast<std::size_t>(columns_.rows()));
        const Matrix gram = columns_.transpose() * columns_ * grid_.weight();
        const Matrix eye = Matrix::Identity(gram.rows(), gram.cols());
        if (gram.size() > 0 && (gram - eye).cwiseAbs().maxCoeff() > 1e-8)
            throw PreconditionError("basis functions are not orthonormal within 1e-8");
    }

    explicit BasisSpec(const std::vector<GridFunction>& functions)
        : BasisSpec(functions.empty() ? Grid(1) : functions.front().grid(), stack(functions)) {}

    const Grid& grid() const noexcept { return grid_; }
    std::size_t size() const noexcept { return static_cast<std::size_t>(columns_.cols()); }
    const Matrix& columns() const noexcept { return columns_; }

private:
    static Matrix stack(const std::vector<GridFunction>& fs) {
        if (fs.empty()) throw PreconditionError("basis must contain at least one function");
        Matrix m(static_cast<Eigen::Index>(fs.front().size()), static_cast<Eigen::Index>(fs.size()));
        for (std::size_t j = 0; j < fs.size(); ++j) {
            require_same_grid(fs.front().grid(), fs[j].grid());
            m.col(static_cast<Eigen::Index>(j)) = fs[j].values();
        }
        return m;
    }

    Grid grid_;
    Matrix columns_;
};

/// Generic-basis least squares: solves A b = Y_phi with
/// A = (<Gamma_n phi_j, phi_k>) and Y_phi = (<Delta_n phi_j, phi_k>), both
/// formed from the p x p operator kernels.
inline FittedModel fit_basis(const FunctionalSample& xs, const FunctionalSample& ys, const BasisSpec& basis,
                             std::size_t m1, std::size_t m2 = kFull) {
    require_aligned(xs, ys);
    require_same_grid(xs.grid(), basis.grid());
    if (m2 == kFull) m2 = basis.size();
    if (m1 == 0 || m2 == 0) throw PreconditionError("fit_basis: dimensions must be at least 1");
    if (m1 > basis.size() || m2 > basis.size())
        throw PreconditionError("fit_basis: basis has only " + std::to_string(basis.size()) + " functions");

    const FunctionalSample xc = xs.centered() ? xs : center(xs);
    const FunctionalSample yc = ys.centered() ? ys : center(ys);
    const GridOperator gamma = empirical_covariance(xc);
    const GridOperator delta = empirical_cross_covariance(xc, yc);

    const auto em1 = static_cast<Eigen::Index>(m1);
    const auto em2 = static_cast<Eigen::Index>(m2);
    const double w = xs.grid().weight();
    const auto phi_in = basis.columns().leftCols(em1);
    const auto phi_out = basis.columns().leftCols(em2);

    // <T phi_j, phi_k> = phi_k' (K / p) phi_j / p
    const Matrix a = phi_in.transpose() * gamma.kernel() * phi_in * (w * w);
    const Matrix y_phi = (phi_out.transpose() * delta.kernel() * phi_in * (w * w)).transpose();

    Eigen::JacobiSVD<Matrix> svd(a);
    const auto& sv = svd.singularValues();
    const double smin = sv[sv.size() - 1];
    const double cond = smin > 0 ? sv[0] / smin : std::numeric_limits<double>::infinity();
    if (!(cond <= kMaxCondition)) throw SingularDesign(cond);

    Matrix b = a.ldlt().solve(y_phi);
    const std::size_t width = std::max(m1, m2);
    FittedModel model{xs.grid(),
                      m1,
                      m2,
                      std::move(b),
                      basis.columns().leftCols(static_cast<Eigen::Index>(width)),
                      Vector(),
                      xc.mean(),
                      yc.mean(),
                      std::nullopt,
                      std::nullopt,
                      "basis",
                      {}};
    model.sigma_plugin = contrast(model, xc, yc);
    return model;
}

/// Y_hat = S_hat x. With `raw_input` the covariate is centered with the stored
/// mean first and the response mean is added back.
inline GridFunction predict(const FittedModel& model, const GridFunction& x_new, bool raw_input = true) {
    require_same_grid(model.grid, x_new.grid());
    Vector x = x_new.values();
    if (raw_input) x -= model.x_mean.values();
    const Vector s = model.input_basis().transpose() * x * model.grid.weight();
    Vector y = model.output_basis() * (model.coeffs.transpose() * s);
    if (raw_input) y += model.y_mean.values();
    return GridFunction(model.grid, std::move(y));
}

/// Predictions for each row of a sample.
inline FunctionalSample predict(const FittedModel& model, const FunctionalSample& xs, bool raw_input = true) {
    require_same_grid(model.grid, xs.grid());
    Matrix rows = xs.values();
    if (raw_input) rows.rowwise() -= model.x_mean.values().transpose();
    Matrix out = model.apply_rows(rows);
    if (raw_input) out.rowwise() += model.y_mean.values().transpose();
    return FunctionalSample(model.grid, std::move(out));
}

/// The estimated kernel S_hat(s, t) on the grid, as an operator.
inline GridOperator kernel_matrix(const FittedModel& model) {
    Matrix k = model.output_basis() * model.coeffs.transpose() * model.input_basis().transpose();
    return GridOperator(model.grid, std::move(k));
}

} // namespace fofr
