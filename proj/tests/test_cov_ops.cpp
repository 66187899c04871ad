#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "fofr/cov_ops.hpp"
#include "fofr/simulate.hpp"
#include "test_support.hpp"

using namespace fofr;

namespace {

void expect_basis_invariants(const FunctionalSample& xc, const PcaBasis& basis) {
    const Grid& g = xc.grid();
    const GridOperator gamma = empirical_covariance(xc);
    const double lambda1 = basis.eigenvalue(0);
    // Quadrature orthonormality.
    const Matrix gram = basis.eigenfunctions.transpose() * basis.eigenfunctions * g.weight();
    EXPECT_LE((gram - Matrix::Identity(gram.rows(), gram.cols())).cwiseAbs().maxCoeff(), 1e-8);
    // Sorted, nonnegative.
    for (std::size_t j = 1; j < basis.size(); ++j) EXPECT_LE(basis.eigenvalue(j), basis.eigenvalue(j - 1));
    EXPECT_GE(basis.eigenvalues.minCoeff(), 0.0);
    // Eigen-equation on the retained part.
    for (std::size_t j = 0; j < basis.m_max; ++j) {
        const GridFunction phi = basis.eigenfunction(j);
        const GridFunction lhs = gamma.apply(phi);
        EXPECT_LE((lhs - basis.eigenvalue(j) * phi).sup_norm(), 1e-8 * lambda1);
    }
    // Trace identity.
    double energy = 0.0;
    for (std::size_t i = 0; i < xc.size(); ++i) energy += std::pow(norm(xc[i]), 2);
    energy /= static_cast<double>(xc.size());
    EXPECT_NEAR(basis.eigenvalues.sum(), energy, 1e-8 * energy);
    EXPECT_LE(basis.m_max, std::min(xc.size(), g.size()));
}

} // namespace

TEST(EmpiricalCovariance, ZeroSample) {
    const Grid g(6);
    const auto xs = center(FunctionalSample({GridFunction(g)}));
    EXPECT_EQ(empirical_covariance(xs).kernel().cwiseAbs().maxCoeff(), 0.0);
}

TEST(EmpiricalCovariance, SymmetricPairOfConstants) {
    const Grid g(6);
    const auto one = GridFunction::constant(g, 1.0);
    const auto xs = center(FunctionalSample({one, -one}));
    const GridOperator gamma = empirical_covariance(xs);
    EXPECT_LE((gamma.kernel().array() - 1.0).abs().maxCoeff(), 1e-15);
    const PcaBasis b = pca(gamma, 2);
    EXPECT_EQ(b.m_max, 1u);
    EXPECT_NEAR(b.eigenvalue(0), 1.0, 1e-14);
    EXPECT_LE((b.eigenfunction(0).values().array() - 1.0).abs().maxCoeff(), 1e-12);
}

TEST(EmpiricalCovariance, MatchesTripleLoop) {
    const auto xs = center(fixtures::random_sample(3, 8, 21));
    const auto ys = center(fixtures::random_sample(3, 8, 22));
    const GridOperator gamma = empirical_covariance(xs);
    const GridOperator delta = empirical_cross_covariance(xs, ys);
    for (int a = 0; a < 8; ++a)
        for (int b = 0; b < 8; ++b) {
            double kg = 0, kd = 0;
            for (int i = 0; i < 3; ++i) {
                kg += xs.values()(i, a) * xs.values()(i, b);
                kd += ys.values()(i, a) * xs.values()(i, b);
            }
            EXPECT_NEAR(gamma.kernel()(a, b), kg / 3, 1e-14);
            EXPECT_NEAR(delta.kernel()(a, b), kd / 3, 1e-14);
        }
}

TEST(EmpiricalCovariance, CrossCovarianceSpecialCases) {
    const auto xs = center(fixtures::random_sample(5, 7, 1));
    const auto zeros = center(FunctionalSample(xs.grid(), Matrix::Zero(5, 7)));
    EXPECT_EQ(empirical_cross_covariance(xs, zeros).kernel().cwiseAbs().maxCoeff(), 0.0);
    EXPECT_EQ((empirical_cross_covariance(xs, xs).kernel() - empirical_covariance(xs).kernel()).cwiseAbs().maxCoeff(), 0.0);
    // (Delta_n f)(t) = (1/n) sum_i <X_i, f> Y_i(t)
    const auto ys = center(fixtures::random_sample(5, 7, 2));
    const auto f = fixtures::random_function(xs.grid(), 3);
    GridFunction direct(xs.grid());
    for (std::size_t i = 0; i < 5; ++i) direct += inner_product(xs[i], f) / 5.0 * ys[i];
    EXPECT_LE((empirical_cross_covariance(xs, ys).apply(f) - direct).sup_norm(), 1e-13);
}

TEST(EmpiricalCovariance, Errors) {
    const auto raw = fixtures::random_sample(4, 5, 9);
    EXPECT_THROW(empirical_covariance(raw), PreconditionError);
    EXPECT_THROW(empirical_cross_covariance(center(raw), center(fixtures::random_sample(3, 5, 1))), PreconditionError);
    EXPECT_THROW(empirical_cross_covariance(center(raw), center(fixtures::random_sample(4, 6, 1))), GridMismatch);
}

TEST(Pca, ZeroOperator) {
    const PcaBasis b = pca(GridOperator(Grid(9)), 4);
    EXPECT_EQ(b.m_max, 0u);
    EXPECT_EQ(b.eigenvalues.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Pca, RankOneFromConstant) {
    const Grid g(12);
    const PcaBasis b = pca(GridOperator(g, Matrix::Ones(12, 12)), 1);
    EXPECT_EQ(b.m_max, 1u);
    EXPECT_NEAR(b.eigenvalue(0), 1.0, 1e-14);
    EXPECT_LE((b.eigenfunction(0).values().array() - 1.0).abs().maxCoeff(), 1e-12);
}

TEST(Pca, AsymmetricThrows) {
    Matrix k = Matrix::Identity(4, 4);
    k(0, 1) = 1e-3;
    EXPECT_THROW(pca(GridOperator(Grid(4), k), 3), PreconditionError);
}

TEST(Pca, SignConvention) {
    const auto xs = center(fixtures::random_sample(10, 12, 5));
    const PcaBasis b = pca(xs);
    for (std::size_t j = 0; j < b.size(); ++j) {
        const Vector v = b.eigenfunctions.col(static_cast<Eigen::Index>(j));
        const double vmax = v.cwiseAbs().maxCoeff();
        for (Eigen::Index a = 0; a < v.size(); ++a)
            if (std::abs(v[a]) > 1e-10 * vmax) {
                EXPECT_GT(v[a], 0.0);
                break;
            }
    }
}

TEST(Pca, ModelOneLeadingEigenvalue) {
    const Grid g(100);
    RngStream rng(2024, 0);
    const auto data = generate(ModelSpec::model_i(), 600, g, rng);
    const PcaBasis b = pca(center(data.xs));
    const double expected = 4.0 / (std::numbers::pi * std::numbers::pi);
    EXPECT_NEAR(b.eigenvalue(0), expected, 0.1 * expected);
    EXPECT_EQ(b.m_max, 8u);
}

TEST(PseudoInverse, EigenvectorAction) {
    const auto xs = center(fixtures::random_sample(20, 16, 7));
    const PcaBasis b = pca(xs);
    const GridFunction phi1 = b.eigenfunction(0);
    EXPECT_LE((pseudo_inverse_apply(b, 3, phi1) - phi1 * (1.0 / b.eigenvalue(0))).sup_norm(), 1e-9 / b.eigenvalue(0));
}

TEST(PseudoInverse, AnnihilatesComplement) {
    const auto xs = center(fixtures::random_sample(20, 16, 8));
    const PcaBasis b = pca(xs);
    // phi_5 is orthogonal to span{phi_1..phi_4}.
    EXPECT_LE(pseudo_inverse_apply(b, 4, b.eigenfunction(4)).sup_norm(), 1e-8);
}

TEST(PseudoInverse, ComposesToProjection) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto xs = center(fixtures::random_sample(6 + seed, 16, 100 + seed));
        const PcaBasis b = pca(xs);
        const GridOperator gamma = empirical_covariance(xs);
        const auto f = fixtures::random_function(xs.grid(), 200 + seed);
        const GridFunction recovered = gamma.apply(pseudo_inverse_apply(b, b.m_max, f));
        // Oracle: project onto the retained eigenvectors directly.
        GridFunction proj(xs.grid());
        for (std::size_t j = 0; j < b.m_max; ++j) proj += inner_product(b.eigenfunction(j), f) * b.eigenfunction(j);
        EXPECT_LE((recovered - proj).sup_norm(), 1e-8 * (1 + f.sup_norm()));
    }
}

TEST(PseudoInverse, ClampsAboveRankAndRejectsDegenerate) {
    const auto xs = center(fixtures::random_sample(4, 10, 3));
    const PcaBasis b = pca(xs);
    ASSERT_EQ(b.m_max, 3u);
    const auto f = fixtures::random_function(xs.grid(), 1);
    EXPECT_EQ((pseudo_inverse_apply(b, 9, f) - pseudo_inverse_apply(b, 3, f)).sup_norm(), 0.0);
    EXPECT_THROW(pseudo_inverse_apply(b, 0, f), PreconditionError);
    EXPECT_THROW(pseudo_inverse_apply(pca(GridOperator(Grid(10)), 1), 1, f), DegenerateSample);
}

TEST(Properties, CovarianceIsPositiveSemidefinite) {
    const auto xs = center(fixtures::random_sample(7, 20, 44));
    const GridOperator gamma = empirical_covariance(xs);
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        const auto f = fixtures::random_function(xs.grid(), seed);
        EXPECT_GE(inner_product(f, gamma.apply(f)), -1e-10 * std::pow(norm(f), 2));
    }
}

TEST(Properties, BasisInvariantsOnRandomSamples) {
    for (std::size_t n : {5u, 50u})
        for (std::size_t p : {16u, 100u})
            for (std::uint64_t seed = 0; seed < 3; ++seed) {
                const auto xc = center(fixtures::random_sample(n, p, 1000 * n + 10 * p + seed));
                expect_basis_invariants(xc, pca(xc));
                const auto smooth = center(fixtures::random_pair(n, p, seed).xs);
                expect_basis_invariants(smooth, pca(smooth));
            }
}

TEST(Properties, ScaleEquivariance) {
    const auto xc = center(fixtures::random_pair(30, 24, 5).xs);
    const PcaBasis b1 = pca(xc);
    for (double c : {-3.0, 0.5, 10.0}) {
        const PcaBasis bc = pca(xc.scaled(c));
        ASSERT_EQ(bc.m_max, b1.m_max);
        for (std::size_t j = 0; j < b1.m_max; ++j) {
            EXPECT_NEAR(bc.eigenvalue(j), c * c * b1.eigenvalue(j), 1e-9 * c * c * b1.eigenvalue(0));
            EXPECT_LE((bc.eigenfunction(j) - b1.eigenfunction(j)).sup_norm(), 1e-6);
        }
    }
}
