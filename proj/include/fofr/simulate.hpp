#pragma once

// Synthetic functional linear models, Monte Carlo prediction-error estimates
// and the calibration studies built on them.
//
// Replicate k of any study draws from RngStream(base_seed, k) in a fixed
// order: for each training observation its covariate scores then its noise,
// then the scores of the fresh covariate X_{n+1}.

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "fofr/cov_ops.hpp"
#include "fofr/errors.hpp"
#include "fofr/estimator.hpp"
#include "fofr/grid_fn.hpp"
#include "fofr/parallel.hpp"
#include "fofr/selection.hpp"
#include "fofr/stats.hpp"

namespace fofr {

/// Reproducible random stream keyed by (base_seed, stream_id).
class RngStream {
public:
    RngStream(std::uint64_t base_seed, std::uint64_t stream_id) : base_seed_(base_seed), stream_id_(stream_id) {
        std::seed_seq seq{static_cast<std::uint32_t>(base_seed), static_cast<std::uint32_t>(base_seed >> 32),
                          static_cast<std::uint32_t>(stream_id), static_cast<std::uint32_t>(stream_id >> 32),
                          0x9e3779b9u};
        engine_.seed(seq);
    }

    std::uint64_t base_seed() const noexcept { return base_seed_; }
    std::uint64_t stream_id() const noexcept { return stream_id_; }

    double normal() { return normal_(engine_); }
    double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(engine_); }

private:
    std::uint64_t base_seed_;
    std::uint64_t stream_id_;
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_;
};

enum class ModelId { I, II, III, Custom };

enum class BasisFamily {
    ShiftedSine,  // sqrt(2) sin((j - 0.5) pi t)
    Cosine,       // sqrt(2) cos(j pi t)
};

inline double basis_function(BasisFamily family, std::size_t j, double t) {
    const double jj = static_cast<double>(j);
    switch (family) {
        case BasisFamily::ShiftedSine: return std::numbers::sqrt2 * std::sin((jj - 0.5) * std::numbers::pi * t);
        case BasisFamily::Cosine: return std::numbers::sqrt2 * std::cos(jj * std::numbers::pi * t);
    }
    return 0.0;
}

/// p x count matrix of the first `count` basis functions (j = 1..count).
inline Matrix basis_matrix(BasisFamily family, std::size_t count, const Grid& grid) {
    Matrix m(static_cast<Eigen::Index>(grid.size()), static_cast<Eigen::Index>(count));
    for (std::size_t k = 0; k < grid.size(); ++k)
        for (std::size_t j = 0; j < count; ++j)
            m(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j)) = basis_function(family, j + 1, grid.node(k));
    return m;
}

enum class ScoreLaw {
    Gaussian,
    Uniform,  // U[-sqrt 3, sqrt 3], unit variance
};

struct NoiseSpec {
    enum class Kind { None, Brownian, KarhunenLoeve };
    Kind kind = Kind::None;
    double brownian_divisor = 1.0;       // eps = B / divisor
    std::vector<double> kl_variances;    // eps = sum_j sqrt(v_j) xi_j phi_j on the model basis
};

struct ModelSpec {
    ModelId id = ModelId::Custom;
    std::string name = "custom";
    BasisFamily basis = BasisFamily::ShiftedSine;
    std::vector<double> eigenvalues;  // lambda_j of X, truncation = size
    ScoreLaw scores = ScoreLaw::Gaussian;
    std::function<double(double, double)> kernel;  // S(s, t)
    NoiseSpec noise;

    std::size_t truncation() const noexcept { return eigenvalues.size(); }

    /// S_1(s,t) = s^2 + t^2, X with k0 = 8 shifted-sine KL terms,
    /// lambda_j = 1 / (pi^2 (j - 0.5)^2), Gaussian scores, eps = B / 20.
    static ModelSpec model_i() {
        ModelSpec m;
        m.id = ModelId::I;
        m.name = "i";
        m.basis = BasisFamily::ShiftedSine;
        for (int j = 1; j <= 8; ++j) {
            const double h = (j - 0.5) * std::numbers::pi;
            m.eigenvalues.push_back(1.0 / (h * h));
        }
        m.scores = ScoreLaw::Gaussian;
        m.kernel = [](double s, double t) { return s * s + t * t; };
        m.noise.kind = NoiseSpec::Kind::Brownian;
        m.noise.brownian_divisor = 20.0;
        return m;
    }

    /// Model (i) with eps = B / 2.
    static ModelSpec model_ii() {
        ModelSpec m = model_i();
        m.id = ModelId::II;
        m.name = "ii";
        m.noise.brownian_divisor = 2.0;
        return m;
    }

    /// Cosine basis with k1 = 50 terms: X = sum j^{-alpha/2} U_j phi_j (alpha = 1.2),
    /// S_3(s,t) = sum_{j,l} 4 (-1)^{j+l} j^{-gamma} l^{-beta} phi_l(s) phi_j(t)
    /// (beta = 3, gamma = 2.5), eps = sum j^{-delta/2} xi_j phi_j (delta = 1.1).
    static ModelSpec model_iii() {
        constexpr int k1 = 50;
        constexpr double alpha = 1.2, beta = 3.0, gamma = 2.5, delta = 1.1;
        ModelSpec m;
        m.id = ModelId::III;
        m.name = "iii";
        m.basis = BasisFamily::Cosine;
        for (int j = 1; j <= k1; ++j) {
            m.eigenvalues.push_back(std::pow(j, -alpha));
            m.noise.kl_variances.push_back(std::pow(j, -delta));
        }
        m.scores = ScoreLaw::Uniform;
        // b_{j,l} factorizes, so the kernel is 4 u(s) v(t).
        m.kernel = [](double s, double t) {
            double u = 0.0, v = 0.0;
            for (int j = 1; j <= k1; ++j) {
                const double sign = (j % 2 == 0) ? 1.0 : -1.0;
                u += sign * std::pow(j, -beta) * basis_function(BasisFamily::Cosine, static_cast<std::size_t>(j), s);
                v += sign * std::pow(j, -gamma) * basis_function(BasisFamily::Cosine, static_cast<std::size_t>(j), t);
            }
            return 4.0 * u * v;
        };
        m.noise.kind = NoiseSpec::Kind::KarhunenLoeve;
        return m;
    }

    static ModelSpec preset(ModelId id) {
        switch (id) {
            case ModelId::I: return model_i();
            case ModelId::II: return model_ii();
            case ModelId::III: return model_iii();
            case ModelId::Custom: break;
        }
        throw PreconditionError("no preset for a custom model");
    }
};

/// E ||eps||^2 under the grid quadrature.
inline double known_noise_variance(const ModelSpec& spec, const Grid& grid) {
    switch (spec.noise.kind) {
        case NoiseSpec::Kind::None: return 0.0;
        case NoiseSpec::Kind::Brownian: {
            // E B(t_k)^2 = t_k and the midpoint nodes average to 1/2.
            const double d = spec.noise.brownian_divisor;
            double s = 0.0;
            for (std::size_t k = 0; k < grid.size(); ++k) s += grid.node(k);
            return s * grid.weight() / (d * d);
        }
        case NoiseSpec::Kind::KarhunenLoeve: {
            double s = 0.0;
            for (double v : spec.noise.kl_variances) s += v;
            return s;
        }
    }
    return 0.0;
}

/// Brownian path at the midpoint nodes divided by `scale`: the first
/// increment has variance t_1 = 1/(2p), the others 1/p.
inline GridFunction brownian(const Grid& grid, double scale, RngStream& rng) {
    if (!(scale > 0.0)) throw PreconditionError("brownian: scale must be positive");
    Vector b(static_cast<Eigen::Index>(grid.size()));
    double level = 0.0;
    for (std::size_t k = 0; k < grid.size(); ++k) {
        const double var = (k == 0) ? grid.node(0) : grid.weight();
        level += std::sqrt(var) * rng.normal();
        b[static_cast<Eigen::Index>(k)] = level / scale;
    }
    return GridFunction(grid, std::move(b));
}

inline GridOperator true_operator(const ModelSpec& spec, const Grid& grid) {
    if (!spec.kernel) throw PreconditionError("model spec has no kernel");
    return GridOperator::from_kernel(grid, spec.kernel);
}

/// S x by quadrature of the true kernel.
inline GridFunction true_apply(const GridOperator& kernel, const GridFunction& x) { return kernel.apply(x); }

struct SimulatedData {
    FunctionalSample xs;
    FunctionalSample ys;
    FunctionalSample noise;
    Matrix scores;  // n x truncation standardized KL scores of X
};

/// Precomputed per-grid quantities of a spec, reused across replicates.
class ModelSampler {
public:
    ModelSampler(ModelSpec spec, const Grid& grid)
        : spec_(std::move(spec)),
          grid_(grid),
          true_kernel_(true_operator(spec_, grid)),
          x_loadings_(basis_matrix(spec_.basis, spec_.truncation(), grid)) {
        for (Eigen::Index j = 0; j < x_loadings_.cols(); ++j)
            x_loadings_.col(j) *= std::sqrt(spec_.eigenvalues[static_cast<std::size_t>(j)]);
        if (spec_.noise.kind == NoiseSpec::Kind::KarhunenLoeve) {
            noise_loadings_ = basis_matrix(spec_.basis, spec_.noise.kl_variances.size(), grid);
            for (Eigen::Index j = 0; j < noise_loadings_.cols(); ++j)
                noise_loadings_.col(j) *= std::sqrt(spec_.noise.kl_variances[static_cast<std::size_t>(j)]);
        }
    }

    const ModelSpec& spec() const noexcept { return spec_; }
    const Grid& grid() const noexcept { return grid_; }
    const GridOperator& true_kernel() const noexcept { return true_kernel_; }

    /// Columns sqrt(lambda_j) phi_j: X = loadings * scores.
    const Matrix& x_loadings() const noexcept { return x_loadings_; }

    Vector draw_scores(RngStream& rng) const {
        Vector z(static_cast<Eigen::Index>(spec_.truncation()));
        for (Eigen::Index j = 0; j < z.size(); ++j) {
            z[j] = spec_.scores == ScoreLaw::Gaussian ? rng.normal()
                                                      : rng.uniform(-std::numbers::sqrt3, std::numbers::sqrt3);
        }
        return z;
    }

    Vector draw_covariate(RngStream& rng) const { return x_loadings_ * draw_scores(rng); }

    Vector draw_noise(RngStream& rng) const {
        switch (spec_.noise.kind) {
            case NoiseSpec::Kind::None: return Vector::Zero(static_cast<Eigen::Index>(grid_.size()));
            case NoiseSpec::Kind::Brownian: return brownian(grid_, spec_.noise.brownian_divisor, rng).values();
            case NoiseSpec::Kind::KarhunenLoeve: {
                Vector xi(noise_loadings_.cols());
                for (Eigen::Index j = 0; j < xi.size(); ++j) xi[j] = rng.normal();
                return noise_loadings_ * xi;
            }
        }
        return {};
    }

    SimulatedData generate(std::size_t n, RngStream& rng) const {
        if (n == 0) throw PreconditionError("generate: n must be positive");
        const auto en = static_cast<Eigen::Index>(n);
        const auto p = static_cast<Eigen::Index>(grid_.size());
        Matrix scores(en, static_cast<Eigen::Index>(spec_.truncation()));
        Matrix noise(en, p);
        for (Eigen::Index i = 0; i < en; ++i) {
            scores.row(i) = draw_scores(rng).transpose();
            noise.row(i) = draw_noise(rng).transpose();
        }
        Matrix x = scores * x_loadings_.transpose();
        Matrix y = true_kernel_.apply_rows(x) + noise;
        return {FunctionalSample(grid_, std::move(x)), FunctionalSample(grid_, std::move(y)),
                FunctionalSample(grid_, std::move(noise)), std::move(scores)};
    }

private:
    ModelSpec spec_;
    Grid grid_;
    GridOperator true_kernel_;
    Matrix x_loadings_;
    Matrix noise_loadings_;
};

inline SimulatedData generate(const ModelSpec& spec, std::size_t n, const Grid& grid, RngStream& rng) {
    return ModelSampler(spec, grid).generate(n, rng);
}

struct ReplicateResult {
    std::size_t index = 0;
    std::size_t m1_hat = 0;
    double error = 0.0;  // ||S_hat X_{n+1} - S X_{n+1}||^2
    bool failed = false;
    std::string failure;
};

struct EmspeReport {
    double kappa = 0.0;
    double mean_emspe = 0.0;
    double mean_selected_dim = 0.0;
    std::vector<ReplicateResult> per_replicate;
    std::size_t failures = 0;
    std::size_t n = 0;
    std::size_t replicates = 0;
    std::size_t p = 0;

    std::vector<double> errors() const {
        std::vector<double> e;
        for (const auto& r : per_replicate)
            if (!r.failed) e.push_back(r.error);
        return e;
    }
};

struct StudyOptions {
    std::uint64_t base_seed = 1;
    std::size_t threads = 1;
};

namespace detail {

inline void summarize(EmspeReport& report) {
    double err = 0.0, dim = 0.0;
    std::size_t ok = 0;
    report.failures = 0;
    for (const auto& r : report.per_replicate) {
        if (r.failed) {
            ++report.failures;
            continue;
        }
        err += r.error;
        dim += static_cast<double>(r.m1_hat);
        ++ok;
    }
    report.mean_emspe = ok ? err / static_cast<double>(ok) : std::nan("");
    report.mean_selected_dim = ok ? dim / static_cast<double>(ok) : std::nan("");
}

inline double squared_norm(const Vector& v, const Grid& grid) { return v.squaredNorm() * grid.weight(); }

} // namespace detail

/// One EMSPE report per kappa. Every kappa sees the same replicates (common
/// random numbers); the fits of a replicate are shared across kappa values.
inline std::vector<EmspeReport> kappa_sweep(const ModelSpec& spec, std::size_t n, std::size_t replicates,
                                            const std::vector<double>& kappas, const SelectionConfig& base,
                                            const Grid& grid, const StudyOptions& options) {
    if (replicates == 0) throw PreconditionError("at least one replicate is required");
    if (kappas.empty()) throw PreconditionError("kappa grid is empty");
    for (double k : kappas)
        if (!(k >= 0.0)) throw PreconditionError("kappa values must be >= 0");

    const ModelSampler sampler(spec, grid);
    std::vector<std::vector<ReplicateResult>> rows(replicates, std::vector<ReplicateResult>(kappas.size()));

    parallel_for(replicates, options.threads, [&](std::size_t k) {
        RngStream rng(options.base_seed, k);
        auto& out = rows[k];
        for (std::size_t c = 0; c < kappas.size(); ++c) out[c].index = k;
        try {
            const SimulatedData data = sampler.generate(n, rng);
            const Vector x_new = sampler.draw_covariate(rng);
            const Vector truth = sampler.true_kernel().apply(GridFunction(grid, x_new)).values();

            const PcaProblem problem(data.xs, data.ys);
            const auto candidates = candidate_set(problem.n(), problem.m_max(), base.max_dim_cap);
            const auto contrasts = problem.full_contrasts(candidates.size());
            const Matrix directions = problem.full_directions(candidates.size());
            const Vector s_new = scores(x_new.transpose(), problem.basis(), candidates.size()).transpose();

            std::map<std::size_t, double> error_at;
            for (std::size_t c = 0; c < kappas.size(); ++c) {
                SelectionConfig config = base;
                config.kappa = kappas[c];
                const auto sel = select_from_contrasts(contrasts, problem.n(), config);
                auto it = error_at.find(sel.m1_hat);
                if (it == error_at.end()) {
                    const auto m = static_cast<Eigen::Index>(sel.m1_hat);
                    const Vector pred = directions.leftCols(m) * s_new.head(m);
                    it = error_at.emplace(sel.m1_hat, detail::squared_norm(pred - truth, grid)).first;
                }
                out[c].m1_hat = sel.m1_hat;
                out[c].error = it->second;
            }
        } catch (const Error& e) {
            for (auto& r : out) {
                r.failed = true;
                r.failure = e.what();
            }
        }
    });

    std::vector<EmspeReport> reports(kappas.size());
    for (std::size_t c = 0; c < kappas.size(); ++c) {
        auto& rep = reports[c];
        rep.kappa = kappas[c];
        rep.n = n;
        rep.replicates = replicates;
        rep.p = grid.size();
        rep.per_replicate.reserve(replicates);
        for (std::size_t k = 0; k < replicates; ++k) rep.per_replicate.push_back(rows[k][c]);
        detail::summarize(rep);
    }
    return reports;
}

/// Monte Carlo estimate of the prediction error of the selected estimator.
inline EmspeReport emspe(const ModelSpec& spec, std::size_t n, std::size_t replicates,
                         const SelectionConfig& config, const Grid& grid, const StudyOptions& options) {
    return kappa_sweep(spec, n, replicates, {config.kappa}, config, grid, options).front();
}

/// The default calibration grid 0.2, 0.4, ..., 2.0. Values are rounded to 12
/// decimals so that 0.2 + 2 * 0.2 is stored as 0.6.
inline std::vector<double> kappa_grid(double lo = 0.2, double hi = 2.0, double step = 0.2) {
    if (!(lo > 0.0) || !(hi >= lo)) throw PreconditionError("kappa range must satisfy 0 < min <= max");
    if (!(step > 0.0)) throw PreconditionError("kappa step must be positive");
    std::vector<double> out;
    const auto count = static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9)) + 1;
    for (std::size_t i = 0; i < count; ++i)
        out.push_back(std::round((lo + static_cast<double>(i) * step) * 1e12) / 1e12);
    return out;
}

struct SizeSummary {
    std::size_t n = 0;
    Distribution errors;
    double mean_selected_dim = 0.0;
    std::size_t failures = 0;
    EmspeReport report;
};

inline std::vector<SizeSummary> sample_size_study(const ModelSpec& spec, const std::vector<std::size_t>& sizes,
                                                  std::size_t replicates, const SelectionConfig& config,
                                                  const Grid& grid, const StudyOptions& options) {
    std::vector<SizeSummary> out;
    for (std::size_t n : sizes) {
        if (n < 2) throw PreconditionError("sample sizes must be >= 2");
        SizeSummary s;
        s.n = n;
        s.report = emspe(spec, n, replicates, config, grid, options);
        const auto errs = s.report.errors();
        s.errors = describe(errs);
        s.mean_selected_dim = s.report.mean_selected_dim;
        s.failures = s.report.failures;
        out.push_back(std::move(s));
    }
    return out;
}

/// Conditional MSPE E_X ||(S_hat - S) X||^2 of each candidate S_hat_{m, FULL}
/// under the population covariance of the model, and the best candidate
/// ("oracle" dimension, not available to a data-driven rule).
struct OracleReplicate {
    std::size_t oracle_m1 = 0;
    double oracle_mspe = 0.0;
    std::vector<double> mspe;  // per candidate
    bool failed = false;
};

struct OracleReport {
    std::size_t n = 0;
    double mean_oracle_mspe = 0.0;
    double mean_oracle_dim = 0.0;
    std::size_t failures = 0;
    std::vector<OracleReplicate> per_replicate;
};

inline OracleReport oracle_study(const ModelSpec& spec, std::size_t n, std::size_t replicates, const Grid& grid,
                                 const StudyOptions& options) {
    const ModelSampler sampler(spec, grid);
    const Matrix& loadings = sampler.x_loadings();
    const Matrix true_image = sampler.true_kernel().apply_rows(loadings.transpose()).transpose();
    OracleReport report;
    report.n = n;
    report.per_replicate.resize(replicates);
    parallel_for(replicates, options.threads, [&](std::size_t k) {
        RngStream rng(options.base_seed, k);
        auto& out = report.per_replicate[k];
        try {
            const SimulatedData data = sampler.generate(n, rng);
            const PcaProblem problem(data.xs, data.ys);
            const auto candidates = candidate_set(problem.n(), problem.m_max());
            const Matrix directions = problem.full_directions(candidates.size());
            const Matrix s = scores(loadings.transpose(), problem.basis(), candidates.size());
            Matrix pred = Matrix::Zero(loadings.rows(), loadings.cols());
            for (std::size_t m = 0; m < candidates.size(); ++m) {
                const auto em = static_cast<Eigen::Index>(m);
                pred.noalias() += directions.col(em) * s.col(em).transpose();
                out.mspe.push_back((pred - true_image).squaredNorm() * grid.weight());
                if (m == 0 || out.mspe.back() < out.oracle_mspe) {
                    out.oracle_mspe = out.mspe.back();
                    out.oracle_m1 = m + 1;
                }
            }
        } catch (const Error&) {
            out.failed = true;
        }
    });
    std::size_t ok = 0;
    for (const auto& r : report.per_replicate) {
        if (r.failed) {
            ++report.failures;
            continue;
        }
        report.mean_oracle_mspe += r.oracle_mspe;
        report.mean_oracle_dim += static_cast<double>(r.oracle_m1);
        ++ok;
    }
    if (ok) {
        report.mean_oracle_mspe /= static_cast<double>(ok);
        report.mean_oracle_dim /= static_cast<double>(ok);
    }
    return report;
}

} // namespace fofr
