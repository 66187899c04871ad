#pragma once

// Penalized choice of the input dimension m1:
//   m1_hat = argmin_{m1 in {1..N_n}} gamma_n(S_hat_{m1,FULL}) + kappa * sigma^2 * m1 / n

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <vector>

#include "fofr/errors.hpp"
#include "fofr/estimator.hpp"

namespace fofr {

inline constexpr double kDefaultKappa = 0.6;

struct SigmaMode {
    enum class Kind { Known, Plugin };
    Kind kind = Kind::Plugin;
    double value = 0.0;  // sigma_eps^2 when Known

    static SigmaMode known(double sigma_sq) {
        if (!(sigma_sq >= 0.0)) throw PreconditionError("known noise variance must be >= 0");
        return {Kind::Known, sigma_sq};
    }
    static SigmaMode plugin() { return {Kind::Plugin, 0.0}; }
    bool is_known() const noexcept { return kind == Kind::Known; }
};

struct SelectionConfig {
    double kappa = kDefaultKappa;
    SigmaMode sigma = SigmaMode::plugin();
    std::optional<std::size_t> max_dim_cap;

    void validate() const {
        if (!(kappa >= 0.0) || !std::isfinite(kappa)) throw PreconditionError("kappa must be finite and >= 0");
    }
};

struct SelectionResult {
    std::size_t m1_hat = 0;
    std::vector<std::size_t> candidates;
    std::vector<double> contrasts;
    std::vector<double> penalties;
    std::vector<double> criterion;
    std::vector<double> sigma_used;
};

/// {1, ..., N_n} with N_n = min(floor(n / ln^2 n), m_max, cap), at least 1.
inline std::vector<std::size_t> candidate_set(std::size_t n, std::size_t m_max,
                                              std::optional<std::size_t> cap = std::nullopt) {
    if (n < 2) throw PreconditionError("candidate_set requires n >= 2");
    if (m_max == 0) throw DegenerateSample();
    const double ln = std::log(static_cast<double>(n));
    auto bound = static_cast<std::size_t>(std::floor(static_cast<double>(n) / (ln * ln)));
    bound = std::min(bound, m_max);
    if (cap) bound = std::min(bound, *cap);
    bound = std::max<std::size_t>(bound, 1);
    std::vector<std::size_t> out(bound);
    for (std::size_t m = 0; m < bound; ++m) out[m] = m + 1;
    return out;
}

inline double penalty(std::size_t m1, std::size_t n, double sigma_sq, double kappa) {
    if (m1 == 0) throw PreconditionError("penalty: m1 must be at least 1");
    if (n == 0) throw PreconditionError("penalty: n must be positive");
    return kappa * sigma_sq * static_cast<double>(m1) / static_cast<double>(n);
}

/// Penalized argmin over precomputed contrasts (contrasts[m - 1] for m = 1..N).
/// Ties go to the smallest dimension.
inline SelectionResult select_from_contrasts(const std::vector<double>& contrasts, std::size_t n,
                                             const SelectionConfig& config) {
    config.validate();
    if (contrasts.empty()) throw DegenerateSample();
    SelectionResult r;
    r.contrasts = contrasts;
    const std::size_t count = contrasts.size();
    r.candidates.resize(count);
    r.penalties.resize(count);
    r.criterion.resize(count);
    r.sigma_used.resize(count);
    std::size_t best = 0;
    for (std::size_t i = 0; i < count; ++i) {
        const std::size_t m = i + 1;
        r.candidates[i] = m;
        r.sigma_used[i] = config.sigma.is_known() ? config.sigma.value : contrasts[i];
        r.penalties[i] = penalty(m, n, r.sigma_used[i], config.kappa);
        r.criterion[i] = contrasts[i] + r.penalties[i];
        if (r.criterion[i] < r.criterion[best]) best = i;
    }
    r.m1_hat = r.candidates[best];
    return r;
}

struct Selection {
    SelectionResult result;
    FittedModel model;  // S_hat_{m1_hat, FULL}
};

inline Selection select_m1(const PcaProblem& problem, const SelectionConfig& config) {
    const auto candidates = candidate_set(problem.n(), problem.m_max(), config.max_dim_cap);
    const auto contrasts = problem.full_contrasts(candidates.size());
    SelectionResult result = select_from_contrasts(contrasts, problem.n(), config);
    FittedModel model = problem.fit(result.m1_hat, kFull);
    model.kappa = config.kappa;
    return {std::move(result), std::move(model)};
}

inline Selection select_m1(const FunctionalSample& xs, const FunctionalSample& ys, const SelectionConfig& config) {
    return select_m1(PcaProblem(xs, ys), config);
}

/// Plug-in noise variance: the contrast of S_hat_{m1, FULL}.
inline double estimate_noise_variance(const FunctionalSample& xs, const FunctionalSample& ys, std::size_t m1) {
    return *fit_pca(xs, ys, m1, kFull).sigma_plugin;
}

} // namespace fofr
