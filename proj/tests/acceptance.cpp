// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <numbers>
#include <numeric>
#include <sstream>

#include "fofr/fofr.hpp"
#include "test_support.hpp"

using namespace fofr;
namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kSeed = 1;

struct Outcome {
    bool ok = true;
    std::ostringstream detail;

    void require(bool cond, const std::string& what) {
        if (!cond) {
            ok = false;
            detail << " [violated: " << what << "]";
        }
    }
};

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

int failures = 0;

void criterion(int id, const std::string& title, double budget_seconds, const std::function<void(Outcome&)>& body) {
    Outcome out;
    const auto start = std::chrono::steady_clock::now();
    try {
        body(out);
    } catch (const std::exception& e) {
        out.ok = false;
        out.detail << " [exception: " << e.what() << "]";
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (budget_seconds > 0) out.require(secs < budget_seconds, "runtime " + fmt(secs) + " s >= " + fmt(budget_seconds) + " s");
    if (!out.ok) ++failures;
    std::cout << (out.ok ? "PASS" : "FAIL") << "  criterion " << id << ": " << title << " |" << out.detail.str()
              << " (" << fmt(secs) << " s)" << std::endl;
}

SelectionConfig known_config(const ModelSpec& spec, const Grid& g, double kappa) {
    return {kappa, SigmaMode::known(known_noise_variance(spec, g)), std::nullopt};
}

std::size_t argmin(const std::vector<EmspeReport>& sweep) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < sweep.size(); ++c)
        if (sweep[c].mean_emspe < sweep[best].mean_emspe) best = c;
    return best;
}

double pca_invariant_error(const FunctionalSample& xc) {
    const Grid& g = xc.grid();
    const PcaBasis b = pca(xc);
    const GridOperator gamma = empirical_covariance(xc);
    const double lambda1 = b.eigenvalue(0);
    double worst = 0;
    const Matrix gram = b.eigenfunctions.transpose() * b.eigenfunctions * g.weight();
    worst = std::max(worst, (gram - Matrix::Identity(gram.rows(), gram.cols())).cwiseAbs().maxCoeff() / 1e-8);
    for (std::size_t j = 0; j < b.m_max; ++j) {
        const GridFunction phi = b.eigenfunction(j);
        worst = std::max(worst, (gamma.apply(phi) - b.eigenvalue(j) * phi).sup_norm() / (1e-8 * lambda1));
    }
    const double energy = xc.values().squaredNorm() * g.weight() / static_cast<double>(xc.size());
    worst = std::max(worst, std::abs(b.eigenvalues.sum() - energy) / (1e-8 * energy));
    return worst;  // <= 1 when every check holds
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(FOFR_CLI_PATH) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

bool same_tree(const fs::path& a, const fs::path& b) {
    std::size_t files = 0;
    for (const auto& entry : fs::directory_iterator(a)) {
        const fs::path other = b / entry.path().filename();
        if (!fs::exists(other) || io::read_file(entry.path().string()) != io::read_file(other.string())) return false;
        ++files;
    }
    return files > 0;
}

} // namespace

int main() {
    std::cout << "acceptance suite, base seed " << kSeed << std::endl;
    const Grid g100(100);
    const StudyOptions opts{kSeed, 1};

    criterion(1, "fit_pca and fit_basis with the PCA basis agree within 1e-8", 5.0, [](Outcome& out) {
        std::mt19937_64 gen(kSeed);
        double worst = 0;
        std::size_t compared = 0;
        for (int d = 0; d < 20; ++d) {
            const std::size_t n = std::uniform_int_distribution<std::size_t>(20, 50)(gen);
            const std::size_t p = std::uniform_int_distribution<std::size_t>(16, 32)(gen);
            const auto [xs, ys] = fixtures::random_pair(n, p, 5000 + static_cast<std::uint64_t>(d), 0.2);
            const PcaBasis basis = pca(center(xs));
            const BasisSpec spec(xs.grid(), basis.eigenfunctions);
            const std::size_t m1 = std::uniform_int_distribution<std::size_t>(1, std::min<std::size_t>(8, basis.m_max))(gen);
            for (std::size_t m2 : {std::size_t{3}, kFull}) {
                const FittedModel a = fit_pca(xs, ys, m1, m2);
                const FittedModel b = fit_basis(xs, ys, spec, m1, m2);
                out.require(a.coeffs.rows() == b.coeffs.rows() && a.coeffs.cols() == b.coeffs.cols(), "shape");
                worst = std::max(worst, (a.coeffs - b.coeffs).cwiseAbs().maxCoeff());
                ++compared;
            }
        }
        out.detail << " " << compared << " fits, max |coef diff| = " << fmt(worst);
        out.require(worst <= 1e-8, "max diff <= 1e-8");
    });

    criterion(2, "PCA invariants and model (i) eigenvalue recovery", 10.0, [&](Outcome& out) {
        double worst = 0;
        for (std::size_t n : {5u, 20u, 50u})
            for (std::size_t p : {16u, 64u, 100u})
                for (std::uint64_t s = 0; s < 2; ++s) {
                    worst = std::max(worst, pca_invariant_error(center(fixtures::random_sample(n, p, 100 * n + p + s))));
                    worst = std::max(worst, pca_invariant_error(center(fixtures::random_pair(n, p, s).xs)));
                }
        RngStream rng(kSeed, 0);
        const auto data = generate(ModelSpec::model_i(), 600, g100, rng);
        const PcaBasis b = pca(center(data.xs));
        worst = std::max(worst, pca_invariant_error(center(data.xs)));
        out.detail << " invariant error / tolerance = " << fmt(worst) << "; relative eigenvalue errors";
        for (int j = 1; j <= 4; ++j) {
            const double truth = 1.0 / (std::numbers::pi * std::numbers::pi * (j - 0.5) * (j - 0.5));
            const double rel = std::abs(b.eigenvalue(static_cast<std::size_t>(j - 1)) - truth) / truth;
            out.detail << " " << fmt(rel);
            out.require(rel <= 0.10, "lambda_" + std::to_string(j) + " within 10%");
        }
        out.require(worst <= 1.0, "invariants within tolerance");
    });

    criterion(3, "plug-in noise variance at m1 = 8 within 25% (models i, ii)", 30.0, [&](Outcome& out) {
        for (auto [spec, truth] : {std::pair{ModelSpec::model_i(), 1.0 / 800}, std::pair{ModelSpec::model_ii(), 1.0 / 8}}) {
            const ModelSampler sampler(spec, g100);
            double total = 0;
            for (std::uint64_t k = 0; k < 20; ++k) {
                RngStream rng(kSeed, k);
                const auto data = sampler.generate(600, rng);
                total += estimate_noise_variance(data.xs, data.ys, 8);
            }
            const double mean = total / 20;
            out.detail << " model " << spec.name << ": " << fmt(mean) << " vs " << fmt(truth) << ";";
            out.require(std::abs(mean - truth) <= 0.25 * truth, "model " + spec.name + " within 25%");
        }
    });

    const auto kappas = kappa_grid();
    std::vector<EmspeReport> sweep_i, sweep_ii, sweep_iii;
    criterion(4, "kappa sweep: endpoints above grid minimum (i, iii), argmin for model (i) in {0.4, 0.6, 0.8}", 600.0,
              [&](Outcome& out) {
                  const auto mi = ModelSpec::model_i(), miii = ModelSpec::model_iii();
                  sweep_i = kappa_sweep(mi, 600, 100, kappas, known_config(mi, g100, 0.6), g100, opts);
                  sweep_iii = kappa_sweep(miii, 600, 100, kappas, known_config(miii, g100, 0.6), g100, opts);
                  for (const auto* sweep : {&sweep_i, &sweep_iii}) {
                      const std::string name = sweep == &sweep_i ? "i" : "iii";
                      const std::size_t best = argmin(*sweep);
                      const double min = (*sweep)[best].mean_emspe;
                      out.detail << " model " << name << ": EMSPE(0.2) = " << fmt(sweep->front().mean_emspe)
                                 << ", EMSPE(2.0) = " << fmt(sweep->back().mean_emspe) << ", min " << fmt(min)
                                 << " at kappa " << fmt((*sweep)[best].kappa) << ";";
                      out.require(sweep->front().mean_emspe > min, "model " + name + " EMSPE(0.2) > min");
                      out.require(sweep->back().mean_emspe > min, "model " + name + " EMSPE(2.0) > min");
                  }
                  const double best_i = sweep_i[argmin(sweep_i)].kappa;
                  out.require(std::abs(best_i - 0.4) < 1e-9 || std::abs(best_i - 0.6) < 1e-9 || std::abs(best_i - 0.8) < 1e-9,
                              "model i argmin in {0.4, 0.6, 0.8}");
              });

    criterion(5, "mean selected dimension at kappa 0.6 (i in [5.5, 9.5], ii in [1.5, 4.5]); monotone along grid", 600.0,
              [&](Outcome& out) {
                  const auto mi = ModelSpec::model_i(), mii = ModelSpec::model_ii(), miii = ModelSpec::model_iii();
                  if (sweep_i.empty()) sweep_i = kappa_sweep(mi, 600, 100, kappas, known_config(mi, g100, 0.6), g100, opts);
                  if (sweep_iii.empty())
                      sweep_iii = kappa_sweep(miii, 600, 100, kappas, known_config(miii, g100, 0.6), g100, opts);
                  sweep_ii = kappa_sweep(mii, 600, 100, kappas, known_config(mii, g100, 0.6), g100, opts);
                  const std::size_t at06 = 2;
                  const double dim_i = sweep_i[at06].mean_selected_dim, dim_ii = sweep_ii[at06].mean_selected_dim;
                  out.detail << " model i: " << fmt(dim_i) << ", model ii: " << fmt(dim_ii)
                             << ", model iii: " << fmt(sweep_iii[at06].mean_selected_dim) << ";";
                  out.require(dim_i >= 5.5 && dim_i <= 9.5, "model i in [5.5, 9.5]");
                  out.require(dim_ii >= 1.5 && dim_ii <= 4.5, "model ii in [1.5, 4.5]");
                  std::size_t pairs = 0, monotone = 0;
                  for (const auto* sweep : {&sweep_i, &sweep_ii, &sweep_iii})
                      for (std::size_t c = 1; c < sweep->size(); ++c) {
                          ++pairs;
                          if ((*sweep)[c].mean_selected_dim <= (*sweep)[c - 1].mean_selected_dim) ++monotone;
                      }
                  out.detail << " non-increasing pairs " << monotone << "/" << pairs;
                  out.require(static_cast<double>(monotone) >= 0.95 * static_cast<double>(pairs), ">= 95% non-increasing");
              });

    criterion(6, "model (i) EMSPE decreases over n = 200, 400, 600 and the IQR shrinks", 600.0, [&](Outcome& out) {
        const auto mi = ModelSpec::model_i();
        const auto rows = sample_size_study(mi, {200, 400, 600}, 100, known_config(mi, g100, 0.6), g100, opts);
        for (const auto& r : rows) out.detail << " n=" << r.n << ": mean " << fmt(r.errors.mean) << ", IQR " << fmt(r.errors.iqr()) << ";";
        out.require(rows[2].errors.mean < rows[1].errors.mean && rows[1].errors.mean < rows[0].errors.mean,
                    "mean EMSPE strictly decreasing");
        out.require(rows[2].errors.iqr() < rows[0].errors.iqr(), "IQR(600) < IQR(200)");
    });

    criterion(7, "noiseless consistency: EMSPE <= 1e-4 and LOO-CV errors <= 1e-6 relative", 60.0, [&](Outcome& out) {
        // Rank-3 kernel built from the covariate eigenfunctions.
        ModelSpec spec = ModelSpec::model_i();
        spec.noise = NoiseSpec{};
        spec.name = "i-noiseless";
        spec.kernel = [](double s, double t) {
            double k = 0;
            for (std::size_t j = 1; j <= 3; ++j)
                k += (1.0 + static_cast<double>(j)) * basis_function(BasisFamily::ShiftedSine, j, s) *
                     basis_function(BasisFamily::ShiftedSine, 4 - j, t);
            return k;
        };
        const auto report = emspe(spec, 600, 100, {0.6, SigmaMode::known(0.0), std::nullopt}, g100, opts);
        out.detail << " mean EMSPE " << fmt(report.mean_emspe) << ";";
        out.require(report.failures == 0 && report.mean_emspe <= 1e-4, "EMSPE <= 1e-4");

        const Grid g(40);
        const Matrix phi = basis_matrix(BasisFamily::Cosine, 2, g);
        const Matrix x = fixtures::random_rows(60, 2, kSeed) * phi.transpose();
        const GridOperator s = GridOperator::from_kernel(g, [](double a, double b) { return a + b * b; });
        const FunctionalSample xs(g, x), ys(g, s.apply_rows(x));
        const CvReport cv = loo_cv(xs, ys, {0.6, SigmaMode::known(0.0), std::nullopt});
        double worst = 0;
        for (const auto& row : cv.rows) worst = std::max(worst, row.l2_error / norm(ys[row.index]));
        out.detail << " max relative LOO error " << fmt(worst);
        out.require(cv.failures == 0 && worst <= 1e-6, "LOO errors <= 1e-6 relative");
    });

    criterion(8, "every CLI command is byte-identical across reruns and thread counts", 0.0, [&](Outcome& out) {
        const fs::path root = fs::temp_directory_path() / "fofr_acceptance_cli";
        fs::remove_all(root);
        fs::create_directories(root);
        const auto [xs, ys] = fixtures::random_pair(40, 24, kSeed, 0.2);
        io::write_file((root / "x.csv").string(), io::curves_to_csv(xs.values()));
        io::write_file((root / "y.csv").string(), io::curves_to_csv(ys.values()));
        std::string series = "load\n";
        for (int i = 0; i < 24 * 30; ++i)
            series += io::format_double(20 + 5 * std::sin(2 * std::numbers::pi * (i % 24) / 24.0) + 0.01 * (i % 7)) + "\n";
        io::write_file((root / "series.csv").string(), series);
        const std::string data = " --x " + (root / "x.csv").string() + " --y " + (root / "y.csv").string();
        const std::vector<std::pair<std::string, std::string>> commands = {
            {"simulate", "simulate --model ii --n 200 --reps 10 --seed 3"},
            {"calibrate", "calibrate --model iii --n 200 --reps 6 --seed 3"},
            {"study", "study --model i --n-list 100,200 --reps 6 --seed 3"},
            {"fit", "fit" + data},
            {"fit-series", "fit --data " + (root / "series.csv").string() + " --column load --points-per-day 24 --log-response --outlier-filter"},
            {"cv", "cv" + data + " --sigma plugin"},
            {"cv-series", "cv --data " + (root / "series.csv").string() + " --column load --points-per-day 24"},
        };
        for (const auto& [name, args] : commands) {
            bool same = true;
            const fs::path first = root / (name + "_t1");
            const int rc = run_cli("--threads 1 --out-dir " + first.string() + " " + args);
            for (const std::string threads : {"1", "3"}) {
                const fs::path again = root / (name + "_t" + threads + "_again");
                same = same && run_cli("--threads " + threads + " --out-dir " + again.string() + " " + args) == 0 &&
                       same_tree(first, again);
            }
            out.detail << " " << name << (rc == 0 && same ? " ok" : " DIFFERS") << ";";
            out.require(rc == 0 && same, name + " deterministic");
        }
        const fs::path model = root / "fit_t1" / "model.json";
        bool same = true;
        for (const std::string threads : {"1", "2"}) {
            const fs::path dir = root / ("predict_t" + threads);
            same = same && run_cli("--threads " + threads + " --out-dir " + dir.string() + " predict --model-file " +
                                   model.string() + " --x " + (root / "x.csv").string()) == 0;
        }
        same = same && same_tree(root / "predict_t1", root / "predict_t2");
        out.detail << " predict" << (same ? " ok" : " DIFFERS");
        out.require(same, "predict deterministic");
        fs::remove_all(root);
    });

    criterion(9, "selection degeneracies and candidate sets", 0.0, [&](Outcome& out) {
        RngStream rng(kSeed, 0);
        const auto mi = ModelSpec::model_i();
        const auto data = generate(mi, 600, g100, rng);
        const PcaProblem problem(data.xs, data.ys);
        const std::size_t huge = select_m1(problem, known_config(mi, g100, 1e9)).result.m1_hat;
        std::vector<double> decreasing;
        for (std::size_t m = 1; m <= 14; ++m) decreasing.push_back(1.0 / static_cast<double>(m));
        const std::size_t zero = select_from_contrasts(decreasing, 600, {0.0, SigmaMode::known(1.0), std::nullopt}).m1_hat;
        const auto c600 = candidate_set(600, 1000), c10 = candidate_set(10, 1000);
        std::vector<std::size_t> expect600(14);
        std::iota(expect600.begin(), expect600.end(), 1);
        out.detail << " kappa=1e9 -> " << huge << ", kappa=0 -> " << zero << ", |candidates(600)| = " << c600.size()
                   << ", candidates(10) = {" << c10.front() << "}";
        out.require(huge == 1, "kappa 1e9 selects 1");
        out.require(zero == 14, "kappa 0 selects N_n");
        out.require(c600 == expect600, "candidate_set(600) = {1..14}");
        out.require(c10 == std::vector<std::size_t>{1}, "candidate_set(10) = {1}");
    });

    criterion(10, "oracle-dimension EMSPE of model (iii) decays in n with log-log slope in (-1.0, -0.2)", 0.0,
              [&](Outcome& out) {
                  const std::vector<std::size_t> sizes{100, 200, 400, 800};
                  std::vector<double> lx, ly;
                  for (std::size_t n : sizes) {
                      const auto rep = oracle_study(ModelSpec::model_iii(), n, 100, g100, opts);
                      out.detail << " n=" << n << ": " << fmt(rep.mean_oracle_mspe) << " (m1 " << fmt(rep.mean_oracle_dim)
                                 << ");";
                      out.require(rep.failures == 0, "no failed replicates");
                      lx.push_back(std::log(static_cast<double>(n)));
                      ly.push_back(std::log(rep.mean_oracle_mspe));
                  }
                  const double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / 4;
                  const double my = std::accumulate(ly.begin(), ly.end(), 0.0) / 4;
                  double sxy = 0, sxx = 0;
                  for (std::size_t i = 0; i < 4; ++i) {
                      sxy += (lx[i] - mx) * (ly[i] - my);
                      sxx += (lx[i] - mx) * (lx[i] - mx);
                  }
                  const double slope = sxy / sxx;
                  out.detail << " slope " << fmt(slope);
                  out.require(slope < 0 && -slope > 0.2 && -slope < 1.0, "slope in (-1.0, -0.2)");
              });

    std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
    return failures == 0 ? 0 : 1;
}
