#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>

#include "fofr/fofr.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Globals {
    std::uint64_t seed = 1;
    std::size_t threads = 1;
    std::string out_dir = ".";
    int verbosity = 0;
};

class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// "plugin", "known" (simulation presets only) or "known:<value>".
struct SigmaArg {
    std::string text = "plugin";

    fofr::SigmaMode resolve(const fofr::ModelSpec* spec, const fofr::Grid& grid) const {
        if (text == "plugin") return fofr::SigmaMode::plugin();
        if (text == "known") {
            if (!spec) throw UsageError("--sigma known needs a value here: use known:<value>");
            return fofr::SigmaMode::known(fofr::known_noise_variance(*spec, grid));
        }
        if (text.rfind("known:", 0) == 0) {
            const auto v = fofr::detail::parse_double(std::string_view(text).substr(6));
            if (!v || !(*v >= 0.0)) throw UsageError("--sigma known:<value> needs a nonnegative number, got '" + text + "'");
            return fofr::SigmaMode::known(*v);
        }
        throw UsageError("--sigma must be 'plugin', 'known' or 'known:<value>', got '" + text + "'");
    }
};

json sigma_json(const fofr::SigmaMode& s) {
    if (s.is_known()) return {{"mode", "known"}, {"value", s.value}};
    return {{"mode", "plugin"}};
}

fofr::ModelId parse_model(const std::string& s) {
    if (s == "i") return fofr::ModelId::I;
    if (s == "ii") return fofr::ModelId::II;
    return fofr::ModelId::III;
}

class Output {
public:
    explicit Output(const Globals& g) : dir_(g.out_dir), verbosity_(g.verbosity) { fs::create_directories(dir_); }

    void write(const std::string& name, const std::string& contents) {
        const fs::path path = dir_ / name;
        fofr::io::write_file(path.string(), contents);
        if (verbosity_ > 0) std::cerr << "wrote " << path.string() << '\n';
    }

    void write_json(const std::string& name, const json& doc) { write(name, doc.dump(2) + "\n"); }

    /// The manifest records everything that determines the outputs. Execution
    /// settings (threads, output directory, verbosity) are left out so that
    /// reruns compare byte for byte.
    void manifest(const std::string& command, json config) {
        config["command"] = command;
        config["library_version"] = FOFR_VERSION_STRING;
        write_json("manifest.json", config);
    }

private:
    fs::path dir_;
    int verbosity_;
};

struct StudyArgs {
    std::string model;
    std::size_t n = 600;
    std::size_t reps = 100;
    std::size_t p = 100;
    SigmaArg sigma{"known"};
};

void add_study_options(CLI::App* cmd, StudyArgs& a) {
    cmd->add_option("--model", a.model, "Simulation model")->required()->check(CLI::IsMember({"i", "ii", "iii"}));
    cmd->add_option("--n", a.n, "Sample size")->capture_default_str()->check(CLI::Range(std::size_t{2}, std::size_t{1} << 24));
    cmd->add_option("--reps", a.reps, "Monte Carlo replicates")->capture_default_str()->check(CLI::PositiveNumber);
    cmd->add_option("--p", a.p, "Grid size")->capture_default_str()->check(CLI::PositiveNumber);
    cmd->add_option("--sigma", a.sigma.text, "Noise variance in the penalty: known, known:<v> or plugin")
        ->capture_default_str();
}

json study_json(const StudyArgs& a, const fofr::SigmaMode& sigma, std::uint64_t seed) {
    return {{"model", a.model}, {"n", a.n}, {"reps", a.reps}, {"p", a.p}, {"sigma", sigma_json(sigma)}, {"seed", seed}};
}

struct DataArgs {
    std::string data;
    std::string column;
    std::size_t points_per_day = 0;
    std::string delimiter = ",";
    std::string covariate_data;
    std::string covariate_column;
    std::string pairing = "lag";
    bool log_response = false;
    double response_offset = 0.0;
    bool log_covariate = false;
    double covariate_offset = 0.0;
    bool outlier_filter = false;
    std::string x_curves;
    std::string y_curves;
};

void add_data_options(CLI::App* cmd, DataArgs& d) {
    auto* data = cmd->add_option("--data", d.data, "Series CSV of the response (and of the covariate in lag mode)");
    cmd->add_option("--column", d.column, "Value column of --data")->needs(data);
    cmd->add_option("--points-per-day", d.points_per_day, "Readings per day")->needs(data)->check(CLI::PositiveNumber);
    cmd->add_option("--delimiter", d.delimiter, "CSV delimiter")->capture_default_str();
    cmd->add_option("--covariate-data", d.covariate_data, "Series CSV of the covariate (paired mode)");
    cmd->add_option("--covariate-column", d.covariate_column, "Value column of --covariate-data");
    cmd->add_option("--pairing", d.pairing, "lag: X = day d-1, Y = day d; paired: X and Y on the same day")
        ->capture_default_str()
        ->check(CLI::IsMember({"lag", "paired"}));
    cmd->add_flag("--log-response", d.log_response, "Take log(y + offset) of the response");
    cmd->add_option("--response-offset", d.response_offset, "Offset of the response log")->capture_default_str();
    cmd->add_flag("--log-covariate", d.log_covariate, "Take log(x + offset) of the covariate (paired mode)");
    cmd->add_option("--covariate-offset", d.covariate_offset, "Offset of the covariate log")->capture_default_str();
    cmd->add_flag("--outlier-filter", d.outlier_filter, "Drop days whose maximum exceeds the Tukey fence");
    auto* x = cmd->add_option("--x", d.x_curves, "Covariate curves CSV (one curve per row)");
    auto* y = cmd->add_option("--y", d.y_curves, "Response curves CSV (one curve per row)");
    x->needs(y);
    y->needs(x);
    x->excludes(data);
}

struct LoadedData {
    fofr::FunctionalSample xs;
    fofr::FunctionalSample ys;
    json description;
};

LoadedData load_data(const DataArgs& d) {
    if (d.delimiter.size() != 1) throw UsageError("--delimiter must be a single character");
    const char delim = d.delimiter[0];
    if (!d.x_curves.empty()) {
        auto xs = fofr::io::curves_from_csv(d.x_curves, delim);
        auto ys = fofr::io::curves_from_csv(d.y_curves, delim);
        return {std::move(xs), std::move(ys), {{"x", d.x_curves}, {"y", d.y_curves}, {"delimiter", d.delimiter}}};
    }
    if (d.data.empty()) throw UsageError("give either --data with --column and --points-per-day, or --x and --y");
    if (d.column.empty() || d.points_per_day == 0) throw UsageError("--data needs --column and --points-per-day");

    fofr::PreprocessSpec spec;
    spec.pairing = d.pairing == "paired" ? fofr::Pairing::Paired : fofr::Pairing::Lag;
    spec.log_response = d.log_response;
    spec.response_offset = d.response_offset;
    spec.log_covariate = d.log_covariate;
    spec.covariate_offset = d.covariate_offset;
    spec.outlier_filter = d.outlier_filter;

    const fofr::CsvOptions csv{delim, std::nullopt};
    const auto response = fofr::load_series(d.data, d.column, d.points_per_day, csv);
    std::optional<fofr::SeriesTable> covariate;
    if (spec.pairing == fofr::Pairing::Paired) {
        if (d.covariate_data.empty() || d.covariate_column.empty())
            throw UsageError("--pairing paired needs --covariate-data and --covariate-column");
        covariate = fofr::load_series(d.covariate_data, d.covariate_column, d.points_per_day, csv);
    } else if (!d.covariate_data.empty() || d.log_covariate) {
        throw UsageError("--covariate-data and --log-covariate apply to --pairing paired only");
    }
    auto prepared = fofr::prepare(response, covariate ? &*covariate : nullptr, spec);
    json desc = {{"data", d.data},
                 {"column", d.column},
                 {"points_per_day", d.points_per_day},
                 {"delimiter", d.delimiter},
                 {"pairing", d.pairing},
                 {"log_response", d.log_response},
                 {"response_offset", d.response_offset},
                 {"outlier_filter", d.outlier_filter},
                 {"dropped_readings", response.dropped},
                 {"days", response.days()},
                 {"pairs", prepared.ys.size()},
                 {"removed_days", prepared.removed_days}};
    if (covariate) {
        desc["covariate_data"] = d.covariate_data;
        desc["covariate_column"] = d.covariate_column;
        desc["log_covariate"] = d.log_covariate;
        desc["covariate_offset"] = d.covariate_offset;
    }
    return {std::move(prepared.xs), std::move(prepared.ys), std::move(desc)};
}

struct SelectArgs {
    double kappa = fofr::kDefaultKappa;
    SigmaArg sigma;
    std::size_t max_dim = 0;
};

void add_select_options(CLI::App* cmd, SelectArgs& s) {
    cmd->add_option("--kappa", s.kappa, "Penalty constant")->capture_default_str()->check(CLI::NonNegativeNumber);
    cmd->add_option("--sigma", s.sigma.text, "Noise variance in the penalty: known:<v> or plugin")->capture_default_str();
    cmd->add_option("--max-dim", s.max_dim, "Extra cap on the candidate dimensions (0 = none)")->capture_default_str();
}

fofr::SelectionConfig select_config(const SelectArgs& s, const fofr::Grid& grid) {
    fofr::SelectionConfig cfg{s.kappa, s.sigma.resolve(nullptr, grid), std::nullopt};
    if (s.max_dim > 0) cfg.max_dim_cap = s.max_dim;
    return cfg;
}

json select_json(const fofr::SelectionConfig& cfg) {
    return {{"kappa", cfg.kappa},
            {"sigma", sigma_json(cfg.sigma)},
            {"max_dim", cfg.max_dim_cap ? json(*cfg.max_dim_cap) : json(nullptr)}};
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Function-on-function linear regression: simulation, calibration, fitting and cross-validation"};
    app.require_subcommand(1);
    app.fallthrough();
    Globals g;
    app.add_option("--seed", g.seed, "Base random seed")->capture_default_str();
    app.add_option("--threads", g.threads, "Worker threads")
        ->capture_default_str()
        ->envname("FOFR_THREADS")
        ->check(CLI::PositiveNumber);
    app.add_option("--out-dir", g.out_dir, "Output directory")->capture_default_str()->envname("FOFR_OUT_DIR");
    app.add_flag("-v,--verbose", g.verbosity, "Report written files on stderr");

    StudyArgs sim;
    double sim_kappa = fofr::kDefaultKappa;
    auto* simulate = app.add_subcommand("simulate", "Monte Carlo EMSPE of the selected estimator at one kappa");
    add_study_options(simulate, sim);
    simulate->add_option("--kappa", sim_kappa, "Penalty constant")->capture_default_str()->check(CLI::NonNegativeNumber);

    StudyArgs cal;
    double kmin = 0.2, kmax = 2.0, kstep = 0.2;
    auto* calibrate = app.add_subcommand("calibrate", "EMSPE and mean selected dimension along a kappa grid");
    add_study_options(calibrate, cal);
    calibrate->add_option("--kappa-min", kmin, "First kappa")->capture_default_str();
    calibrate->add_option("--kappa-max", kmax, "Last kappa")->capture_default_str();
    calibrate->add_option("--kappa-step", kstep, "Grid step")->capture_default_str();

    StudyArgs sz;
    double sz_kappa = fofr::kDefaultKappa;
    std::vector<std::size_t> n_list{200, 400, 600};
    auto* study = app.add_subcommand("study", "EMSPE distribution for several sample sizes");
    add_study_options(study, sz);
    study->add_option("--kappa", sz_kappa, "Penalty constant")->capture_default_str()->check(CLI::NonNegativeNumber);
    study->add_option("--n-list", n_list, "Sample sizes")->capture_default_str()->delimiter(',')->check(
        CLI::Range(std::size_t{2}, std::size_t{1} << 24));

    DataArgs fit_data;
    SelectArgs fit_sel;
    auto* fit = app.add_subcommand("fit", "Select m1 and fit the estimator on a data set");
    add_data_options(fit, fit_data);
    add_select_options(fit, fit_sel);

    std::string model_file, predict_x, predict_out = "predictions.csv";
    bool centered_input = false;
    auto* predict = app.add_subcommand("predict", "Apply a fitted model to covariate curves");
    predict->add_option("--model-file", model_file, "Model JSON written by fit")->required();
    predict->add_option("--x", predict_x, "Covariate curves CSV (one curve per row)")->required();
    predict->add_option("--output", predict_out, "Output file name inside --out-dir")->capture_default_str();
    predict->add_flag("--centered-input", centered_input, "Inputs are already centered; skip the stored means");

    DataArgs cv_data;
    SelectArgs cv_sel;
    bool global_centering = false;
    auto* cv = app.add_subcommand("cv", "Leave-one-out prediction errors with selection refit in every fold");
    add_data_options(cv, cv_data);
    add_select_options(cv, cv_sel);
    cv->add_flag("--global-centering", global_centering, "Center once on the full sample instead of per fold");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        const fofr::StudyOptions opts{g.seed, g.threads};
        if (*simulate) {
            const fofr::Grid grid(sim.p);
            const auto spec = fofr::ModelSpec::preset(parse_model(sim.model));
            const fofr::SelectionConfig cfg{sim_kappa, sim.sigma.resolve(&spec, grid), std::nullopt};
            const auto report = fofr::emspe(spec, sim.n, sim.reps, cfg, grid, opts);
            Output out(g);
            out.write("emspe.csv", fofr::io::replicates_to_csv({report}));
            out.write_json("summary.json", fofr::io::report_summary(report));
            auto cfg_json = study_json(sim, cfg.sigma, g.seed);
            cfg_json["kappa"] = sim_kappa;
            out.manifest("simulate", cfg_json);
            std::cout << "model " << sim.model << ": mean EMSPE " << fofr::io::format_double(report.mean_emspe)
                      << ", mean m1 " << report.mean_selected_dim << ", failures " << report.failures << '\n';
        } else if (*calibrate) {
            if (!(kmin > 0.0) || !(kmin <= kmax)) throw UsageError("need 0 < --kappa-min <= --kappa-max");
            if (!(kstep > 0.0)) throw UsageError("--kappa-step must be positive");
            const fofr::Grid grid(cal.p);
            const auto spec = fofr::ModelSpec::preset(parse_model(cal.model));
            const fofr::SelectionConfig cfg{kmin, cal.sigma.resolve(&spec, grid), std::nullopt};
            const auto kappas = fofr::kappa_grid(kmin, kmax, kstep);
            const auto reports = fofr::kappa_sweep(spec, cal.n, cal.reps, kappas, cfg, grid, opts);
            Output out(g);
            out.write("calibrate.csv", fofr::io::sweep_to_csv(reports));
            out.write("calibrate_replicates.csv", fofr::io::replicates_to_csv(reports));
            auto cfg_json = study_json(cal, cfg.sigma, g.seed);
            cfg_json["kappa_grid"] = kappas;
            out.manifest("calibrate", cfg_json);
            std::cout << "kappa,mean_emspe,mean_dim\n";
            for (const auto& r : reports)
                std::cout << fofr::io::format_double(r.kappa) << ',' << fofr::io::format_double(r.mean_emspe) << ','
                          << r.mean_selected_dim << '\n';
        } else if (*study) {
            const fofr::Grid grid(sz.p);
            const auto spec = fofr::ModelSpec::preset(parse_model(sz.model));
            const fofr::SelectionConfig cfg{sz_kappa, sz.sigma.resolve(&spec, grid), std::nullopt};
            const auto rows = fofr::sample_size_study(spec, n_list, sz.reps, cfg, grid, opts);
            std::vector<fofr::EmspeReport> reports;
            for (const auto& r : rows) reports.push_back(r.report);
            Output out(g);
            out.write("size_study.csv", fofr::io::size_study_to_csv(rows));
            out.write("size_replicates.csv", fofr::io::replicates_to_csv(reports));
            auto cfg_json = study_json(sz, cfg.sigma, g.seed);
            cfg_json.erase("n");
            cfg_json["n_list"] = n_list;
            cfg_json["kappa"] = sz_kappa;
            out.manifest("study", cfg_json);
            for (const auto& r : rows)
                std::cout << "n " << r.n << ": mean EMSPE " << fofr::io::format_double(r.errors.mean) << '\n';
        } else if (*fit) {
            const auto data = load_data(fit_data);
            const auto cfg = select_config(fit_sel, data.xs.grid());
            const auto sel = fofr::select_m1(data.xs, data.ys, cfg);
            Output out(g);
            out.write("model.json", fofr::io::model_to_json(sel.model));
            out.write("selection.csv", fofr::io::selection_to_csv(sel.result));
            out.write("train_x.csv", fofr::io::curves_to_csv(data.xs.values()));
            out.write("fitted.csv", fofr::io::curves_to_csv(fofr::predict(sel.model, data.xs).values()));
            out.manifest("fit", {{"input", data.description}, {"selection", select_json(cfg)}});
            for (const auto& w : sel.model.warnings) std::cerr << "warning: " << w << '\n';
            std::cout << "selected m1 = " << sel.result.m1_hat << " from " << sel.result.candidates.size()
                      << " candidates (n = " << data.xs.size() << ", p = " << data.xs.grid().size() << ")\n";
        } else if (*predict) {
            const auto model = fofr::io::load_model(model_file);
            const auto xs = fofr::io::curves_from_csv(predict_x);
            if (xs.grid().size() != model.grid.size())
                throw fofr::GridMismatch(model.grid.size(), xs.grid().size());
            Output out(g);
            out.write(predict_out, fofr::io::curves_to_csv(fofr::predict(model, xs, !centered_input).values()));
            out.manifest("predict", {{"model_file", model_file}, {"x", predict_x}, {"output", predict_out},
                                     {"centered_input", centered_input}});
            std::cout << "predicted " << xs.size() << " curves\n";
        } else if (*cv) {
            const auto data = load_data(cv_data);
            const auto cfg = select_config(cv_sel, data.xs.grid());
            const auto report = fofr::loo_cv(data.xs, data.ys, cfg, {global_centering, g.threads});
            Output out(g);
            out.write("cv.csv", fofr::io::cv_to_csv(report));
            out.write_json("cv_summary.json", fofr::io::cv_summary(report));
            out.write("predictions.csv", fofr::io::curves_to_csv(report.predictions));
            out.manifest("cv", {{"input", data.description},
                                {"selection", select_json(cfg)},
                                {"centering", global_centering ? "global" : "per-fold"}});
            std::cout << "LOO-CV over " << report.rows.size() << " days: median error "
                      << fofr::io::format_double(report.errors.median) << ", failures " << report.failures << '\n';
        }
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
