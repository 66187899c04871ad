#pragma once

// File formats: fitted model JSON, report CSV/JSON and curve CSV files.
// Reals are written in the shortest form that reads back to the same double.

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "fofr/dataio.hpp"
#include "fofr/errors.hpp"
#include "fofr/estimator.hpp"
#include "fofr/selection.hpp"
#include "fofr/simulate.hpp"

namespace fofr::io {

inline std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

namespace detail {

template <class Vec>
void write_array(std::ostream& os, const Vec& v) {
    os << '[';
    for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(v.size()); ++i) {
        if (i) os << ',';
        os << format_double(v[i]);
    }
    os << ']';
}

inline void write_rows(std::ostream& os, const Matrix& m) {
    os << '[';
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        if (r) os << ",\n    ";
        write_array(os, Vector(m.row(r).transpose()));
    }
    os << ']';
}

inline std::string json_string(const std::string& s) { return nlohmann::json(s).dump(); }

inline Matrix rows_from_json(const nlohmann::json& j, Eigen::Index rows, Eigen::Index cols, const char* field) {
    if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != rows)
        throw ParseError(std::string("model json: field '") + field + "' has the wrong number of rows");
    Matrix m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        const auto& row = j[static_cast<std::size_t>(r)];
        if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols)
            throw ParseError(std::string("model json: field '") + field + "' has a row of the wrong length");
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = row[static_cast<std::size_t>(c)].get<double>();
    }
    return m;
}

inline Vector vector_from_json(const nlohmann::json& j, Eigen::Index size, const char* field) {
    if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != size)
        throw ParseError(std::string("model json: field '") + field + "' has the wrong length");
    Vector v(size);
    for (Eigen::Index i = 0; i < size; ++i) v[i] = j[static_cast<std::size_t>(i)].get<double>();
    return v;
}

} // namespace detail

/// Model document: {grid_p, m1, m2, eigenvalues[], eigenfunctions[][], coeffs[][],
/// x_mean[], y_mean[], sigma_plugin, kappa, created_from}. eigenfunctions holds
/// one row per basis function (max(m1, m2) rows of p values); coeffs is m1 x m2.
inline std::string model_to_json(const FittedModel& model) {
    std::ostringstream os;
    os << "{\n";
    os << "  \"grid_p\": " << model.grid.size() << ",\n";
    os << "  \"m1\": " << model.m1 << ",\n";
    os << "  \"m2\": " << model.m2 << ",\n";
    os << "  \"eigenvalues\": ";
    detail::write_array(os, model.eigenvalues);
    os << ",\n  \"eigenfunctions\": ";
    detail::write_rows(os, model.basis.transpose());
    os << ",\n  \"coeffs\": ";
    detail::write_rows(os, model.coeffs);
    os << ",\n  \"x_mean\": ";
    detail::write_array(os, model.x_mean.values());
    os << ",\n  \"y_mean\": ";
    detail::write_array(os, model.y_mean.values());
    os << ",\n  \"sigma_plugin\": " << (model.sigma_plugin ? format_double(*model.sigma_plugin) : "null");
    os << ",\n  \"kappa\": " << (model.kappa ? format_double(*model.kappa) : "null");
    os << ",\n  \"created_from\": " << detail::json_string(model.created_from);
    os << "\n}\n";
    return os.str();
}

inline FittedModel model_from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("model json: ") + e.what());
    }
    try {
        const auto p = j.at("grid_p").get<std::size_t>();
        const auto m1 = j.at("m1").get<std::size_t>();
        const auto m2 = j.at("m2").get<std::size_t>();
        const Grid grid(p);
        const auto width = static_cast<Eigen::Index>(std::max(m1, m2));
        const auto ep = static_cast<Eigen::Index>(p);
        FittedModel model{grid,
                          m1,
                          m2,
                          detail::rows_from_json(j.at("coeffs"), static_cast<Eigen::Index>(m1),
                                                 static_cast<Eigen::Index>(m2), "coeffs"),
                          detail::rows_from_json(j.at("eigenfunctions"), width, ep, "eigenfunctions").transpose(),
                          detail::vector_from_json(j.at("eigenvalues"),
                                                   static_cast<Eigen::Index>(j.at("eigenvalues").size()), "eigenvalues"),
                          GridFunction(grid, detail::vector_from_json(j.at("x_mean"), ep, "x_mean")),
                          GridFunction(grid, detail::vector_from_json(j.at("y_mean"), ep, "y_mean")),
                          std::nullopt,
                          std::nullopt,
                          j.value("created_from", std::string()),
                          {}};
        if (j.contains("sigma_plugin") && !j["sigma_plugin"].is_null()) model.sigma_plugin = j["sigma_plugin"].get<double>();
        if (j.contains("kappa") && !j["kappa"].is_null()) model.kappa = j["kappa"].get<double>();
        return model;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("model json: ") + e.what());
    }
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const std::string& path, const std::string& contents) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write file: " + path);
    out << contents;
    if (!out) throw Error("failed writing file: " + path);
}

inline void save_model(const std::string& path, const FittedModel& model) { write_file(path, model_to_json(model)); }
inline FittedModel load_model(const std::string& path) { return model_from_json(read_file(path)); }

/// One curve per row, one column per grid node, header t1..tp.
inline std::string curves_to_csv(const Matrix& rows) {
    std::ostringstream os;
    for (Eigen::Index k = 0; k < rows.cols(); ++k) os << (k ? "," : "") << 't' << (k + 1);
    os << '\n';
    for (Eigen::Index i = 0; i < rows.rows(); ++i) {
        for (Eigen::Index k = 0; k < rows.cols(); ++k) os << (k ? "," : "") << format_double(rows(i, k));
        os << '\n';
    }
    return os.str();
}

/// Reads a curve file written by curves_to_csv (header row required).
inline FunctionalSample curves_from_csv(const std::string& path, char delimiter = ',') {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open file: " + path);
    std::string line;
    if (!std::getline(in, line)) throw ParseError(path + ": missing header row");
    const std::size_t p = fofr::detail::split_fields(line, delimiter).size();
    std::vector<std::vector<double>> rows;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        if (fofr::detail::trim(line).empty()) continue;
        ++row;
        const auto fields = fofr::detail::split_fields(line, delimiter);
        if (fields.size() != p)
            throw ParseError(path + ": row " + std::to_string(row) + " has " + std::to_string(fields.size()) +
                                 " values, expected " + std::to_string(p),
                             row);
        std::vector<double> values;
        for (const auto& f : fields) {
            const auto v = fofr::detail::parse_double(f);
            if (!v) throw ParseError(path + ": row " + std::to_string(row) + ": non-numeric value '" + std::string(f) + "'", row);
            values.push_back(*v);
        }
        rows.push_back(std::move(values));
    }
    if (rows.empty()) throw ParseError(path + ": no curves");
    Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(p));
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t k = 0; k < p; ++k) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = rows[i][k];
    return FunctionalSample(Grid(p), std::move(m));
}

/// Columns: m1, contrast, penalty, criterion, sigma_used.
inline std::string selection_to_csv(const SelectionResult& r) {
    std::ostringstream os;
    os << "m1,contrast,penalty,criterion,sigma_used\n";
    for (std::size_t i = 0; i < r.candidates.size(); ++i)
        os << r.candidates[i] << ',' << format_double(r.contrasts[i]) << ',' << format_double(r.penalties[i]) << ','
           << format_double(r.criterion[i]) << ',' << format_double(r.sigma_used[i]) << '\n';
    return os.str();
}

inline nlohmann::json selection_to_json(const SelectionResult& r) {
    return {{"m1_hat", r.m1_hat},         {"candidates", r.candidates}, {"contrasts", r.contrasts},
            {"penalties", r.penalties},   {"criterion", r.criterion},   {"sigma_used", r.sigma_used}};
}

/// Columns: kappa, n, replicate, m1_hat, error, failed.
inline std::string replicates_to_csv(const std::vector<EmspeReport>& reports) {
    std::ostringstream os;
    os << "kappa,n,replicate,m1_hat,error,failed\n";
    for (const auto& rep : reports)
        for (const auto& r : rep.per_replicate)
            os << format_double(rep.kappa) << ',' << rep.n << ',' << r.index << ',' << r.m1_hat << ','
               << format_double(r.failed ? std::nan("") : r.error) << ',' << (r.failed ? 1 : 0) << '\n';
    return os.str();
}

/// Columns: kappa, mean_emspe, mean_dim, failures.
inline std::string sweep_to_csv(const std::vector<EmspeReport>& reports) {
    std::ostringstream os;
    os << "kappa,mean_emspe,mean_dim,failures\n";
    for (const auto& rep : reports)
        os << format_double(rep.kappa) << ',' << format_double(rep.mean_emspe) << ','
           << format_double(rep.mean_selected_dim) << ',' << rep.failures << '\n';
    return os.str();
}

inline nlohmann::json report_summary(const EmspeReport& rep) {
    return {{"kappa", rep.kappa},
            {"n", rep.n},
            {"replicates", rep.replicates},
            {"p", rep.p},
            {"mean_emspe", rep.mean_emspe},
            {"mean_selected_dim", rep.mean_selected_dim},
            {"failures", rep.failures}};
}

/// Columns: n, mean, min, q1, median, q3, max, iqr, outliers_low, outliers_high, mean_dim, failures.
inline std::string size_study_to_csv(const std::vector<SizeSummary>& rows) {
    std::ostringstream os;
    os << "n,mean,min,q1,median,q3,max,iqr,outliers_low,outliers_high,mean_dim,failures\n";
    for (const auto& s : rows) {
        const auto& d = s.errors;
        os << s.n << ',' << format_double(d.mean) << ',' << format_double(d.min) << ',' << format_double(d.q1) << ','
           << format_double(d.median) << ',' << format_double(d.q3) << ',' << format_double(d.max) << ','
           << format_double(d.iqr()) << ',' << d.outliers_low << ',' << d.outliers_high << ','
           << format_double(s.mean_selected_dim) << ',' << s.failures << '\n';
    }
    return os.str();
}

/// Columns: index, m1_hat, l2_error (1-based index; failed rows have an empty error).
inline std::string cv_to_csv(const CvReport& report) {
    std::ostringstream os;
    os << "index,m1_hat,l2_error\n";
    for (const auto& r : report.rows)
        os << (r.index + 1) << ',' << (r.failed ? std::string() : std::to_string(r.m1_hat)) << ','
           << (r.failed ? std::string() : format_double(r.l2_error)) << '\n';
    return os.str();
}

inline nlohmann::json cv_summary(const CvReport& report) {
    nlohmann::json hist = nlohmann::json::object();
    for (const auto& [dim, count] : report.dimension_histogram) hist[std::to_string(dim)] = count;
    const auto& e = report.errors;
    return {{"n", report.rows.size()},
            {"failures", report.failures},
            {"centering", report.global_centering ? "global" : "per-fold"},
            {"quantile_convention", "linear interpolation of order statistics, h = (n-1)p + 1"},
            {"dimension_histogram", hist},
            {"error_quantiles",
             {{"min", e.min}, {"q1", e.q1}, {"median", e.median}, {"q3", e.q3}, {"max", e.max}, {"mean", e.mean}}},
            {"best_index", report.best + 1},
            {"median_index", report.median + 1},
            {"worst_index", report.worst + 1}};
}

} // namespace fofr::io
