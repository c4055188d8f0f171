#include "svecm/app/serialize.hpp"

#include "svecm/error.hpp"

#include <openssl/evp.h>

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace svecm::app {

namespace {

std::vector<double> vec(const Eigen::VectorXd& v) { return {v.begin(), v.end()}; }

// Non-finite scores (non-converged grid points) are stored as null.
Json score(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }
double score_from(const Json& j) { return j.is_null() ? std::numeric_limits<double>::infinity() : j.get<double>(); }

Eigen::VectorXd vec_from(const Json& j) {
    const auto v = j.get<std::vector<double>>();
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

Json matrix_to_json(const Eigen::MatrixXd& m) {
    std::vector<double> data;
    data.reserve(static_cast<std::size_t>(m.size()));
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) data.push_back(m(i, j));
    return Json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", data}};
}

Eigen::MatrixXd matrix_from_json(const Json& j) {
    const auto rows = j.at("rows").get<Eigen::Index>(), cols = j.at("cols").get<Eigen::Index>();
    const auto data = j.at("data").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(data.size()) != rows * cols)
        throw Error("model.malformed", "matrix data length does not match its shape");
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index k = 0; k < cols; ++k) m(i, k) = data[static_cast<std::size_t>(i * cols + k)];
    return m;
}

Json varfit_to_json(const varnet::VarFit& fit) {
    Json j;
    j["dim"] = fit.dim;
    j["lags"] = fit.lags;
    j["series"] = fit.series;
    j["lambda"] = fit.lambda;
    j["gamma"] = fit.gamma;
    j["intercept"] = vec(fit.intercept);
    auto phi = Json::array();
    for (const auto& p : fit.phi) phi.push_back(matrix_to_json(p));
    j["phi"] = phi;
    j["sigma"] = matrix_to_json(fit.sigma);
    j["initial"] = matrix_to_json(fit.initial);
    j["residuals"] = matrix_to_json(fit.residuals);
    auto cv = Json::array();
    for (const auto& e : fit.cv_table)
    {
        Json folds = Json::array();
        for (double v : e.fold_scores) folds.push_back(score(v));
        cv.push_back(Json{{"lambda", e.lambda}, {"gamma", e.gamma}, {"mean_score", score(e.mean_score)}, {"fold_scores", folds}});
    }
    j["cv_table"] = cv;
    j["warnings"] = fit.warnings;
    return j;
}

varnet::VarFit varfit_from_json(const Json& j) {
    try {
        varnet::VarFit f;
        f.dim = j.at("dim").get<std::size_t>();
        f.lags = j.at("lags").get<std::size_t>();
        f.series = j.at("series").get<std::vector<std::string>>();
        f.lambda = j.at("lambda").get<double>();
        f.gamma = j.at("gamma").get<double>();
        f.intercept = vec_from(j.at("intercept"));
        for (const auto& p : j.at("phi")) f.phi.push_back(matrix_from_json(p));
        f.sigma = matrix_from_json(j.at("sigma"));
        f.initial = matrix_from_json(j.at("initial"));
        f.residuals = matrix_from_json(j.at("residuals"));
        for (const auto& e : j.at("cv_table")) {
            varnet::CvEntry entry{e.at("lambda").get<double>(), e.at("gamma").get<double>(), score_from(e.at("mean_score")), {}};
            for (const auto& v : e.at("fold_scores")) entry.fold_scores.push_back(score_from(v));
            f.cv_table.push_back(std::move(entry));
        }
        f.warnings = j.at("warnings").get<std::vector<std::string>>();
        const auto m = static_cast<Eigen::Index>(f.dim);
        bool ok = f.phi.size() == f.lags && f.intercept.size() == m && f.sigma.rows() == m && f.sigma.cols() == m &&
                  f.residuals.cols() == m && f.initial.rows() == static_cast<Eigen::Index>(f.lags);
        for (const auto& p : f.phi) ok = ok && p.rows() == m && p.cols() == m;
        if (!ok) throw Error("model.malformed", "fit document has inconsistent dimensions");
        return f;
    } catch (const nlohmann::json::exception& e) {
        throw Error("model.malformed", std::string("fit document: ") + e.what());
    }
}

Json adf_to_json(const stattests::AdfResult& r) {
    return Json{{"statistic", r.statistic}, {"lags", r.lags}, {"p_value", r.p_value},
                {"spec", stattests::to_string(r.spec)}, {"nobs", r.nobs}};
}

Json panel_unit_root_to_json(const stattests::PanelUnitRootResult& r) {
    Json per = Json::array();
    for (std::size_t i = 0; i < r.per_series.size(); ++i) {
        Json a = adf_to_json(r.per_series[i]);
        a["series"] = i < r.series.size() ? r.series[i] : std::to_string(i);
        per.push_back(a);
    }
    return Json{{"statistic", r.statistic}, {"df", r.df}, {"p_value", r.p_value}, {"per_series", per}};
}

Json chow_to_json(const stattests::ChowResult& r) {
    Json eqs = Json::array();
    for (const auto& e : r.equations)
        eqs.push_back(Json{{"series", e.series}, {"f_statistic", e.f_statistic}, {"p_value", e.p_value},
                           {"ssr_pooled", e.ssr_pooled}, {"ssr_split", e.ssr_split}});
    return Json{{"break_index", r.break_index}, {"lags", r.lags}, {"f_statistic", r.f_statistic}, {"df1", r.df1},
                {"df2", r.df2}, {"p_value", r.p_value}, {"equations", eqs}};
}

Json pairwise_to_json(const stattests::PairwiseResult& r) {
    Json pairs = Json::array();
    for (const auto& p : r.pairs)
        pairs.push_back(Json{{"dependent", p.dependent}, {"regressor", p.regressor}, {"statistic", p.statistic},
                             {"p_value", p.p_value}, {"lags", p.lags}, {"cointegrated", p.cointegrated}});
    std::vector<std::vector<int>> mask;
    for (Eigen::Index i = 0; i < r.cointegrated.rows(); ++i) {
        std::vector<int> row;
        for (Eigen::Index j = 0; j < r.cointegrated.cols(); ++j) row.push_back(r.cointegrated(i, j) ? 1 : 0);
        mask.push_back(row);
    }
    return Json{{"commodity", r.commodity}, {"period", r.period}, {"regions", r.regions},
                {"pairs_examined", r.pairs_examined}, {"cointegrated_pairs", r.count}, {"matrix", mask}, {"pairs", pairs}};
}

Json lag_selection_to_json(const varnet::LagSelection& s) {
    Json table = Json::array();
    for (const auto& c : s.table)
        table.push_back(Json{{"lags", c.lags}, {"log_det_sigma", c.log_det_sigma}, {"nonzero", c.nonzero}, {"aic", c.aic}});
    return Json{{"lags", s.lags}, {"table", table}};
}

Json summary_to_json(const std::vector<panel::PeriodSummary>& rows) {
    Json out = Json::array();
    for (const auto& r : rows)
        out.push_back(Json{{"commodity", r.commodity}, {"period", r.period}, {"mean", r.mean}, {"sd", r.sd},
                           {"min", r.min}, {"median", r.median}, {"max", r.max}, {"missing_pct", r.missing_pct},
                           {"observed", r.observed}});
    return out;
}

std::string sha256_hex(std::string_view data) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1)
        throw Error("io.hash", "SHA-256 computation failed");
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[digest[i] >> 4];
        out += hex[digest[i] & 15];
    }
    return out;
}

std::string sha256_file(const std::filesystem::path& path) { return sha256_hex(read_text(path)); }

void write_text(const std::filesystem::path& path, std::string_view text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("io.write", "cannot write " + path.string());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw Error("io.write", "cannot write " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("io.read", "cannot read " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace svecm::app
