#include "svecm/jirf.hpp"

#include "svecm/error.hpp"
#include "svecm/format.hpp"

#include <nlohmann/json.hpp>

#include <Eigen/Eigenvalues>

#include <cmath>
#include <set>
#include <sstream>

namespace svecm::jirf {

VmaForm to_vma(const std::vector<Eigen::MatrixXd>& phi, std::size_t max_horizon) {
    if (phi.empty()) throw Error("jirf.malformed_fit", "VAR has no lag matrices");
    const auto m = phi.front().rows();
    VmaForm v;
    v.max_horizon = max_horizon;
    v.coefficients.reserve(max_horizon + 1);
    v.coefficients.push_back(Eigen::MatrixXd::Identity(m, m));
    for (std::size_t h = 1; h <= max_horizon; ++h) {
        Eigen::MatrixXd a = Eigen::MatrixXd::Zero(m, m);
        for (std::size_t j = 1; j <= std::min(h, phi.size()); ++j) a.noalias() += phi[j - 1] * v.coefficients[h - j];
        v.coefficients.push_back(std::move(a));
    }
    return v;
}

VmaForm to_vma(const varnet::VarFit& fit, std::size_t max_horizon) {
    VmaForm v = to_vma(fit.phi, max_horizon);
    v.series = fit.series;
    return v;
}

std::string to_string(MagnitudeSource s) {
    switch (s) {
        case MagnitudeSource::SeriesStd: return "series-std";
        case MagnitudeSource::ResidualStd: return "residual-std";
        case MagnitudeSource::User: return "user";
    }
    return "series-std";
}

MagnitudeSource magnitude_source_from_string(const std::string& s) {
    if (s == "series-std") return MagnitudeSource::SeriesStd;
    if (s == "residual-std") return MagnitudeSource::ResidualStd;
    if (s == "user") return MagnitudeSource::User;
    throw Error("scenario.bad_source", "unknown magnitude source '" + s + "'");
}

Eigen::MatrixXd ShockScenario::selector(std::size_t m) const {
    Eigen::MatrixXd e = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(shocked.size()));
    for (std::size_t k = 0; k < shocked.size(); ++k)
        e(static_cast<Eigen::Index>(shocked[k]), static_cast<Eigen::Index>(k)) = 1.0;
    return e;
}

Eigen::VectorXd series_std(const Eigen::MatrixXd& values, std::size_t begin, std::size_t end) {
    const auto block = values.middleRows(static_cast<Eigen::Index>(begin), static_cast<Eigen::Index>(end - begin));
    const Eigen::RowVectorXd mu = block.colwise().mean();
    return ((block.rowwise() - mu).colwise().squaredNorm() / static_cast<double>(end - begin)).cwiseSqrt().transpose();
}

ShockScenario build_shock(const ShockRequest& request, const std::vector<std::string>& series_index,
                          const panel::PricePanel* panel, const varnet::VarFit* fit) {
    if (request.series.empty()) throw Error("scenario.empty", "shock set is empty");
    ShockScenario sc;
    sc.source = request.source;
    sc.period = request.period;
    sc.horizon = request.horizon;
    std::set<std::size_t> seen;
    for (const auto& label : request.series) {
        auto it = std::find(series_index.begin(), series_index.end(), label);
        if (it == series_index.end()) throw Error("scenario.unknown_series", "unknown series '" + label + "'");
        const auto idx = static_cast<std::size_t>(it - series_index.begin());
        if (!seen.insert(idx).second) throw Error("scenario.duplicate_series", "series '" + label + "' listed twice");
        sc.shocked.push_back(idx);
        sc.labels.push_back(label);
    }
    const auto k = static_cast<Eigen::Index>(sc.shocked.size());
    sc.magnitudes.resize(k);
    switch (request.source) {
        case MagnitudeSource::User: {
            if (request.user_magnitudes.size() != sc.shocked.size())
                throw Error("scenario.magnitude_count", "need one magnitude per shocked series");
            for (Eigen::Index i = 0; i < k; ++i) {
                const double v = request.user_magnitudes[static_cast<std::size_t>(i)];
                if (!std::isfinite(v)) throw Error("scenario.magnitude_not_finite", "shock magnitudes must be finite");
                sc.magnitudes(i) = v;
            }
            break;
        }
        case MagnitudeSource::ResidualStd: {
            if (!fit) throw Error("scenario.no_fit", "residual-std shocks need a fitted model");
            for (Eigen::Index i = 0; i < k; ++i) {
                const auto j = static_cast<Eigen::Index>(sc.shocked[static_cast<std::size_t>(i)]);
                sc.magnitudes(i) = std::sqrt(std::max(fit->sigma(j, j), 0.0));
            }
            break;
        }
        case MagnitudeSource::SeriesStd: {
            if (!panel) throw Error("scenario.no_panel", "series-std shocks need the panel");
            const auto& p = request.period.empty() ? panel::Period{"all", 0, panel->rows()} : panel->period(request.period);
            const Eigen::VectorXd sd = series_std(panel->values, p.begin, p.end);
            for (Eigen::Index i = 0; i < k; ++i)
                sc.magnitudes(i) = sd(static_cast<Eigen::Index>(sc.shocked[static_cast<std::size_t>(i)]));
            break;
        }
    }
    for (Eigen::Index i = 0; i < k; ++i)
        if (sc.magnitudes(i) == 0.0 && request.source != MagnitudeSource::User)
            sc.warnings.push_back("zero-variance series " + sc.labels[static_cast<std::size_t>(i)] + ": shock is 0");
    return sc;
}

Eigen::VectorXd impact(const Eigen::MatrixXd& sigma, const ShockScenario& scenario) {
    const auto m = sigma.rows();
    const auto k = static_cast<Eigen::Index>(scenario.shocked.size());
    if (k == 0) throw Error("scenario.empty", "shock set is empty");
    if (scenario.magnitudes.size() != k)
        throw Error("scenario.magnitude_count", "need one magnitude per shocked series");
    Eigen::VectorXd out = Eigen::VectorXd::Zero(m);
    if (k == m) {
        for (Eigen::Index i = 0; i < k; ++i) out(static_cast<Eigen::Index>(scenario.shocked[static_cast<std::size_t>(i)])) = scenario.magnitudes(i);
        return out;
    }
    Eigen::MatrixXd sub(k, k);
    Eigen::MatrixXd cross(m, k);
    for (Eigen::Index b = 0; b < k; ++b) {
        const auto jb = static_cast<Eigen::Index>(scenario.shocked[static_cast<std::size_t>(b)]);
        cross.col(b) = sigma.col(jb);
        for (Eigen::Index a = 0; a < k; ++a)
            sub(a, b) = sigma(static_cast<Eigen::Index>(scenario.shocked[static_cast<std::size_t>(a)]), jb);
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sub, Eigen::EigenvaluesOnly);
    const double lo = es.eigenvalues().minCoeff(), hi = es.eigenvalues().maxCoeff();
    if (!(lo > 0.0) || hi / lo > 1e12) {
        std::string names;
        for (const auto& l : scenario.labels) names += (names.empty() ? "" : ", ") + l;
        throw Error("scenario.degenerate", "degenerate shock sub-covariance for {" + names + "}");
    }
    Eigen::LLT<Eigen::MatrixXd> llt(sub);
    const Eigen::VectorXd w = llt.solve(scenario.magnitudes);
    out.noalias() = cross * w;
    return out;
}

JirfResult compute_jirf(const VmaForm& vma, const Eigen::MatrixXd& sigma, const ShockScenario& scenario) {
    if (scenario.horizon > vma.max_horizon)
        throw Error("scenario.horizon", "horizon " + std::to_string(scenario.horizon) +
                                            " exceeds VMA cap " + std::to_string(vma.max_horizon));
    const Eigen::VectorXd b = impact(sigma, scenario);
    JirfResult r;
    r.scenario = scenario;
    r.series = vma.series;
    r.responses.resize(static_cast<Eigen::Index>(scenario.horizon + 1), sigma.rows());
    for (std::size_t h = 0; h <= scenario.horizon; ++h)
        r.responses.row(static_cast<Eigen::Index>(h)) = (vma.coefficients[h] * b).transpose();
    return r;
}

namespace {

std::vector<double> column(const Eigen::MatrixXd& m, Eigen::Index j) {
    return std::vector<double>(m.col(j).begin(), m.col(j).end());
}

}  // namespace

std::string JirfResult::to_json() const {
    nlohmann::ordered_json j;
    nlohmann::ordered_json sc;
    sc["series"] = scenario.labels;
    sc["magnitudes"] = std::vector<double>(scenario.magnitudes.begin(), scenario.magnitudes.end());
    sc["source"] = to_string(scenario.source);
    sc["period"] = scenario.period;
    sc["horizon"] = scenario.horizon;
    sc["warnings"] = scenario.warnings;
    j["scenario"] = sc;
    std::vector<std::size_t> horizons;
    for (std::size_t h = 0; h <= scenario.horizon; ++h) horizons.push_back(h);
    j["horizons"] = horizons;
    nlohmann::ordered_json resp;
    for (Eigen::Index c = 0; c < responses.cols(); ++c) {
        const std::string name = static_cast<std::size_t>(c) < series.size() ? series[static_cast<std::size_t>(c)] : std::to_string(c);
        resp[name] = column(responses, c);
    }
    j["responses"] = resp;
    if (bootstrap) {
        nlohmann::ordered_json b;
        b["replicates"] = bootstrap->replicates;
        b["dropped"] = bootstrap->dropped;
        b["confidence"] = bootstrap->confidence;
        nlohmann::ordered_json mean, lower, upper, se, sig;
        for (Eigen::Index c = 0; c < responses.cols(); ++c) {
            const std::string name = static_cast<std::size_t>(c) < series.size() ? series[static_cast<std::size_t>(c)] : std::to_string(c);
            mean[name] = column(bootstrap->mean, c);
            lower[name] = column(bootstrap->lower, c);
            upper[name] = column(bootstrap->upper, c);
            se[name] = column(bootstrap->std_error, c);
            std::vector<bool> flags;
            for (Eigen::Index h = 0; h < bootstrap->significant.rows(); ++h) flags.push_back(bootstrap->significant(h, c));
            sig[name] = flags;
        }
        b["mean"] = mean;
        b["lower"] = lower;
        b["upper"] = upper;
        b["std_error"] = se;
        b["significant"] = sig;
        j["bootstrap"] = b;
    }
    return j.dump();
}

std::string JirfResult::to_csv() const {
    std::ostringstream out;
    out << "horizon";
    for (Eigen::Index c = 0; c < responses.cols(); ++c)
        out << ',' << (static_cast<std::size_t>(c) < series.size() ? series[static_cast<std::size_t>(c)] : std::to_string(c));
    out << '\n';
    for (Eigen::Index h = 0; h < responses.rows(); ++h) {
        out << h;
        for (Eigen::Index c = 0; c < responses.cols(); ++c) out << ',' << format_double(responses(h, c));
        out << '\n';
    }
    return out.str();
}

}  // namespace svecm::jirf
