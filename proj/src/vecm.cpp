#include "svecm/vecm.hpp"

#include "svecm/error.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdio>
#include <map>
#include <set>

namespace svecm::vecm {

VecmView to_vecm(const varnet::VarFit& fit) {
    if (fit.lags < 1 || fit.phi.size() != fit.lags)
        throw Error("vecm.malformed_fit", "fit must carry p >= 1 coefficient matrices");
    const auto m = static_cast<Eigen::Index>(fit.dim);
    VecmView v;
    v.pi = -Eigen::MatrixXd::Identity(m, m);
    for (const auto& phi : fit.phi) v.pi += phi;
    v.gamma.assign(fit.lags - 1, Eigen::MatrixXd::Zero(m, m));
    for (std::size_t i = 0; i + 1 < fit.lags; ++i)
        for (std::size_t j = i + 1; j < fit.lags; ++j) v.gamma[i] -= fit.phi[j];
    v.intercept = fit.intercept;
    v.series = fit.series;
    return v;
}

std::vector<Eigen::MatrixXd> to_levels(const VecmView& view) {
    const auto m = view.pi.rows();
    const std::size_t p = view.gamma.size() + 1;
    std::vector<Eigen::MatrixXd> phi(p);
    if (p == 1) {
        phi[0] = view.pi + Eigen::MatrixXd::Identity(m, m);
        return phi;
    }
    phi[0] = view.pi + Eigen::MatrixXd::Identity(m, m) + view.gamma[0];
    for (std::size_t i = 1; i + 1 < p; ++i) phi[i] = view.gamma[i] - view.gamma[i - 1];
    phi[p - 1] = -view.gamma[p - 2];
    return phi;
}

EffectiveRankReport effective_rank(const Eigen::MatrixXd& matrix, double flag_tolerance,
                                   std::string matrix_label, std::string period_label) {
    if (matrix.size() == 0 || (matrix.array() == 0.0).all())
        throw Error("vecm.zero_matrix", "effective rank undefined for zero matrix");
    Eigen::BDCSVD<Eigen::MatrixXd> svd(matrix);
    EffectiveRankReport r;
    r.singular_values = svd.singularValues();
    r.dim = static_cast<std::size_t>(std::min(matrix.rows(), matrix.cols()));
    const double cutoff = 1e-14 * r.singular_values(0);
    Eigen::VectorXd s = r.singular_values;
    for (Eigen::Index k = 0; k < s.size(); ++k)
        if (s(k) < cutoff) s(k) = 0.0;
    r.weights = s / s.sum();
    double h = 0.0;
    for (Eigen::Index k = 0; k < s.size(); ++k)
        if (r.weights(k) > 0.0) h -= r.weights(k) * std::log(r.weights(k));
    r.entropy = h;
    r.erank = std::exp(h);
    r.flag_tolerance = flag_tolerance;
    r.above_one = r.erank > 1.0 + flag_tolerance;
    r.below_full = r.erank < static_cast<double>(r.dim) - flag_tolerance;
    r.matrix_label = std::move(matrix_label);
    r.period_label = std::move(period_label);
    return r;
}

RankTable rank_report(const std::vector<RankInput>& inputs, double flag_tolerance) {
    RankTable t;
    for (const auto& in : inputs) {
        if (!in.fit)
            throw Error("vecm.missing_slice", "no fitted model for " + in.period + "/" + in.slice);
        const auto v = to_vecm(*in.fit);
        t.rows.push_back({in.period, in.slice, effective_rank(v.pi, flag_tolerance, "Pi", in.period)});
    }
    return t;
}

std::string RankTable::to_text() const {
    // Layout: one row per slice, one column per period, as "erank (m)".
    std::vector<std::string> periods, slices;
    std::map<std::pair<std::string, std::string>, const EffectiveRankReport*> cell;
    for (const auto& r : rows) {
        if (std::find(periods.begin(), periods.end(), r.period) == periods.end()) periods.push_back(r.period);
        if (std::find(slices.begin(), slices.end(), r.slice) == slices.end()) slices.push_back(r.slice);
        cell[{r.slice, r.period}] = &r.report;
    }
    std::string out;
    char buf[64];
    std::snprintf(buf, sizeof buf, "%-14s", "Slice");
    out += buf;
    for (const auto& p : periods) {
        std::snprintf(buf, sizeof buf, "%16s", p.c_str());
        out += buf;
    }
    out += '\n';
    for (const auto& s : slices) {
        std::snprintf(buf, sizeof buf, "%-14s", s.c_str());
        out += buf;
        for (const auto& p : periods) {
            auto it = cell.find({s, p});
            if (it == cell.end()) {
                std::snprintf(buf, sizeof buf, "%16s", "-");
            } else {
                std::snprintf(buf, sizeof buf, "%10.2f (%3zu)", it->second->erank, it->second->dim);
            }
            out += buf;
        }
        out += '\n';
    }
    return out;
}

std::string RankTable::to_json() const {
    auto arr = nlohmann::ordered_json::array();
    for (const auto& r : rows) {
        nlohmann::ordered_json j;
        j["period"] = r.period;
        j["slice"] = r.slice;
        j["matrix"] = r.report.matrix_label;
        j["dim"] = r.report.dim;
        j["erank"] = r.report.erank;
        j["entropy"] = r.report.entropy;
        j["above_one"] = r.report.above_one;
        j["below_full"] = r.report.below_full;
        j["flag_tolerance"] = r.report.flag_tolerance;
        j["singular_values"] = std::vector<double>(r.report.singular_values.begin(), r.report.singular_values.end());
        j["weights"] = std::vector<double>(r.report.weights.begin(), r.report.weights.end());
        arr.push_back(j);
    }
    return nlohmann::ordered_json{{"ranks", arr}}.dump(2);
}

}  // namespace svecm::vecm
