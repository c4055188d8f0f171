#include "svecm/stattests.hpp"

#include "svecm/error.hpp"
#include "svecm/parallel.hpp"

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/fisher_f.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

namespace svecm::stattests {

namespace {

// MacKinnon (1994) response-surface constants, indexed by the number of I(1)
// series N = 1..2. Small-p polynomials are quadratic, large-p cubic, both in
// the statistic, evaluated through the standard normal CDF.
struct SurfaceRow {
    double max_stat;
    double min_stat;
    double star_stat;
    std::array<double, 3> small_p;
    std::array<double, 4> large_p;
};

constexpr double kInf = std::numeric_limits<double>::infinity();

constexpr std::array<SurfaceRow, 2> kSurfaceNone{{
    {kInf, -19.04, -1.04, {0.6344, 1.2378, 0.032496}, {0.4797, 0.93557, -0.06999, 0.033066}},
    {1.51, -19.62, -1.53, {1.9129, 1.3857, 0.035322}, {1.5578, 0.8558, -0.2083, -0.033549}},
}};
constexpr std::array<SurfaceRow, 2> kSurfaceConstant{{
    {2.74, -18.83, -1.61, {2.1659, 1.4412, 0.038269}, {1.7339, 0.93202, -0.12745, -0.010368}},
    {0.92, -18.86, -2.62, {2.92, 1.5012, 0.039796}, {2.1945, 0.64695, -0.29198, -0.042377}},
}};
constexpr std::array<SurfaceRow, 2> kSurfaceTrend{{
    {0.7, -16.18, -2.89, {3.2512, 1.6047, 0.049588}, {2.5261, 0.61654, -0.37956, -0.060285}},
    {0.63, -21.15, -3.19, {3.6646, 1.5419, 0.036448}, {2.85, 0.5272, -0.36622, -0.051695}},
}};

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

struct Regression {
    Eigen::VectorXd beta;
    double ssr = 0.0;
    Eigen::Index rank = 0;
};

Regression least_squares(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
    Regression r;
    r.beta = qr.solve(y);
    r.rank = qr.rank();
    r.ssr = (y - X * r.beta).squaredNorm();
    return r;
}

struct DfRegression {
    double statistic = 0.0;
    double aic = 0.0;
    std::size_t nobs = 0;
};

std::size_t deterministic_columns(Deterministic spec) {
    switch (spec) {
        case Deterministic::None: return 0;
        case Deterministic::Constant: return 1;
        case Deterministic::ConstantTrend: return 2;
    }
    return 0;
}

// Dickey-Fuller regression with `lags` lagged differences over rows t in [first, n).
DfRegression df_regression(std::span<const double> y, Deterministic spec, std::size_t lags,
                           std::size_t first) {
    const std::size_t n = y.size();
    const std::size_t det = deterministic_columns(spec);
    const std::size_t rows = n - first;
    const std::size_t k = det + 1 + lags;
    Eigen::MatrixXd X(rows, k);
    Eigen::VectorXd dy(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        const std::size_t t = first + r;
        dy(r) = y[t] - y[t - 1];
        std::size_t c = 0;
        if (det >= 1) X(r, c++) = 1.0;
        if (det >= 2) X(r, c++) = static_cast<double>(t);
        X(r, c++) = y[t - 1];
        for (std::size_t i = 1; i <= lags; ++i) X(r, c++) = y[t - i] - y[t - i - 1];
    }
    const Eigen::Index level_col = static_cast<Eigen::Index>(det);

    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(X);
    const Eigen::VectorXd beta = cod.solve(dy);
    const double ssr = (dy - X * beta).squaredNorm();
    const auto rank = cod.rank();
    const double dof = static_cast<double>(static_cast<Eigen::Index>(rows) - rank);
    const double s2 = dof > 0 ? ssr / dof : 0.0;
    // Var(beta_level) / s2 = squared norm of the pseudo-inverse row.
    const Eigen::MatrixXd pinv = cod.pseudoInverse();
    const double v = pinv.row(level_col).squaredNorm();
    const double se = std::sqrt(s2 * v);

    DfRegression out;
    out.nobs = rows;
    out.statistic = (se > 0.0 && std::isfinite(se)) ? beta(level_col) / se : 0.0;
    const double nr = static_cast<double>(rows);
    out.aic = nr * std::log(std::max(ssr, std::numeric_limits<double>::min()) / nr) +
              2.0 * static_cast<double>(k);
    return out;
}

}  // namespace

std::string to_string(Deterministic d) {
    switch (d) {
        case Deterministic::None: return "none";
        case Deterministic::Constant: return "constant";
        case Deterministic::ConstantTrend: return "constant+trend";
    }
    return "constant";
}

Deterministic deterministic_from_string(const std::string& s) {
    if (s == "none" || s == "n") return Deterministic::None;
    if (s == "constant" || s == "c") return Deterministic::Constant;
    if (s == "constant+trend" || s == "ct" || s == "trend") return Deterministic::ConstantTrend;
    throw Error("config.bad_value", "unknown deterministic spec '" + s + "'");
}

double mackinnon_p_value(double statistic, Deterministic spec, int n_integrated) {
    if (n_integrated < 1 || n_integrated > 2)
        throw Error("stattests.bad_argument", "MacKinnon surfaces are embedded for N = 1, 2 only");
    const auto& table = spec == Deterministic::None       ? kSurfaceNone
                        : spec == Deterministic::Constant ? kSurfaceConstant
                                                          : kSurfaceTrend;
    const SurfaceRow& row = table[static_cast<std::size_t>(n_integrated - 1)];
    if (std::isnan(statistic)) return 1.0;
    if (statistic > row.max_stat) return 1.0;
    if (statistic < row.min_stat) return 0.0;
    double z = 0.0;
    if (statistic <= row.star_stat) {
        for (auto it = row.small_p.rbegin(); it != row.small_p.rend(); ++it) z = z * statistic + *it;
    } else {
        for (auto it = row.large_p.rbegin(); it != row.large_p.rend(); ++it) z = z * statistic + *it;
    }
    return std::clamp(normal_cdf(z), 0.0, 1.0);
}

std::size_t default_max_lag(std::size_t n) {
    return static_cast<std::size_t>(std::floor(12.0 * std::pow(static_cast<double>(n) / 100.0, 0.25)));
}

AdfResult adf_test(std::span<const double> series, Deterministic spec, std::size_t max_lag) {
    const std::size_t n = series.size();
    if (n <= max_lag + 10)
        throw Error("stattests.series_too_short",
                    "series too short for ADF: need more than " + std::to_string(max_lag + 10) +
                        " observations, got " + std::to_string(n));
    const auto [lo, hi] = std::minmax_element(series.begin(), series.end());
    if (*lo == *hi) throw Error("stattests.zero_variance", "zero variance");

    std::size_t best = 0;
    double best_aic = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k <= max_lag; ++k) {
        const auto r = df_regression(series, spec, k, max_lag + 1);
        if (r.aic < best_aic) {
            best_aic = r.aic;
            best = k;
        }
    }
    const auto fit = df_regression(series, spec, best, best + 1);
    AdfResult out;
    out.statistic = fit.statistic;
    out.lags = best;
    out.spec = spec;
    out.nobs = fit.nobs;
    out.p_value = mackinnon_p_value(fit.statistic, spec, 1);
    return out;
}

double chi_square_sf(double x, double df) {
    if (!(x > 0.0)) return 1.0;
    if (std::isinf(x)) return 0.0;
    return boost::math::cdf(boost::math::complement(boost::math::chi_squared(df), x));
}

double f_sf(double x, double df1, double df2) {
    if (!(x > 0.0)) return 1.0;
    if (std::isinf(x)) return 0.0;
    return boost::math::cdf(boost::math::complement(boost::math::fisher_f(df1, df2), x));
}

PanelUnitRootResult fisher_combine(const std::vector<AdfResult>& per_series,
                                   std::vector<std::string> names) {
    if (per_series.size() < 2)
        throw Error("stattests.too_few_series", "panel unit-root test needs at least 2 series");
    PanelUnitRootResult r;
    r.per_series = per_series;
    r.series = std::move(names);
    double s = 0.0;
    for (const auto& a : per_series) s += std::log(a.p_value);
    r.statistic = -2.0 * s;
    r.df = 2 * per_series.size();
    r.p_value = chi_square_sf(r.statistic, static_cast<double>(r.df));
    return r;
}

PanelUnitRootResult panel_unit_root(const panel::PricePanel& panel, Deterministic spec,
                                    std::optional<std::size_t> max_lag, std::size_t threads) {
    const std::size_t m = panel.cols();
    if (m < 2) throw Error("stattests.too_few_series", "panel unit-root test needs at least 2 series");
    const std::size_t lag = max_lag.value_or(default_max_lag(panel.rows()));
    std::vector<AdfResult> results(m);
    std::vector<std::string> errors(m);
    parallel_for(
        m,
        [&](std::size_t j) {
            try {
                std::vector<double> col(panel.values.col(static_cast<Eigen::Index>(j)).begin(),
                                        panel.values.col(static_cast<Eigen::Index>(j)).end());
                results[j] = adf_test(col, spec, lag);
            } catch (const std::exception& e) {
                errors[j] = panel.series[j].label() + ": " + e.what();
            }
        },
        threads);
    std::string msg;
    for (const auto& e : errors)
        if (!e.empty()) msg += (msg.empty() ? "" : "; ") + e;
    if (!msg.empty()) throw Error("stattests.series_failed", "ADF failed for " + msg);
    return fisher_combine(results, panel.labels());
}

ChowResult chow_test(const panel::PricePanel& panel, std::size_t break_index, std::size_t lags) {
    return chow_test(panel.values, break_index, lags, panel.labels());
}

ChowResult chow_test(const Eigen::MatrixXd& levels, std::size_t break_index, std::size_t lags,
                     const std::vector<std::string>& names) {
    const auto T = static_cast<std::size_t>(levels.rows());
    const auto m = static_cast<std::size_t>(levels.cols());
    if (lags < 1) throw Error("stattests.bad_argument", "Chow test needs at least one lag");
    const std::size_t k = m * lags + 1;
    const std::size_t required = m * lags + 10;
    // Regression rows are t = lags..T-1; regime one holds t < break_index.
    const std::size_t n1 = break_index > lags ? std::min(break_index, T) - lags : 0;
    const std::size_t n = T > lags ? T - lags : 0;
    const std::size_t n2 = n - n1;
    if (n1 <= required || n2 <= required)
        throw Error("stattests.subsample_too_short",
                    "Chow sub-samples need more than " + std::to_string(required) +
                        " observations each; got " + std::to_string(n1) + " and " +
                        std::to_string(n2));

    Eigen::MatrixXd X(n, k);
    for (std::size_t r = 0; r < n; ++r) {
        const std::size_t t = lags + r;
        X(r, 0) = 1.0;
        for (std::size_t l = 1; l <= lags; ++l)
            X.block(r, 1 + (l - 1) * m, 1, m) = levels.row(t - l);
    }
    const Eigen::MatrixXd Y = levels.bottomRows(n);
    const auto in1 = static_cast<Eigen::Index>(n1), in2 = static_cast<Eigen::Index>(n2);

    ChowResult out;
    out.break_index = break_index;
    out.lags = lags;
    const double df1 = static_cast<double>(k);
    const double df2 = static_cast<double>(n - 2 * k);
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        const Eigen::VectorXd y = Y.col(static_cast<Eigen::Index>(i));
        const double ssr_p = least_squares(X, y).ssr;
        const double ssr_1 = least_squares(X.topRows(in1), y.head(in1)).ssr;
        const double ssr_2 = least_squares(X.bottomRows(in2), y.tail(in2)).ssr;
        const double ssr_u = ssr_1 + ssr_2;
        const double tss = (y.array() - y.mean()).square().sum();

        ChowEquation eq;
        eq.series = i < names.size() ? names[i] : "y" + std::to_string(i);
        eq.ssr_pooled = ssr_p;
        eq.ssr_split = ssr_u;
        // A pooled model that already fits exactly carries no evidence of a break.
        const double gain = std::max(ssr_p - ssr_u, 0.0);
        const bool exact = ssr_p <= 1e-20 * std::max(tss, 1.0);
        if (exact) {
            eq.f_statistic = 0.0;
        } else if (ssr_u > 0.0) {
            eq.f_statistic = (gain / df1) / (ssr_u / df2);
        } else {
            eq.f_statistic = std::numeric_limits<double>::infinity();
        }
        eq.p_value = f_sf(eq.f_statistic, df1, df2);
        if (!exact) {
            num += gain;
            den += ssr_u;
        }
        out.equations.push_back(eq);
    }
    out.df1 = static_cast<double>(m) * df1;
    out.df2 = static_cast<double>(m) * df2;
    if (num == 0.0) {
        out.f_statistic = 0.0;
    } else if (den > 0.0) {
        out.f_statistic = (num / out.df1) / (den / out.df2);
    } else {
        out.f_statistic = std::numeric_limits<double>::infinity();
    }
    out.p_value = f_sf(out.f_statistic, out.df1, out.df2);
    return out;
}

Cointegration engle_granger(std::span<const double> y, std::span<const double> x,
                            std::size_t max_lag) {
    if (y.size() != x.size())
        throw Error("stattests.bad_argument", "Engle-Granger inputs differ in length");
    const auto n = static_cast<Eigen::Index>(y.size());
    Eigen::MatrixXd X(n, 2);
    Eigen::VectorXd yy(n);
    for (Eigen::Index t = 0; t < n; ++t) {
        X(t, 0) = 1.0;
        X(t, 1) = x[static_cast<std::size_t>(t)];
        yy(t) = y[static_cast<std::size_t>(t)];
    }
    const auto reg = least_squares(X, yy);
    const Eigen::VectorXd resid = yy - X * reg.beta;
    std::vector<double> e(resid.begin(), resid.end());
    const auto adf = adf_test(e, Deterministic::None, max_lag);
    Cointegration c;
    c.statistic = adf.statistic;
    c.lags = adf.lags;
    // First-stage regression carries a constant; surface for two I(1) series.
    c.p_value = mackinnon_p_value(adf.statistic, Deterministic::Constant, 2);
    return c;
}

PairwiseResult pairwise_cointegration(const panel::PricePanel& panel, const std::string& commodity,
                                      const std::string& period, double significance,
                                      std::optional<std::size_t> max_lag, std::size_t threads) {
    const panel::Period& p = panel.period(period);
    std::vector<std::size_t> cols;
    for (std::size_t j = 0; j < panel.cols(); ++j)
        if (panel.series[j].commodity == commodity) cols.push_back(j);
    if (cols.size() < 2)
        throw Error("stattests.too_few_series",
                    "pairwise cointegration needs at least 2 series for " + commodity);
    std::sort(cols.begin(), cols.end(), [&](std::size_t a, std::size_t b) {
        return panel.series[a].region < panel.series[b].region;
    });

    PairwiseResult out;
    out.commodity = commodity;
    out.period = period;
    const std::size_t R = cols.size();
    for (auto c : cols) out.regions.push_back(panel.series[c].region);
    out.cointegrated = panel::Mask::Constant(static_cast<Eigen::Index>(R), static_cast<Eigen::Index>(R), false);
    const std::size_t lag = max_lag.value_or(default_max_lag(p.size()));

    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (std::size_t a = 0; a < R; ++a)
        for (std::size_t b = a + 1; b < R; ++b) pairs.emplace_back(a, b);
    out.pairs_examined = pairs.size();
    out.pairs.resize(pairs.size());
    std::vector<std::string> errors(pairs.size());

    auto column = [&](std::size_t c) {
        std::vector<double> v;
        for (auto t = p.begin; t < p.end; ++t) v.push_back(panel.values(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(c)));
        return v;
    };
    parallel_for(
        pairs.size(),
        [&](std::size_t k) {
            auto [a, b] = pairs[k];
            std::size_t dep = cols[a], reg = cols[b];
            if (panel.series[reg].label() < panel.series[dep].label()) std::swap(dep, reg);
            PairTest& t = out.pairs[k];
            t.dependent = panel.series[dep].label();
            t.regressor = panel.series[reg].label();
            try {
                const auto y = column(dep), x = column(reg);
                const auto c = engle_granger(y, x, lag);
                t.statistic = c.statistic;
                t.p_value = c.p_value;
                t.lags = c.lags;
                t.cointegrated = c.p_value < significance;
            } catch (const std::exception& e) {
                errors[k] = t.dependent + "~" + t.regressor + ": " + e.what();
            }
        },
        threads);
    std::string msg;
    for (const auto& e : errors)
        if (!e.empty()) msg += (msg.empty() ? "" : "; ") + e;
    if (!msg.empty()) throw Error("stattests.pair_failed", "Engle-Granger failed for " + msg);

    for (std::size_t k = 0; k < pairs.size(); ++k) {
        const auto [a, b] = pairs[k];
        const bool c = out.pairs[k].cointegrated;
        out.cointegrated(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = c;
        out.cointegrated(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(a)) = c;
        out.count += c ? 1 : 0;
    }
    return out;
}

}  // namespace svecm::stattests
