#pragma once

#include "svecm/panel.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace svecm::stattests {

/// Deterministic terms of the Dickey-Fuller regression.
enum class Deterministic { None, Constant, ConstantTrend };

std::string to_string(Deterministic d);
Deterministic deterministic_from_string(const std::string& s);

struct AdfResult {
    double statistic = 0.0;
    std::size_t lags = 0;
    double p_value = 1.0;
    Deterministic spec = Deterministic::Constant;
    std::size_t nobs = 0;
};

/**
 * MacKinnon (1994) response-surface p-value for a Dickey-Fuller type statistic.
 *
 * `n_integrated` is the number of I(1) series in the underlying regression:
 * 1 for a plain ADF test, 2 for an Engle-Granger residual test on a pair.
 * Result is clamped to [0, 1].
 */
double mackinnon_p_value(double statistic, Deterministic spec, int n_integrated = 1);

/// Schwert rule 12*(n/100)^(1/4), used when no maximum lag is configured.
std::size_t default_max_lag(std::size_t n);

/**
 * Augmented Dickey-Fuller test of H0: unit root.
 *
 * Lags 0..max_lag are compared by AIC on a common sample; the chosen lag is
 * refit on all usable observations. Requires series.size() > max_lag + 10.
 */
AdfResult adf_test(std::span<const double> series, Deterministic spec, std::size_t max_lag);

struct PanelUnitRootResult {
    double statistic = 0.0;
    std::size_t df = 0;
    double p_value = 1.0;
    std::vector<std::string> series;
    std::vector<AdfResult> per_series;
};

/// Upper tail of the chi-square distribution.
double chi_square_sf(double x, double df);
/// Upper tail of the F distribution.
double f_sf(double x, double df1, double df2);

/// Maddala-Wu Fisher combination of per-series ADF p-values.
PanelUnitRootResult fisher_combine(const std::vector<AdfResult>& per_series,
                                   std::vector<std::string> names = {});

PanelUnitRootResult panel_unit_root(const panel::PricePanel& panel, Deterministic spec,
                                    std::optional<std::size_t> max_lag = std::nullopt,
                                    std::size_t threads = 0);

struct ChowEquation {
    std::string series;
    double f_statistic = 0.0;
    double p_value = 1.0;
    double ssr_pooled = 0.0;
    double ssr_split = 0.0;
};

/**
 * Known-date Chow test on the VAR-in-levels, equation by equation.
 *
 * Every equation regresses y_{t,i} on a constant and p lags of all m series.
 * Regime one is rows with t < break_index, regime two the rest (indices into
 * the supplied panel). The system statistic pools numerators and denominators
 * across equations with df1 = m*k and df2 = m*(n - 2k), k = m*p + 1.
 */
struct ChowResult {
    std::size_t break_index = 0;
    std::size_t lags = 0;
    double f_statistic = 0.0;
    double df1 = 0.0;
    double df2 = 0.0;
    double p_value = 1.0;
    std::vector<ChowEquation> equations;
};

ChowResult chow_test(const panel::PricePanel& panel, std::size_t break_index, std::size_t lags);
ChowResult chow_test(const Eigen::MatrixXd& levels, std::size_t break_index, std::size_t lags,
                     const std::vector<std::string>& names = {});

struct PairTest {
    std::string dependent;
    std::string regressor;
    double statistic = 0.0;
    double p_value = 1.0;
    std::size_t lags = 0;
    bool cointegrated = false;
};

struct Cointegration {
    double statistic = 0.0;
    double p_value = 1.0;
    std::size_t lags = 0;
};

/// Engle-Granger two-step test: OLS of y on [1, x], ADF (no deterministic terms) on residuals.
Cointegration engle_granger(std::span<const double> y, std::span<const double> x,
                            std::size_t max_lag);

struct PairwiseResult {
    std::string commodity;
    std::string period;
    std::vector<std::string> regions;
    /// R x R, symmetric, false diagonal.
    panel::Mask cointegrated;
    std::size_t count = 0;
    std::size_t pairs_examined = 0;
    std::vector<PairTest> pairs;
};

/// Every unordered region pair of one commodity within a period. The
/// lexicographically first series label is the dependent variable.
PairwiseResult pairwise_cointegration(const panel::PricePanel& panel, const std::string& commodity,
                                      const std::string& period, double significance = 0.05,
                                      std::optional<std::size_t> max_lag = std::nullopt,
                                      std::size_t threads = 0);

}  // namespace svecm::stattests
