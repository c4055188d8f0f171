#pragma once

#include "svecm/panel.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace svecm::varnet {

/**
 * Tuning for the elastic-net VAR.
 *
 * The per-equation objective is the plain sum of squared residuals plus
 * lambda * [(1 - gamma) * ||b||_2^2 + gamma * ||b||_1] with no 1/(2n) factor.
 * With `standardize` the penalty acts on coefficients of z-scored predictors
 * (population standard deviation, so every predictor has x'x = n); the
 * intercept is never penalized.
 */
struct ElasticNetConfig {
    /// Explicit lambda grid; generated from the data when empty.
    std::vector<double> lambdas;
    std::size_t n_lambdas = 50;
    double lambda_min_ratio = 1e-4;
    std::vector<double> gammas{0.1, 0.5, 0.9};
    std::size_t cv_folds = 5;
    std::optional<std::size_t> cv_initial_window;
    std::optional<std::size_t> cv_step;
    double tolerance = 1e-7;
    std::size_t max_sweeps = 10000;
    bool penalize_intercept = false;
    bool standardize = true;
    std::size_t threads = 0;

    /// Throws Error("config.*") on violated invariants.
    void validate() const;
};

/// Response block Y_t (rows t = p..T-1) and lag block [Y_{t-1} ... Y_{t-p}].
struct Design {
    Eigen::MatrixXd response;
    Eigen::MatrixXd lagged;
};

Design build_design(const Eigen::MatrixXd& levels, std::size_t lags);

struct SolverOptions {
    double tolerance = 1e-7;
    std::size_t max_sweeps = 10000;
    bool standardize = true;
    /// Keep the objective value after every sweep (tests use it).
    bool record_objective = false;
};

/**
 * Centered and optionally scaled copy of a predictor block plus its Gram
 * matrix. Built once and shared by every equation regressed on the same
 * predictors.
 */
class StandardizedDesign {
public:
    StandardizedDesign(const Eigen::MatrixXd& predictors, bool standardize);

    [[nodiscard]] const Eigen::VectorXd& mean() const { return mean_; }
    [[nodiscard]] const Eigen::VectorXd& scale() const { return scale_; }
    [[nodiscard]] const Eigen::MatrixXd& gram() const { return gram_; }
    [[nodiscard]] const Eigen::MatrixXd& matrix() const { return z_; }
    [[nodiscard]] const std::vector<std::size_t>& constant_columns() const { return constant_; }
    [[nodiscard]] Eigen::Index rows() const { return z_.rows(); }
    [[nodiscard]] Eigen::Index cols() const { return z_.cols(); }

private:
    Eigen::MatrixXd z_;
    Eigen::VectorXd mean_;
    Eigen::VectorXd scale_;
    Eigen::MatrixXd gram_;
    std::vector<std::size_t> constant_;
};

struct EquationFit {
    double intercept = 0.0;
    /// Coefficients on the original predictor scale.
    Eigen::VectorXd coef;
    /// Coefficients on the internal (standardized) scale; warm-start state.
    Eigen::VectorXd scaled_coef;
    std::size_t sweeps = 0;
    bool converged = false;
    double objective = 0.0;
    /// Objective decrease over the final sweep.
    double last_gap = 0.0;
    std::vector<double> objective_trace;
};

/// Cyclic coordinate descent with soft-thresholding for one response.
EquationFit solve_equation(const StandardizedDesign& design, const Eigen::VectorXd& response,
                           double lambda, double gamma, const SolverOptions& options,
                           const Eigen::VectorXd* warm_start = nullptr);

/// Smallest lambda (gamma = 1) that zeroes every slope, maximized over responses.
double lambda_max(const StandardizedDesign& design, const Eigen::MatrixXd& responses);

/// `count` log-spaced values from lambda_max down to ratio * lambda_max.
std::vector<double> lambda_grid(double lambda_max, std::size_t count, double min_ratio);

struct CvEntry {
    double lambda = 0.0;
    double gamma = 0.0;
    double mean_score = 0.0;
    std::vector<double> fold_scores;
};

struct CvOutcome {
    double lambda = 0.0;
    double gamma = 0.0;
    std::vector<CvEntry> table;
    std::size_t initial_window = 0;
    std::size_t step = 0;
};

struct VarFit {
    std::size_t lags = 0;
    std::size_t dim = 0;
    Eigen::VectorXd intercept;
    /// phi[k] is the lag-(k+1) coefficient matrix.
    std::vector<Eigen::MatrixXd> phi;
    /// One row per usable time point t = p..T-1.
    Eigen::MatrixXd residuals;
    Eigen::MatrixXd sigma;
    double lambda = 0.0;
    double gamma = 0.0;
    std::vector<CvEntry> cv_table;
    std::vector<std::string> series;
    /// First p observations of the estimation sample; bootstrap replicates start here.
    Eigen::MatrixXd initial;
    std::vector<std::string> warnings;

    /// [c Phi_1 ... Phi_p], m x (mp + 1).
    [[nodiscard]] Eigen::MatrixXd theta() const;
    /// Deterministic one-step prediction c + sum_k Phi_k y_{t-k}; history rows are oldest first.
    [[nodiscard]] Eigen::VectorXd predict(const Eigen::MatrixXd& history) const;
};

/// Elastic-net VAR(p) at fixed (lambda, gamma). Equations are solved independently.
VarFit fit_var_fixed(const Eigen::MatrixXd& levels, std::size_t lags, double lambda, double gamma,
                     const SolverOptions& options = {}, std::size_t threads = 0);

/// Fits a single equation; identical to row `equation` of fit_var_fixed.
EquationFit fit_equation(const Eigen::MatrixXd& levels, std::size_t lags, std::size_t equation,
                         double lambda, double gamma, const SolverOptions& options = {});

/**
 * Rolling-origin cross-validation with an expanding window.
 *
 * Fold f (0-based) trains on design rows [0, w0 + f*h) and scores the mean
 * squared one-step-ahead error over rows [w0 + f*h, w0 + (f+1)*h). Defaults:
 * h = floor(n / (2K)), w0 = n - K*h. Ties in the mean score prefer larger
 * lambda, then larger gamma. Grid points that fail to converge score +inf.
 */
CvOutcome cross_validate(const Eigen::MatrixXd& levels, std::size_t lags,
                         const ElasticNetConfig& config);

/// Cross-validates when the grid holds more than one (lambda, gamma) pair, then fits.
VarFit fit_var(const Eigen::MatrixXd& levels, std::size_t lags, const ElasticNetConfig& config);
VarFit fit_var(const panel::PricePanel& panel, std::size_t lags, const ElasticNetConfig& config);

struct LagSelectionConfig {
    /// Light penalty: lambda = ratio * lambda_max(p), gamma below.
    double light_lambda_ratio = 1e-2;
    double light_gamma = 1.0;
    SolverOptions solver{};
    std::size_t threads = 0;
};

struct LagCriterion {
    std::size_t lags = 0;
    double log_det_sigma = 0.0;
    std::size_t nonzero = 0;
    double aic = 0.0;
};

struct LagSelection {
    std::size_t lags = 1;
    std::vector<LagCriterion> table;
};

/**
 * AIC = ln det Sigma(p) + 2 * nonzero(Theta(p)) / n over p = 1..max_p, where
 * every p is fit on the same n = T - max_p responses. Ties go to smaller p.
 */
LagSelection select_lag(const Eigen::MatrixXd& levels, std::size_t max_lags,
                        const LagSelectionConfig& config = {});

/// Companion-matrix spectral radius; < 1 means the VAR is stable.
double spectral_radius(const VarFit& fit);

}  // namespace svecm::varnet
