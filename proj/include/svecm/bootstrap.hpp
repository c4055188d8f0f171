#pragma once

#include "svecm/jirf.hpp"
#include "svecm/panel.hpp"
#include "svecm/varnet.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

namespace svecm::bootstrap {

struct BootstrapSpec {
    std::size_t replicates = 500;
    std::uint64_t seed = 0;
    double confidence = 0.95;
    /// Recompute series-std / residual-std shock sizes on every replicate.
    bool recompute_shocks = true;
    /// Keep every replicate's response matrix (for the draw archive).
    bool keep_draws = false;
    /// Replicates are refit at the original (lambda, gamma) with these settings.
    varnet::SolverOptions solver{};
    /// Fraction of failed refits tolerated before the run is rejected.
    double max_drop_fraction = 0.10;
    std::size_t threads = 0;

    void validate() const;
};

/// Seed of replicate `index`, derived from the master seed only.
std::uint64_t replicate_seed(std::uint64_t master, std::size_t index);

/// Residuals minus their column means.
Eigen::MatrixXd centered_residuals(const varnet::VarFit& fit);

/**
 * Synthetic T x m sample: the first p rows copy the fit's initial values, then
 * Y*_t = c + sum_k Phi_k Y*_{t-k} + e*_t with e*_t a whole centered residual
 * row drawn with replacement.
 */
Eigen::MatrixXd resample_series(const varnet::VarFit& fit, std::uint64_t seed);

struct JirfDistribution {
    jirf::BootstrapLayer summary;
    std::vector<Eigen::MatrixXd> draws;
    std::vector<std::string> series;
    std::vector<std::string> warnings;

    /// Columnar archive `replicate,horizon,series,value`.
    [[nodiscard]] std::string draws_csv() const;
};

/**
 * Residual bootstrap of a JIRF scenario.
 *
 * `panel` is the estimation sample of `fit` (its rows align with the
 * synthetic samples) and supplies the period used by series-std shocks.
 * Replicate order fixes the reduction, so results do not depend on threads.
 */
JirfDistribution bootstrap_jirf(const varnet::VarFit& fit, const panel::PricePanel& panel,
                                const jirf::ShockScenario& scenario, const BootstrapSpec& spec);

/// Point JIRF with the bootstrap layer attached.
jirf::JirfResult with_bands(jirf::JirfResult point, const JirfDistribution& dist);

}  // namespace svecm::bootstrap
