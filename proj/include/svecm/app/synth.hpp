#pragma once

#include "svecm/panel.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace svecm::app {

/**
 * Synthetic weekly price system. Log real prices follow
 * dy_t = Pi (y_{t-1} - mu) + Gamma_1 dy_{t-1} + e_t with Pi = -alpha * B B'
 * for an orthonormal m x r matrix B, so r combinations mean-revert and m - r
 * directions are stochastic trends.
 */
struct SynthConfig {
    std::vector<std::string> commodities{"piglet", "hog", "pork"};
    std::size_t regions = 4;
    std::size_t weeks = 300;
    /// Cointegrating rank r; 0 picks m / 2.
    std::size_t rank = 0;
    double alpha = 0.15;
    /// Share of nonzero entries in Gamma_1.
    double sparsity = 0.05;
    double noise = 0.02;
    double missing_rate = 0.02;
    /// Leading regions whose cells go missing 40% of the time (exercises exclusion).
    std::size_t sparse_regions = 0;
    std::size_t max_obs_per_week = 3;
    std::string start = "2016-09-27";
    std::uint64_t seed = 1;
    /// Number of equal-length periods written into the generated config.
    std::size_t periods = 3;
};

struct SynthData {
    std::vector<panel::RawObservation> observations;
    std::map<panel::Month, double> cpi;
    panel::Month cpi_base;
    std::vector<std::string> regions;
    /// Weekly log real prices, commodity-major columns.
    Eigen::MatrixXd latent;
    Eigen::MatrixXd pi;
    Eigen::MatrixXd gamma1;
    std::vector<panel::PeriodDefinition> periods;
};

SynthData generate(const SynthConfig& config);

/// Writes prices.csv, cpi.csv, pipeline.conf and truth.json into `dir`.
void write_bundle(const SynthData& data, const SynthConfig& config, const std::filesystem::path& dir);

}  // namespace svecm::app
