#pragma once

#include "svecm/varnet.hpp"

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace svecm::vecm {

/// Error-correction form of a levels VAR: Pi = sum_k Phi_k - I, Gamma_i = -sum_{j>i} Phi_j.
struct VecmView {
    Eigen::MatrixXd pi;
    std::vector<Eigen::MatrixXd> gamma;
    Eigen::VectorXd intercept;
    std::vector<std::string> series;
};

VecmView to_vecm(const varnet::VarFit& fit);

/// Inverse map: Phi_1 = Pi + I + Gamma_1, Phi_i = Gamma_i - Gamma_{i-1}, Phi_p = -Gamma_{p-1}.
std::vector<Eigen::MatrixXd> to_levels(const VecmView& view);

struct EffectiveRankReport {
    Eigen::VectorXd singular_values;
    Eigen::VectorXd weights;
    double entropy = 0.0;
    double erank = 0.0;
    std::size_t dim = 0;
    std::string matrix_label;
    std::string period_label;
    /// erank > 1 + tol: more than a single dominant direction.
    bool above_one = false;
    /// erank < m - tol: evidence of rank reduction.
    bool below_full = false;
    double flag_tolerance = 0.5;
};

/**
 * Roy-Vetterli effective rank exp(-sum p_k ln p_k), p_k = sigma_k / ||sigma||_1.
 * Singular values below 1e-14 * sigma_1 count as exact zeros.
 */
EffectiveRankReport effective_rank(const Eigen::MatrixXd& matrix, double flag_tolerance = 0.5,
                                   std::string matrix_label = "Pi", std::string period_label = "");

struct RankRow {
    std::string period;
    std::string slice;  ///< "full" or a commodity name
    EffectiveRankReport report;
};

struct RankTable {
    std::vector<RankRow> rows;

    [[nodiscard]] std::string to_text() const;
    [[nodiscard]] std::string to_json() const;
};

struct RankInput {
    std::string period;
    std::string slice;
    const varnet::VarFit* fit = nullptr;
};

/// Effective rank of Pi for each supplied (period, slice) fit.
RankTable rank_report(const std::vector<RankInput>& inputs, double flag_tolerance = 0.5);

}  // namespace svecm::vecm
