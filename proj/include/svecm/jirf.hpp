#pragma once

#include "svecm/panel.hpp"
#include "svecm/varnet.hpp"

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

namespace svecm::jirf {

/// Moving-average coefficients A_0 = I, A_H = sum_{j=1..min(H,p)} Phi_j A_{H-j}.
/// The moving-average constant is not computed: responses are deviations from baseline.
struct VmaForm {
    std::vector<Eigen::MatrixXd> coefficients;
    std::size_t max_horizon = 0;
    std::vector<std::string> series;

    [[nodiscard]] std::size_t dim() const {
        return coefficients.empty() ? 0 : static_cast<std::size_t>(coefficients.front().rows());
    }
};

VmaForm to_vma(const varnet::VarFit& fit, std::size_t max_horizon);
VmaForm to_vma(const std::vector<Eigen::MatrixXd>& phi, std::size_t max_horizon);

enum class MagnitudeSource { SeriesStd, ResidualStd, User };

std::string to_string(MagnitudeSource s);
MagnitudeSource magnitude_source_from_string(const std::string& s);

struct ShockScenario {
    /// Column indices into the series index; distinct, order defines the selector columns.
    std::vector<std::size_t> shocked;
    std::vector<std::string> labels;
    Eigen::VectorXd magnitudes;
    MagnitudeSource source = MagnitudeSource::SeriesStd;
    std::string period;
    std::size_t horizon = 8;
    std::vector<std::string> warnings;

    /// m x |s| 0/1 selector.
    [[nodiscard]] Eigen::MatrixXd selector(std::size_t m) const;
};

/// Population standard deviation (divide by T) of each column over rows [begin, end).
Eigen::VectorXd series_std(const Eigen::MatrixXd& values, std::size_t begin, std::size_t end);

struct ShockRequest {
    std::vector<std::string> series;
    MagnitudeSource source = MagnitudeSource::SeriesStd;
    std::string period;
    std::vector<double> user_magnitudes;
    std::size_t horizon = 8;
};

/**
 * Resolves labels and magnitudes. SeriesStd needs `panel` with the named
 * period; ResidualStd uses sqrt(diag Sigma) of `fit`; User copies the values.
 * Zero-variance series get a zero shock and a warning.
 */
ShockScenario build_shock(const ShockRequest& request, const std::vector<std::string>& series_index,
                          const panel::PricePanel* panel, const varnet::VarFit* fit);

struct BootstrapLayer {
    Eigen::MatrixXd mean;
    Eigen::MatrixXd lower;
    Eigen::MatrixXd upper;
    Eigen::MatrixXd std_error;
    panel::Mask significant;
    std::size_t replicates = 0;
    std::size_t dropped = 0;
    double confidence = 0.95;
};

struct JirfResult {
    /// (H+1) x m: response of every series at every horizon.
    Eigen::MatrixXd responses;
    ShockScenario scenario;
    std::vector<std::string> series;
    std::optional<BootstrapLayer> bootstrap;

    [[nodiscard]] std::string to_json() const;
    [[nodiscard]] std::string to_csv() const;
};

/// Impact vector Sigma e (e' Sigma e)^{-1} s. When every series is shocked
/// this is s itself and no inversion is performed.
Eigen::VectorXd impact(const Eigen::MatrixXd& sigma, const ShockScenario& scenario);

/// JIRF(H) = A_H Sigma e (e' Sigma e)^{-1} s for H = 0..scenario.horizon.
JirfResult compute_jirf(const VmaForm& vma, const Eigen::MatrixXd& sigma, const ShockScenario& scenario);

}  // namespace svecm::jirf
