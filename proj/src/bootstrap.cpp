#include "svecm/bootstrap.hpp"

#include "svecm/error.hpp"
#include "svecm/format.hpp"
#include "svecm/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <random>
#include <sstream>

namespace svecm::bootstrap {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

// Linear interpolation between order statistics (Hyndman-Fan type 7).
double quantile(std::vector<double>& v, double q) {
    std::sort(v.begin(), v.end());
    const double pos = q * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, v.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return v[lo] + frac * (v[hi] - v[lo]);
}

}  // namespace

void BootstrapSpec::validate() const {
    if (replicates < 2) throw Error("config.replicates", "bootstrap needs at least 2 replicates");
    if (!(confidence > 0.0 && confidence < 1.0)) throw Error("config.confidence", "confidence must lie in (0, 1)");
    if (!(max_drop_fraction >= 0.0 && max_drop_fraction < 1.0))
        throw Error("config.drop_fraction", "drop fraction must lie in [0, 1)");
}

std::uint64_t replicate_seed(std::uint64_t master, std::size_t index) {
    return splitmix64(splitmix64(master) ^ static_cast<std::uint64_t>(index));
}

Eigen::MatrixXd centered_residuals(const varnet::VarFit& fit) {
    const Eigen::RowVectorXd mean = fit.residuals.colwise().mean();
    return fit.residuals.rowwise() - mean;
}

Eigen::MatrixXd resample_series(const varnet::VarFit& fit, std::uint64_t seed) {
    const auto p = static_cast<Eigen::Index>(fit.lags);
    const auto n = fit.residuals.rows();
    const auto m = static_cast<Eigen::Index>(fit.dim);
    if (fit.initial.rows() != p || fit.initial.cols() != m || n == 0)
        throw Error("bootstrap.malformed_fit", "fit lacks initial values or residuals");
    const Eigen::MatrixXd centered = centered_residuals(fit);

    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
    Eigen::MatrixXd y(p + n, m);
    y.topRows(p) = fit.initial;
    for (Eigen::Index t = p; t < p + n; ++t) {
        Eigen::VectorXd next = fit.intercept;
        for (Eigen::Index k = 1; k <= p; ++k) next.noalias() += fit.phi[static_cast<std::size_t>(k - 1)] * y.row(t - k).transpose();
        y.row(t) = next.transpose() + centered.row(pick(rng));
    }
    return y;
}

JirfDistribution bootstrap_jirf(const varnet::VarFit& fit, const panel::PricePanel& panel,
                                const jirf::ShockScenario& scenario, const BootstrapSpec& spec) {
    spec.validate();
    const auto T = static_cast<std::size_t>(fit.residuals.rows()) + fit.lags;
    if (scenario.source == jirf::MagnitudeSource::SeriesStd && panel.rows() != T)
        throw Error("bootstrap.panel_mismatch", "panel rows do not match the fit's estimation sample");
    for (auto j : scenario.shocked)
        if (j >= fit.dim) throw Error("scenario.unknown_series", "scenario references a series outside the fit");

    std::optional<panel::Period> period;
    if (scenario.source == jirf::MagnitudeSource::SeriesStd)
        period = scenario.period.empty() ? panel::Period{"all", 0, T} : panel.period(scenario.period);

    const std::size_t B = spec.replicates;
    std::vector<std::optional<Eigen::MatrixXd>> draws(B);
    std::vector<std::string> failures(B);
    parallel_for(
        B,
        [&](std::size_t b) {
            try {
                const Eigen::MatrixXd y = resample_series(fit, replicate_seed(spec.seed, b));
                const varnet::VarFit refit = varnet::fit_var_fixed(y, fit.lags, fit.lambda, fit.gamma, spec.solver, 1);
                jirf::ShockScenario sc = scenario;
                if (spec.recompute_shocks) {
                    for (std::size_t k = 0; k < sc.shocked.size(); ++k) {
                        const auto j = static_cast<Eigen::Index>(sc.shocked[k]);
                        if (sc.source == jirf::MagnitudeSource::SeriesStd)
                            sc.magnitudes(static_cast<Eigen::Index>(k)) = jirf::series_std(y.col(j), period->begin, period->end)(0);
                        else if (sc.source == jirf::MagnitudeSource::ResidualStd)
                            sc.magnitudes(static_cast<Eigen::Index>(k)) = std::sqrt(std::max(refit.sigma(j, j), 0.0));
                    }
                }
                const auto vma = jirf::to_vma(refit.phi, scenario.horizon);
                draws[b] = jirf::compute_jirf(vma, refit.sigma, sc).responses;
            } catch (const std::exception& e) {
                failures[b] = e.what();
            }
        },
        spec.threads);

    JirfDistribution out;
    out.series = fit.series;
    std::vector<const Eigen::MatrixXd*> ok;
    for (std::size_t b = 0; b < B; ++b) {
        if (draws[b]) {
            ok.push_back(&*draws[b]);
        } else {
            out.warnings.push_back("replicate " + std::to_string(b) + " dropped: " + failures[b]);
        }
    }
    const std::size_t dropped = B - ok.size();
    if (static_cast<double>(dropped) > spec.max_drop_fraction * static_cast<double>(B) || ok.size() < 2)
        throw Error("bootstrap.too_many_failures",
                    std::to_string(dropped) + " of " + std::to_string(B) + " replicates failed" +
                        (out.warnings.empty() ? std::string() : "; first: " + out.warnings.front()));

    const auto H = ok.front()->rows(), m = ok.front()->cols();
    auto& s = out.summary;
    s.replicates = ok.size();
    s.dropped = dropped;
    s.confidence = spec.confidence;
    s.mean = Eigen::MatrixXd::Zero(H, m);
    s.lower.resize(H, m);
    s.upper.resize(H, m);
    s.std_error.resize(H, m);
    s.significant.resize(H, m);
    const double alpha = 1.0 - spec.confidence;
    const double n = static_cast<double>(ok.size());
    std::vector<double> cell(ok.size());
    for (Eigen::Index h = 0; h < H; ++h)
        for (Eigen::Index j = 0; j < m; ++j) {
            double sum = 0.0;
            for (std::size_t b = 0; b < ok.size(); ++b) {
                cell[b] = (*ok[b])(h, j);
                sum += cell[b];
            }
            const double mean = sum / n;
            double ss = 0.0;
            for (double v : cell) ss += (v - mean) * (v - mean);
            s.mean(h, j) = mean;
            s.std_error(h, j) = std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
            s.lower(h, j) = quantile(cell, alpha / 2.0);
            s.upper(h, j) = quantile(cell, 1.0 - alpha / 2.0);
            s.significant(h, j) = s.lower(h, j) > 0.0 || s.upper(h, j) < 0.0;
        }
    if (spec.keep_draws)
        for (const auto* d : ok) out.draws.push_back(*d);
    return out;
}

std::string JirfDistribution::draws_csv() const {
    std::ostringstream out;
    out << "replicate,horizon,series,value\n";
    for (std::size_t b = 0; b < draws.size(); ++b)
        for (Eigen::Index h = 0; h < draws[b].rows(); ++h)
            for (Eigen::Index j = 0; j < draws[b].cols(); ++j)
                out << b << ',' << h << ','
                    << (static_cast<std::size_t>(j) < series.size() ? series[static_cast<std::size_t>(j)] : std::to_string(j))
                    << ',' << format_double(draws[b](h, j)) << '\n';
    return out.str();
}

jirf::JirfResult with_bands(jirf::JirfResult point, const JirfDistribution& dist) {
    point.bootstrap = dist.summary;
    return point;
}

}  // namespace svecm::bootstrap
