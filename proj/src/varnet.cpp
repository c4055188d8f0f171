#include "svecm/varnet.hpp"

#include "svecm/error.hpp"
#include "svecm/format.hpp"
#include "svecm/parallel.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>

namespace svecm::varnet {

namespace {

double soft_threshold(double z, double t) {
    if (z > t) return z - t;
    if (z < -t) return z + t;
    return 0.0;
}

struct Objective {
    const StandardizedDesign& design;
    double yy;
    const Eigen::VectorXd& xty;
    double lambda;
    double gamma;

    double operator()(const Eigen::VectorXd& beta, const Eigen::VectorXd& gram_beta) const {
        const double fit = yy - 2.0 * xty.dot(beta) + beta.dot(gram_beta);
        const double pen = lambda * ((1.0 - gamma) * beta.squaredNorm() + gamma * beta.lpNorm<1>());
        return fit + pen;
    }
};

std::size_t count_nonzero(const Eigen::VectorXd& v) {
    return static_cast<std::size_t>((v.array() != 0.0).count());
}

}  // namespace

void ElasticNetConfig::validate() const {
    for (double l : lambdas)
        if (!(l >= 0.0) || !std::isfinite(l))
            throw Error("config.lambda", "lambda values must be finite and non-negative");
    for (std::size_t k = 1; k < lambdas.size(); ++k)
        if (!(lambdas[k] < lambdas[k - 1]))
            throw Error("config.lambda", "lambda grid must be strictly descending");
    if (gammas.empty()) throw Error("config.gamma", "gamma grid is empty");
    for (double g : gammas)
        if (!(g >= 0.0 && g <= 1.0)) throw Error("config.gamma", "gamma values must lie in [0, 1]");
    if (!(tolerance > 0.0)) throw Error("config.tolerance", "tolerance must be positive");
    if (max_sweeps == 0) throw Error("config.max_sweeps", "max_sweeps must be positive");
    if (penalize_intercept) throw Error("config.penalize_intercept", "the intercept is never penalized");
    if (lambdas.empty() && (n_lambdas == 0 || !(lambda_min_ratio > 0.0 && lambda_min_ratio < 1.0)))
        throw Error("config.lambda", "automatic grid needs n_lambdas > 0 and 0 < lambda_min_ratio < 1");
}

Design build_design(const Eigen::MatrixXd& levels, std::size_t lags) {
    const auto T = static_cast<std::size_t>(levels.rows());
    const auto m = levels.cols();
    if (lags < 1) throw Error("varnet.bad_lags", "lag order must be at least 1");
    if (T <= lags) throw Error("varnet.too_short", "series shorter than the lag order");
    const auto n = static_cast<Eigen::Index>(T - lags);
    const auto p = static_cast<Eigen::Index>(lags);
    Design d;
    d.response = levels.bottomRows(n);
    d.lagged.resize(n, m * p);
    for (Eigen::Index k = 1; k <= p; ++k) d.lagged.middleCols((k - 1) * m, m) = levels.middleRows(p - k, n);
    return d;
}

StandardizedDesign::StandardizedDesign(const Eigen::MatrixXd& predictors, bool standardize) {
    const auto n = predictors.rows();
    const auto P = predictors.cols();
    mean_ = predictors.colwise().mean().transpose();
    scale_ = Eigen::VectorXd::Ones(P);
    z_ = predictors.rowwise() - mean_.transpose();
    for (Eigen::Index j = 0; j < P; ++j) {
        const double sd = std::sqrt(z_.col(j).squaredNorm() / static_cast<double>(n));
        const bool constant = !(sd > 1e-13 * std::max(1.0, std::abs(mean_(j))));
        if (constant) {
            constant_.push_back(static_cast<std::size_t>(j));
            z_.col(j).setZero();
            continue;
        }
        if (standardize) {
            scale_(j) = sd;
            z_.col(j) /= sd;
        }
    }
    gram_ = z_.transpose() * z_;
}

EquationFit solve_equation(const StandardizedDesign& design, const Eigen::VectorXd& response,
                           double lambda, double gamma, const SolverOptions& options,
                           const Eigen::VectorXd* warm_start) {
    const Eigen::Index P = design.cols();
    const double ybar = response.mean();
    const Eigen::VectorXd yc = response.array() - ybar;
    const Eigen::VectorXd xty = design.matrix().transpose() * yc;
    const Eigen::MatrixXd& G = design.gram();
    const double threshold = 0.5 * lambda * gamma;
    const double ridge = lambda * (1.0 - gamma);

    Eigen::VectorXd beta = warm_start ? *warm_start : Eigen::VectorXd::Zero(P);
    for (auto j : design.constant_columns()) beta(static_cast<Eigen::Index>(j)) = 0.0;
    Eigen::VectorXd gb = G * beta;
    const Objective objective{design, yc.squaredNorm(), xty, lambda, gamma};

    std::vector<char> usable(static_cast<std::size_t>(P), 1);
    for (auto j : design.constant_columns()) usable[j] = 0;
    for (Eigen::Index j = 0; j < P; ++j)
        if (!(G(j, j) + ridge > 0.0)) usable[static_cast<std::size_t>(j)] = 0;

    auto update = [&](Eigen::Index j) {
        if (!usable[static_cast<std::size_t>(j)]) return 0.0;
        const double old = beta(j);
        const double z = xty(j) - gb(j) + G(j, j) * old;
        const double next = soft_threshold(z, threshold) / (G(j, j) + ridge);
        const double delta = next - old;
        if (delta != 0.0) {
            beta(j) = next;
            gb.noalias() += G.col(j) * delta;
        }
        return std::abs(delta);
    };

    EquationFit fit;
    double current = objective(beta, gb);
    if (options.record_objective) fit.objective_trace.push_back(current);
    auto after_sweep = [&] {
        ++fit.sweeps;
        const double next = objective(beta, gb);
        fit.last_gap = current - next;
        current = next;
        if (options.record_objective) fit.objective_trace.push_back(current);
    };

    // On a fixed support with fixed signs the optimum solves
    // (G_AA + ridge I) b = X'y_A - threshold * sign; it is accepted only when the signs
    // hold and the objective does not rise. Convergence is still judged by a full sweep.
    std::vector<Eigen::Index> active;
    auto newton = [&]() {
        std::vector<Eigen::Index> support;
        for (auto j : active)
            if (beta(j) != 0.0) support.push_back(j);
        Eigen::VectorXd point = beta;
        bool moved = false;
        while (!support.empty()) {
            const auto k = static_cast<Eigen::Index>(support.size());
            Eigen::MatrixXd A(k, k);
            Eigen::VectorXd rhs(k), sign(k);
            for (Eigen::Index a = 0; a < k; ++a) {
                for (Eigen::Index b = 0; b < k; ++b) A(a, b) = G(support[a], support[b]);
                A(a, a) += ridge;
                sign(a) = point(support[a]) > 0.0 ? 1.0 : -1.0;
                rhs(a) = xty(support[a]) - threshold * sign(a);
            }
            const Eigen::LDLT<Eigen::MatrixXd> ldlt(A);
            if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) break;
            const Eigen::VectorXd sol = ldlt.solve(rhs);
            if (!sol.allFinite()) break;
            // Walk toward the face optimum, stopping where the first coefficient reaches zero.
            double step = 1.0;
            Eigen::Index blocking = -1;
            for (Eigen::Index a = 0; a < k; ++a)
                if (!(sol(a) * sign(a) > 0.0)) {
                    const double b = point(support[a]);
                    const double t = b / (b - sol(a));
                    if (t < step) {
                        step = t;
                        blocking = a;
                    }
                }
            std::vector<Eigen::Index> kept;
            for (Eigen::Index a = 0; a < k; ++a) {
                const double b = point(support[a]);
                const double v = b + step * (sol(a) - b);
                if (a == blocking || !(v * sign(a) > 0.0)) {
                    point(support[a]) = 0.0;
                } else {
                    point(support[a]) = v;
                    kept.push_back(support[a]);
                }
            }
            moved = true;
            if (blocking < 0) break;
            support = std::move(kept);
        }
        if (!moved) return false;
        const Eigen::VectorXd g_point = G * point;
        if (!(objective(point, g_point) <= current)) return false;
        beta = point;
        gb = g_point;
        return true;
    };

    while (fit.sweeps < options.max_sweeps) {
        double max_delta = 0.0;
        for (Eigen::Index j = 0; j < P; ++j) max_delta = std::max(max_delta, update(j));
        after_sweep();
        if (max_delta < options.tolerance) {
            fit.converged = true;
            break;
        }
        active.clear();
        for (Eigen::Index j = 0; j < P; ++j)
            if (beta(j) != 0.0) active.push_back(j);
        if (newton()) continue;
        for (std::size_t inner = 1; fit.sweeps < options.max_sweeps; ++inner) {
            double d = 0.0;
            for (auto j : active) d = std::max(d, update(j));
            after_sweep();
            if (d < options.tolerance) break;
            if (inner % 50 == 0 && newton()) break;
        }
    }

    fit.scaled_coef = beta;
    fit.coef = beta.array() / design.scale().array();
    fit.intercept = ybar - design.mean().dot(fit.coef);
    fit.objective = current;
    return fit;
}

double lambda_max(const StandardizedDesign& design, const Eigen::MatrixXd& responses) {
    double best = 0.0;
    for (Eigen::Index i = 0; i < responses.cols(); ++i) {
        const Eigen::VectorXd yc = responses.col(i).array() - responses.col(i).mean();
        const Eigen::VectorXd xty = design.matrix().transpose() * yc;
        best = std::max(best, 2.0 * xty.lpNorm<Eigen::Infinity>());
    }
    return best;
}

std::vector<double> lambda_grid(double lmax, std::size_t count, double min_ratio) {
    std::vector<double> grid;
    if (count == 1) return {lmax};
    const double step = std::log(min_ratio) / static_cast<double>(count - 1);
    for (std::size_t k = 0; k < count; ++k) grid.push_back(lmax * std::exp(step * static_cast<double>(k)));
    grid.back() = lmax * min_ratio;
    return grid;
}

Eigen::MatrixXd VarFit::theta() const {
    const auto m = static_cast<Eigen::Index>(dim);
    Eigen::MatrixXd t(m, m * static_cast<Eigen::Index>(lags) + 1);
    t.col(0) = intercept;
    for (std::size_t k = 0; k < lags; ++k) t.middleCols(1 + static_cast<Eigen::Index>(k) * m, m) = phi[k];
    return t;
}

Eigen::VectorXd VarFit::predict(const Eigen::MatrixXd& history) const {
    const auto n = history.rows();
    Eigen::VectorXd y = intercept;
    for (std::size_t k = 1; k <= lags; ++k)
        y.noalias() += phi[k - 1] * history.row(n - static_cast<Eigen::Index>(k)).transpose();
    return y;
}

EquationFit fit_equation(const Eigen::MatrixXd& levels, std::size_t lags, std::size_t equation,
                         double lambda, double gamma, const SolverOptions& options) {
    const Design d = build_design(levels, lags);
    const StandardizedDesign sd(d.lagged, options.standardize);
    return solve_equation(sd, d.response.col(static_cast<Eigen::Index>(equation)), lambda, gamma, options);
}

VarFit fit_var_fixed(const Eigen::MatrixXd& levels, std::size_t lags, double lambda, double gamma,
                     const SolverOptions& options, std::size_t threads) {
    const Design d = build_design(levels, lags);
    const StandardizedDesign sd(d.lagged, options.standardize);
    const auto m = levels.cols();
    const auto n = d.response.rows();

    std::vector<EquationFit> eqs(static_cast<std::size_t>(m));
    parallel_for(
        static_cast<std::size_t>(m),
        [&](std::size_t i) {
            eqs[i] = solve_equation(sd, d.response.col(static_cast<Eigen::Index>(i)), lambda, gamma, options);
        },
        threads);

    std::size_t worst = 0;
    bool failed = false;
    for (std::size_t i = 0; i < eqs.size(); ++i)
        if (!eqs[i].converged && (!failed || std::abs(eqs[i].last_gap) > std::abs(eqs[worst].last_gap))) {
            worst = i;
            failed = true;
        }
    if (failed)
        throw Error("varnet.not_converged",
                    "coordinate descent did not converge within " + std::to_string(options.max_sweeps) +
                        " sweeps; worst equation " + std::to_string(worst) + " objective gap " +
                        format_double(eqs[worst].last_gap));

    VarFit fit;
    fit.lags = lags;
    fit.dim = static_cast<std::size_t>(m);
    fit.lambda = lambda;
    fit.gamma = gamma;
    fit.intercept.resize(m);
    fit.phi.assign(lags, Eigen::MatrixXd::Zero(m, m));
    for (Eigen::Index i = 0; i < m; ++i) {
        const auto& e = eqs[static_cast<std::size_t>(i)];
        fit.intercept(i) = e.intercept;
        for (std::size_t k = 0; k < lags; ++k)
            fit.phi[k].row(i) = e.coef.segment(static_cast<Eigen::Index>(k) * m, m).transpose();
    }
    Eigen::MatrixXd B(m, m * static_cast<Eigen::Index>(lags));
    for (std::size_t k = 0; k < lags; ++k) B.middleCols(static_cast<Eigen::Index>(k) * m, m) = fit.phi[k];
    fit.residuals = d.response - d.lagged * B.transpose();
    fit.residuals.rowwise() -= fit.intercept.transpose();
    fit.sigma = fit.residuals.transpose() * fit.residuals / static_cast<double>(n);
    fit.sigma = 0.5 * (fit.sigma + fit.sigma.transpose()).eval();
    fit.initial = levels.topRows(static_cast<Eigen::Index>(lags));
    for (auto j : sd.constant_columns())
        fit.warnings.push_back("constant predictor column " + std::to_string(j) + "; coefficient fixed at 0");
    return fit;
}

CvOutcome cross_validate(const Eigen::MatrixXd& levels, std::size_t lags, const ElasticNetConfig& config) {
    config.validate();
    const Design d = build_design(levels, lags);
    const auto n = static_cast<std::size_t>(d.response.rows());
    const auto m = d.response.cols();
    const std::size_t K = config.cv_folds;
    if (K < 3) throw Error("varnet.insufficient_folds", "cross-validation needs at least 3 folds");
    const std::size_t h = config.cv_step.value_or(n / (2 * K));
    if (h == 0 || K * h >= n)
        throw Error("varnet.insufficient_folds", "not enough observations for " + std::to_string(K) + " folds");
    const std::size_t w0 = config.cv_initial_window.value_or(n - K * h);
    if (w0 < 10 || w0 + K * h > n)
        throw Error("varnet.insufficient_folds",
                    "initial window " + std::to_string(w0) + " and step " + std::to_string(h) +
                        " do not leave " + std::to_string(K) + " folds in " + std::to_string(n) + " rows");

    std::vector<double> lambdas = config.lambdas;
    if (lambdas.empty()) {
        const StandardizedDesign full(d.lagged, config.standardize);
        const double lmax = lambda_max(full, d.response);
        if (!(lmax > 0.0)) throw Error("varnet.degenerate", "lambda_max is zero; responses are constant");
        lambdas = lambda_grid(lmax, config.n_lambdas, config.lambda_min_ratio);
    }
    const auto& gammas = config.gammas;
    const std::size_t L = lambdas.size(), Gn = gammas.size();
    const SolverOptions opts{config.tolerance, config.max_sweeps, config.standardize, false};

    // sse[((fold * Gn + g) * m + i) * L + l]; NaN marks non-convergence.
    std::vector<double> sse(K * Gn * static_cast<std::size_t>(m) * L, 0.0);
    std::vector<StandardizedDesign> designs;
    designs.reserve(K);
    for (std::size_t f = 0; f < K; ++f)
        designs.emplace_back(d.lagged.topRows(static_cast<Eigen::Index>(w0 + f * h)), config.standardize);

    const std::size_t tasks = K * Gn * static_cast<std::size_t>(m);
    parallel_for(
        tasks,
        [&](std::size_t task) {
            const std::size_t i = task % static_cast<std::size_t>(m);
            const std::size_t g = (task / static_cast<std::size_t>(m)) % Gn;
            const std::size_t f = task / (static_cast<std::size_t>(m) * Gn);
            const auto train = static_cast<Eigen::Index>(w0 + f * h);
            const auto test = static_cast<Eigen::Index>(h);
            const Eigen::VectorXd y = d.response.col(static_cast<Eigen::Index>(i)).head(train);
            const Eigen::VectorXd y_test = d.response.col(static_cast<Eigen::Index>(i)).segment(train, test);
            const Eigen::MatrixXd x_test = d.lagged.middleRows(train, test);
            Eigen::VectorXd warm = Eigen::VectorXd::Zero(d.lagged.cols());
            for (std::size_t l = 0; l < L; ++l) {
                const auto fit = solve_equation(designs[f], y, lambdas[l], gammas[g], opts, &warm);
                warm = fit.scaled_coef;
                const Eigen::VectorXd err = (y_test - x_test * fit.coef).array() - fit.intercept;
                sse[task * L + l] = fit.converged ? err.squaredNorm() : std::numeric_limits<double>::quiet_NaN();
            }
        },
        config.threads);

    CvOutcome out;
    out.initial_window = w0;
    out.step = h;
    const double denom = static_cast<double>(h) * static_cast<double>(m);
    for (std::size_t g = 0; g < Gn; ++g)
        for (std::size_t l = 0; l < L; ++l) {
            CvEntry e;
            e.lambda = lambdas[l];
            e.gamma = gammas[g];
            for (std::size_t f = 0; f < K; ++f) {
                double s = 0.0;
                for (Eigen::Index i = 0; i < m; ++i)
                    s += sse[((f * Gn + g) * static_cast<std::size_t>(m) + static_cast<std::size_t>(i)) * L + l];
                e.fold_scores.push_back(std::isnan(s) ? std::numeric_limits<double>::infinity() : s / denom);
            }
            double total = 0.0;
            for (double s : e.fold_scores) total += s;
            e.mean_score = total / static_cast<double>(K);
            out.table.push_back(std::move(e));
        }

    const CvEntry* best = nullptr;
    for (const auto& e : out.table) {
        if (!best || e.mean_score < best->mean_score ||
            (e.mean_score == best->mean_score &&
             (e.lambda > best->lambda || (e.lambda == best->lambda && e.gamma > best->gamma))))
            best = &e;
    }
    if (!std::isfinite(best->mean_score))
        throw Error("varnet.not_converged", "no grid point converged in every fold");
    out.lambda = best->lambda;
    out.gamma = best->gamma;
    return out;
}

VarFit fit_var(const Eigen::MatrixXd& levels, std::size_t lags, const ElasticNetConfig& config) {
    config.validate();
    if (static_cast<std::size_t>(levels.rows()) <= lags + 5)
        throw Error("varnet.too_short", "need T > p + 5 observations");
    if (!levels.allFinite()) throw Error("varnet.gaps", "panel must be gap-free (interpolate first)");
    const SolverOptions opts{config.tolerance, config.max_sweeps, config.standardize, false};
    double lambda = 0.0, gamma = config.gammas.front();
    std::vector<CvEntry> table;
    if (config.lambdas.size() == 1 && config.gammas.size() == 1) {
        lambda = config.lambdas.front();
    } else {
        auto cv = cross_validate(levels, lags, config);
        lambda = cv.lambda;
        gamma = cv.gamma;
        table = std::move(cv.table);
    }
    VarFit fit = fit_var_fixed(levels, lags, lambda, gamma, opts, config.threads);
    fit.cv_table = std::move(table);
    return fit;
}

VarFit fit_var(const panel::PricePanel& panel, std::size_t lags, const ElasticNetConfig& config) {
    VarFit fit = fit_var(panel.values, lags, config);
    fit.series = panel.labels();
    return fit;
}

LagSelection select_lag(const Eigen::MatrixXd& levels, std::size_t max_lags, const LagSelectionConfig& config) {
    if (max_lags < 1) throw Error("varnet.bad_lags", "max_p must be at least 1");
    const auto T = static_cast<std::size_t>(levels.rows());
    if (T <= max_lags + 20)
        throw Error("varnet.too_short", "lag selection needs T > max_p + 20");
    const auto m = levels.cols();
    const std::size_t n = T - max_lags;

    LagSelection out;
    for (std::size_t p = 1; p <= max_lags; ++p) {
        const Eigen::MatrixXd sample = levels.bottomRows(static_cast<Eigen::Index>(n + p));
        const Design d = build_design(sample, p);
        const StandardizedDesign sd(d.lagged, config.solver.standardize);
        const double lambda = config.light_lambda_ratio * lambda_max(sd, d.response);
        std::vector<EquationFit> eqs(static_cast<std::size_t>(m));
        parallel_for(
            static_cast<std::size_t>(m),
            [&](std::size_t i) {
                eqs[i] = solve_equation(sd, d.response.col(static_cast<Eigen::Index>(i)), lambda,
                                        config.light_gamma, config.solver);
            },
            config.threads);
        Eigen::MatrixXd resid(d.response.rows(), m);
        std::size_t nonzero = static_cast<std::size_t>(m);
        for (Eigen::Index i = 0; i < m; ++i) {
            const auto& e = eqs[static_cast<std::size_t>(i)];
            resid.col(i) = (d.response.col(i) - d.lagged * e.coef).array() - e.intercept;
            nonzero += count_nonzero(e.coef);
        }
        const Eigen::MatrixXd sigma = resid.transpose() * resid / static_cast<double>(n);
        Eigen::LLT<Eigen::MatrixXd> llt(sigma);
        if (llt.info() != Eigen::Success)
            throw Error("varnet.singular_covariance",
                        "residual covariance is singular at p = " + std::to_string(p));
        const double logdet = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
        LagCriterion c;
        c.lags = p;
        c.log_det_sigma = logdet;
        c.nonzero = nonzero;
        c.aic = logdet + 2.0 * static_cast<double>(nonzero) / static_cast<double>(n);
        out.table.push_back(c);
    }
    std::size_t best = 0;
    for (std::size_t k = 1; k < out.table.size(); ++k)
        if (out.table[k].aic < out.table[best].aic) best = k;
    out.lags = out.table[best].lags;
    return out;
}

double spectral_radius(const VarFit& fit) {
    const auto m = static_cast<Eigen::Index>(fit.dim);
    const auto p = static_cast<Eigen::Index>(fit.lags);
    Eigen::MatrixXd C = Eigen::MatrixXd::Zero(m * p, m * p);
    for (Eigen::Index k = 0; k < p; ++k) C.block(0, k * m, m, m) = fit.phi[static_cast<std::size_t>(k)];
    if (p > 1) C.block(m, 0, m * (p - 1), m * (p - 1)).setIdentity();
    Eigen::EigenSolver<Eigen::MatrixXd> es(C, false);
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

}  // namespace svecm::varnet
