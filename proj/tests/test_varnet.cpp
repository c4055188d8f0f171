#include "svecm/error.hpp"
#include "svecm/varnet.hpp"

#include "sim.hpp"

#include <doctest.h>

#include <cmath>

using namespace svecm::varnet;
using svecm::testing::gaussian;
using svecm::testing::simulate_var;

namespace {

Eigen::MatrixXd stable_var3(Eigen::Index T, std::uint64_t seed) {
    Eigen::MatrixXd phi(3, 3);
    phi << 0.5, 0.1, 0.0, -0.2, 0.4, 0.1, 0.0, 0.3, 0.3;
    return simulate_var({phi}, Eigen::Vector3d(1.0, -0.5, 2.0), Eigen::Matrix3d::Identity(), T, seed);
}

SolverOptions tight() {
    SolverOptions o;
    o.tolerance = 1e-12;
    o.max_sweeps = 100000;
    return o;
}

double soft(double z, double t) { return z > t ? z - t : (z < -t ? z + t : 0.0); }

// Population-sd z-scoring, matching the solver's convention.
Eigen::MatrixXd zscore(const Eigen::MatrixXd& x, Eigen::VectorXd& sd) {
    const Eigen::RowVectorXd mean = x.colwise().mean();
    Eigen::MatrixXd c = x.rowwise() - mean;
    sd = (c.colwise().squaredNorm() / static_cast<double>(x.rows())).array().sqrt().transpose();
    for (Eigen::Index j = 0; j < x.cols(); ++j) c.col(j) /= sd(j);
    return c;
}

ElasticNetConfig single(double lambda, double gamma) {
    ElasticNetConfig c;
    c.lambdas = {lambda};
    c.gammas = {gamma};
    c.tolerance = 1e-12;
    c.max_sweeps = 100000;
    return c;
}

}  // namespace

TEST_CASE("lambda = 0 reproduces OLS normal equations") {
    const Eigen::MatrixXd y = stable_var3(300, 3);
    for (std::size_t p : {1u, 2u}) {
        const auto fit = fit_var(y, p, single(0.0, 0.5));
        const Design d = build_design(y, p);
        Eigen::MatrixXd X(d.lagged.rows(), d.lagged.cols() + 1);
        X.col(0).setOnes();
        X.rightCols(d.lagged.cols()) = d.lagged;
        const Eigen::MatrixXd B = (X.transpose() * X).ldlt().solve(X.transpose() * d.response);
        const Eigen::MatrixXd theta = fit.theta();
        CHECK((theta - B.transpose()).cwiseAbs().maxCoeff() < 1e-6);
    }
}

TEST_CASE("full shrinkage above lambda_max") {
    const Eigen::MatrixXd y = stable_var3(200, 4);
    const Design d = build_design(y, 2);
    const StandardizedDesign sd(d.lagged, true);
    const double lmax = lambda_max(sd, d.response);
    const auto fit = fit_var(y, 2, single(10.0 * lmax, 1.0));
    for (const auto& phi : fit.phi) CHECK(phi.cwiseAbs().maxCoeff() == 0.0);
    for (Eigen::Index i = 0; i < 3; ++i) CHECK(fit.intercept(i) == doctest::Approx(d.response.col(i).mean()).epsilon(1e-14));

    // lambda_max is the exact boundary: just below it something enters.
    const auto edge = fit_var(y, 2, single(0.999 * lmax, 1.0));
    double biggest = 0.0;
    for (const auto& phi : edge.phi) biggest = std::max(biggest, phi.cwiseAbs().maxCoeff());
    CHECK(biggest > 0.0);
    const auto at = fit_var(y, 2, single(lmax, 1.0));
    for (const auto& phi : at.phi) CHECK(phi.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("univariate closed forms") {
    const Eigen::MatrixXd x = gaussian(120, 1, 8);
    const Eigen::VectorXd y = (2.0 + 0.7 * x.col(0).array()).matrix() + 0.5 * gaussian(120, 1, 9).col(0);
    Eigen::VectorXd sd;
    const Eigen::MatrixXd z = zscore(x, sd);
    const Eigen::VectorXd yc = y.array() - y.mean();
    const double zy = z.col(0).dot(yc), n = 120.0;
    const StandardizedDesign design(x, true);
    for (double lambda : {0.0, 1.0, 10.0, 50.0, 0.9 * 2.0 * std::abs(zy), 3.0 * std::abs(zy)}) {
        // gamma = 1: soft-threshold(z'y, lambda/2) / n on the standardized scale.
        auto lasso = solve_equation(design, y, lambda, 1.0, tight());
        CHECK(std::abs(lasso.coef(0) - soft(zy, lambda / 2.0) / n / sd(0)) < 1e-8);
        CHECK(std::abs(lasso.intercept - (y.mean() - x.col(0).mean() * lasso.coef(0))) < 1e-8);
        // gamma = 0: z'y / (n + lambda).
        auto ridge = solve_equation(design, y, lambda, 0.0, tight());
        CHECK(std::abs(ridge.coef(0) - zy / (n + lambda) / sd(0)) < 1e-8);
    }
    // Unstandardized path: soft-threshold(x'y, lambda/2) / x'x on centered x.
    const StandardizedDesign raw(x, false);
    const Eigen::VectorXd xc = x.col(0).array() - x.col(0).mean();
    auto f = solve_equation(raw, y, 7.0, 1.0, tight());
    CHECK(std::abs(f.coef(0) - soft(xc.dot(yc), 3.5) / xc.squaredNorm()) < 1e-8);
}

TEST_CASE("gamma = 0 is ridge on standardized predictors") {
    const Eigen::MatrixXd y = stable_var3(250, 5);
    const Design d = build_design(y, 2);
    Eigen::VectorXd sd;
    const Eigen::MatrixXd Z = zscore(d.lagged, sd);
    for (double lambda : {0.5, 5.0, 80.0}) {
        const auto fit = fit_var(y, 2, single(lambda, 0.0));
        const Eigen::MatrixXd theta = fit.theta();
        for (Eigen::Index i = 0; i < 3; ++i) {
            const Eigen::VectorXd yc = d.response.col(i).array() - d.response.col(i).mean();
            const Eigen::MatrixXd A = Z.transpose() * Z + lambda * Eigen::MatrixXd::Identity(6, 6);
            const Eigen::VectorXd b = A.ldlt().solve(Z.transpose() * yc).cwiseQuotient(sd);
            CHECK((theta.row(i).tail(6).transpose() - b).cwiseAbs().maxCoeff() < 1e-6);
        }
    }
}

TEST_CASE("objective is non-increasing across sweeps") {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const Eigen::MatrixXd y = stable_var3(150, 20 + seed);
        const Design d = build_design(y, 3);
        const StandardizedDesign sd(d.lagged, true);
        const double lmax = lambda_max(sd, d.response);
        SolverOptions o = tight();
        o.record_objective = true;
        for (double ratio : {0.5, 0.05, 0.001})
            for (double gamma : {0.1, 0.5, 0.9, 1.0}) {
                auto f = solve_equation(sd, d.response.col(static_cast<Eigen::Index>(seed % 3)), ratio * lmax, gamma, o);
                CHECK(f.converged);
                for (std::size_t k = 1; k < f.objective_trace.size(); ++k)
                    CHECK(f.objective_trace[k] <= f.objective_trace[k - 1] * (1.0 + 1e-13) + 1e-12);
            }
    }
}

TEST_CASE("rows are separable") {
    const Eigen::MatrixXd y = stable_var3(200, 31);
    SolverOptions o;
    const auto joint = fit_var_fixed(y, 2, 3.0, 0.5, o, 3);
    for (std::size_t i = 0; i < 3; ++i) {
        const auto alone = fit_equation(y, 2, i, 3.0, 0.5, o);
        const auto idx = static_cast<Eigen::Index>(i);
        CHECK(std::abs(alone.intercept - joint.intercept(idx)) <= 1e-10);
        for (std::size_t k = 0; k < 2; ++k)
            CHECK((alone.coef.segment(static_cast<Eigen::Index>(k) * 3, 3).transpose() - joint.phi[k].row(idx))
                      .cwiseAbs()
                      .maxCoeff() <= 1e-10);
    }
}

TEST_CASE("residual reconstruction and covariance") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const Eigen::MatrixXd y = stable_var3(180, 40 + seed);
        const auto fit = fit_var_fixed(y, 3, 2.0 * static_cast<double>(seed), 0.5);
        CHECK(fit.residuals.rows() == 177);
        CHECK(fit.theta().rows() == 3);
        CHECK(fit.theta().cols() == 10);
        double worst = 0.0;
        for (Eigen::Index t = 3; t < 180; ++t) {
            const Eigen::VectorXd r = y.row(t).transpose() - fit.predict(y.topRows(t));
            worst = std::max(worst, (r - fit.residuals.row(t - 3).transpose()).cwiseAbs().maxCoeff());
        }
        CHECK(worst <= 1e-10);
        CHECK((fit.sigma - fit.sigma.transpose()).cwiseAbs().maxCoeff() == 0.0);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(fit.sigma);
        CHECK(es.eigenvalues().minCoeff() >= -1e-10);
        CHECK((fit.initial - y.topRows(3)).cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("constant predictor is forced to zero with a warning") {
    Eigen::MatrixXd y = stable_var3(120, 50);
    y.col(1).setConstant(4.0);
    const auto fit = fit_var_fixed(y, 1, 0.1, 0.5);
    CHECK(fit.phi[0].col(1).cwiseAbs().maxCoeff() == 0.0);
    CHECK_FALSE(fit.warnings.empty());
}

TEST_CASE("configuration invariants") {
    ElasticNetConfig c;
    c.lambdas = {1.0, 2.0};
    CHECK_THROWS_AS(c.validate(), svecm::Error);
    c.lambdas = {2.0, -1.0};
    CHECK_THROWS_AS(c.validate(), svecm::Error);
    c = {};
    c.gammas = {1.5};
    CHECK_THROWS_AS(c.validate(), svecm::Error);
    c = {};
    c.tolerance = 0.0;
    CHECK_THROWS_AS(c.validate(), svecm::Error);
    c = {};
    c.penalize_intercept = true;
    CHECK_THROWS_AS(c.validate(), svecm::Error);
    CHECK_NOTHROW(ElasticNetConfig{}.validate());

    SolverOptions o;
    o.max_sweeps = 1;
    o.tolerance = 1e-15;
    try {
        (void)fit_var_fixed(stable_var3(100, 2), 2, 0.01, 0.5, o);
        FAIL("expected non-convergence");
    } catch (const svecm::Error& e) {
        CHECK(e.code() == "varnet.not_converged");
        CHECK(std::string(e.what()).find("objective gap") != std::string::npos);
    }
    CHECK_THROWS_AS(fit_var(stable_var3(8, 2), 3, single(1.0, 1.0)), svecm::Error);
}

TEST_CASE("lambda grid shape") {
    const auto g = lambda_grid(10.0, 50, 1e-4);
    REQUIRE(g.size() == 50);
    CHECK(g.front() == 10.0);
    CHECK(g.back() == doctest::Approx(1e-3));
    for (std::size_t k = 1; k < g.size(); ++k) {
        CHECK(g[k] < g[k - 1]);
        CHECK(std::log(g[k - 1] / g[k]) == doctest::Approx(std::log(1e4) / 49.0).epsilon(1e-9));
    }
}

TEST_CASE("cross-validation contracts") {
    const Eigen::MatrixXd y = stable_var3(160, 60);
    const auto fit = fit_var(y, 2, single(0.75, 0.3));
    CHECK(fit.lambda == 0.75);
    CHECK(fit.gamma == 0.3);

    ElasticNetConfig c;
    c.n_lambdas = 12;
    c.threads = 1;
    const auto a = cross_validate(y, 2, c);
    c.threads = 4;
    const auto b = cross_validate(y, 2, c);
    CHECK(a.lambda == b.lambda);
    CHECK(a.gamma == b.gamma);
    REQUIRE(a.table.size() == 36);
    REQUIRE(a.table.size() == b.table.size());
    for (std::size_t k = 0; k < a.table.size(); ++k) {
        CHECK(a.table[k].mean_score == b.table[k].mean_score);
        CHECK(a.table[k].fold_scores == b.table[k].fold_scores);
    }
    CHECK(a.initial_window + 5 * a.step == 158);
    // Chosen pair minimizes the mean score.
    for (const auto& e : a.table) {
        const bool chosen = e.lambda == a.lambda && e.gamma == a.gamma;
        if (chosen) {
            for (const auto& o : a.table) CHECK(o.mean_score >= e.mean_score);
        }
    }
    ElasticNetConfig bad;
    bad.cv_folds = 2;
    CHECK_THROWS_AS(cross_validate(y, 2, bad), svecm::Error);
}

TEST_CASE("cross-validated fit beats OLS on a sparse VAR") {
    // m = 10, one lag: 5 of 100 slopes nonzero.
    const Eigen::Index m = 10, T = 120, tail = 40;
    Eigen::MatrixXd phi = Eigen::MatrixXd::Zero(m, m);
    phi(0, 0) = 0.6;
    phi(1, 0) = 0.5;
    phi(3, 2) = -0.5;
    phi(5, 5) = 0.7;
    phi(8, 4) = 0.4;
    int wins = 0;
    for (std::uint64_t seed = 1; seed <= 30; ++seed) {
        const Eigen::MatrixXd y = simulate_var({phi}, Eigen::VectorXd::Zero(m), Eigen::MatrixXd::Identity(m, m), T + tail,
                                               100 + seed);
        const Eigen::MatrixXd train = y.topRows(T);
        ElasticNetConfig c;
        c.n_lambdas = 20;
        const auto cv = fit_var(train, 1, c);
        const auto ols = fit_var(train, 1, single(0.0, 1.0));
        double e_cv = 0.0, e_ols = 0.0;
        for (Eigen::Index t = T; t < T + tail; ++t) {
            const Eigen::MatrixXd hist = y.topRows(t);
            e_cv += (y.row(t).transpose() - cv.predict(hist)).squaredNorm();
            e_ols += (y.row(t).transpose() - ols.predict(hist)).squaredNorm();
        }
        wins += e_cv < e_ols ? 1 : 0;
    }
    CHECK(wins >= 24);
}

TEST_CASE("lag selection") {
    Eigen::MatrixXd phi1 = 0.3 * Eigen::MatrixXd::Identity(3, 3);
    Eigen::MatrixXd phi2 = 0.4 * Eigen::MatrixXd::Identity(3, 3);
    int twos = 0, ones = 0;
    for (std::uint64_t seed = 1; seed <= 50; ++seed) {
        const Eigen::MatrixXd y = simulate_var({phi1, phi2}, Eigen::Vector3d::Zero(), Eigen::Matrix3d::Identity(), 200,
                                               300 + seed);
        const auto s = select_lag(y, 4);
        CHECK(s.table.size() == 4);
        twos += s.lags == 2 ? 1 : 0;
        const auto w = select_lag(gaussian(200, 3, 700 + seed), 4);
        ones += w.lags == 1 ? 1 : 0;
    }
    CHECK(twos >= 40);
    CHECK(ones > 25);
    CHECK_THROWS_AS(select_lag(gaussian(200, 3, 1), 0), svecm::Error);
    CHECK_THROWS_AS(select_lag(gaussian(20, 3, 1), 2), svecm::Error);
}

TEST_CASE("spectral radius of a stable fit") {
    const auto fit = fit_var_fixed(stable_var3(400, 70), 1, 0.0, 1.0);
    CHECK(spectral_radius(fit) < 1.0);
    CHECK(spectral_radius(fit) > 0.2);
}
