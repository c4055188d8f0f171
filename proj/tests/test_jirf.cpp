#include "svecm/error.hpp"
#include "svecm/jirf.hpp"
#include "svecm/varnet.hpp"

#include "sim.hpp"

#include <doctest.h>

#include <nlohmann/json.hpp>

#include <cmath>
#include <numeric>

using namespace svecm::jirf;
using svecm::testing::gaussian;

namespace {

ShockScenario scenario(std::vector<std::size_t> idx, std::vector<double> s, std::size_t horizon = 8) {
    ShockScenario sc;
    sc.shocked = std::move(idx);
    for (auto i : sc.shocked) sc.labels.push_back("s" + std::to_string(i));
    sc.magnitudes = Eigen::Map<Eigen::VectorXd>(s.data(), static_cast<Eigen::Index>(s.size()));
    sc.source = MagnitudeSource::User;
    sc.horizon = horizon;
    return sc;
}

Eigen::MatrixXd random_spd(Eigen::Index m, std::uint64_t seed) {
    const Eigen::MatrixXd a = gaussian(m, m, seed);
    return a * a.transpose() + 0.5 * Eigen::MatrixXd::Identity(m, m);
}

std::vector<Eigen::MatrixXd> stable_var2(std::uint64_t seed) {
    return {0.35 * gaussian(3, 3, seed), 0.2 * gaussian(3, 3, seed + 1)};
}

// Unit-impulse simulation of the zero-intercept difference equation: column j of A_H.
std::vector<Eigen::MatrixXd> impulse_oracle(const std::vector<Eigen::MatrixXd>& phi, std::size_t H) {
    const auto m = phi.front().rows();
    std::vector<Eigen::MatrixXd> out(H + 1, Eigen::MatrixXd::Zero(m, m));
    for (Eigen::Index j = 0; j < m; ++j) {
        std::vector<Eigen::VectorXd> y(H + 1, Eigen::VectorXd::Zero(m));
        y[0](j) = 1.0;
        for (std::size_t t = 1; t <= H; ++t)
            for (std::size_t k = 1; k <= phi.size() && k <= t; ++k) y[t] += phi[k - 1] * y[t - k];
        for (std::size_t t = 0; t <= H; ++t) out[t].col(j) = y[t];
    }
    return out;
}

}  // namespace

TEST_CASE("VMA coefficients") {
    const auto v = to_vma({0.5 * Eigen::MatrixXd::Identity(3, 3)}, 12);
    REQUIRE(v.coefficients.size() == 13);
    CHECK(v.coefficients[0] == Eigen::MatrixXd::Identity(3, 3));
    for (std::size_t h = 0; h <= 12; ++h)
        CHECK((v.coefficients[h] - std::pow(0.5, static_cast<double>(h)) * Eigen::MatrixXd::Identity(3, 3))
                  .cwiseAbs()
                  .maxCoeff() <= 1e-15);
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const auto phi = stable_var2(seed * 7);
        const auto vma = to_vma(phi, 20);
        const auto oracle = impulse_oracle(phi, 20);
        CHECK(vma.coefficients[0] == Eigen::MatrixXd::Identity(3, 3));
        for (std::size_t h = 0; h <= 20; ++h) CHECK((vma.coefficients[h] - oracle[h]).cwiseAbs().maxCoeff() <= 1e-10);
    }
    CHECK(to_vma({Eigen::MatrixXd::Identity(2, 2)}, 0).coefficients.size() == 1);
}

TEST_CASE("JIRF examples") {
    Eigen::MatrixXd sigma(2, 2);
    sigma << 4, 1, 1, 9;
    const auto vma = to_vma({Eigen::MatrixXd::Zero(2, 2)}, 3);
    auto r = compute_jirf(vma, sigma, scenario({0}, {2.0}, 3));
    CHECK(r.responses(0, 0) == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(r.responses(0, 1) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(r.responses.rows() == 4);

    const auto half = to_vma({0.5 * Eigen::MatrixXd::Identity(2, 2)}, 10);
    auto g = compute_jirf(half, Eigen::MatrixXd::Identity(2, 2), scenario({0}, {1.0}, 10));
    for (Eigen::Index h = 0; h <= 10; ++h) {
        CHECK(g.responses(h, 0) == doctest::Approx(std::pow(0.5, static_cast<double>(h))).epsilon(1e-14));
        CHECK(g.responses(h, 1) == 0.0);
    }

    // Full selector: impact is s exactly, even for a singular covariance.
    const Eigen::Vector3d s(0.3, -0.2, 0.07);
    for (const Eigen::MatrixXd& sg : {random_spd(3, 5), Eigen::MatrixXd(Eigen::MatrixXd::Zero(3, 3))}) {
        auto f = compute_jirf(to_vma(stable_var2(9), 4), sg, scenario({0, 1, 2}, {0.3, -0.2, 0.07}, 4));
        CHECK(f.responses.row(0).transpose() == s);
    }
    // Shocked order does not need to follow the series order.
    auto f2 = compute_jirf(to_vma(stable_var2(9), 4), random_spd(3, 6), scenario({2, 0, 1}, {0.07, 0.3, -0.2}, 4));
    CHECK(f2.responses.row(0).transpose() == s);
}

TEST_CASE("single shock equals the generalized impulse response") {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const Eigen::MatrixXd sigma = random_spd(3, seed);
        const auto vma = to_vma(stable_var2(seed + 50), 8);
        const std::size_t j = seed % 3;
        const double s = 0.1 * static_cast<double>(seed);
        const auto r = compute_jirf(vma, sigma, scenario({j}, {s}));
        CHECK(r.responses(0, static_cast<Eigen::Index>(j)) == doctest::Approx(s).epsilon(1e-13));
        for (std::size_t h = 0; h <= 8; ++h) {
            const Eigen::VectorXd girf =
                vma.coefficients[h] * sigma.col(static_cast<Eigen::Index>(j)) / sigma(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(j)) * s;
            CHECK((r.responses.row(static_cast<Eigen::Index>(h)).transpose() - girf).cwiseAbs().maxCoeff() <= 1e-12);
        }
    }
}

TEST_CASE("linearity, decay and permutation") {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const Eigen::MatrixXd sigma = random_spd(3, seed + 10);
        const auto phi = stable_var2(seed + 30);
        const auto vma = to_vma(phi, 60);
        const auto a = compute_jirf(vma, sigma, scenario({0, 2}, {0.4, -0.1}, 60));
        const auto b = compute_jirf(vma, sigma, scenario({0, 2}, {-1.2, 0.3}, 60));
        CHECK((b.responses + 3.0 * a.responses).cwiseAbs().maxCoeff() <= 1e-12);

        // Companion spectral radius gives the envelope.
        Eigen::MatrixXd comp = Eigen::MatrixXd::Zero(6, 6);
        comp.topLeftCorner(3, 3) = phi[0];
        comp.topRightCorner(3, 3) = phi[1];
        comp.bottomLeftCorner(3, 3).setIdentity();
        const double rho = comp.eigenvalues().cwiseAbs().maxCoeff();
        if (rho < 0.95) {
            const double c = a.responses.topRows(10).cwiseAbs().maxCoeff() / std::pow(rho, 9.0) * 60.0;
            for (Eigen::Index h = 30; h <= 60; ++h)
                CHECK(a.responses.row(h).cwiseAbs().maxCoeff() <= c * std::pow(rho, static_cast<double>(h)));
            CHECK(a.responses.row(60).cwiseAbs().maxCoeff() < 1e-3 * a.responses.row(0).cwiseAbs().maxCoeff());
        }

        // Reverse the series order.
        Eigen::PermutationMatrix<3> P;
        P.indices() << 2, 1, 0;
        std::vector<Eigen::MatrixXd> pphi;
        for (const auto& f : phi) pphi.push_back(P * f * P.transpose());
        const auto pr = compute_jirf(to_vma(pphi, 60), P * sigma * P.transpose(), scenario({2, 0}, {0.4, -0.1}, 60));
        CHECK((pr.responses - a.responses * P.transpose()).cwiseAbs().maxCoeff() <= 1e-12);
    }
}

TEST_CASE("degenerate sub-covariance") {
    Eigen::MatrixXd sigma(3, 3);
    sigma << 1, 1, 0, 1, 1, 0, 0, 0, 2;
    const auto vma = to_vma({Eigen::MatrixXd::Zero(3, 3)}, 2);
    try {
        (void)compute_jirf(vma, sigma, scenario({0, 1}, {1.0, 1.0}, 2));
        FAIL("expected a degenerate sub-covariance error");
    } catch (const svecm::Error& e) {
        CHECK(e.code() == "scenario.degenerate");
        CHECK(std::string(e.what()).find("degenerate shock sub-covariance") != std::string::npos);
        CHECK(std::string(e.what()).find("s0") != std::string::npos);
    }
    CHECK_NOTHROW(compute_jirf(vma, sigma, scenario({0, 2}, {1.0, 1.0}, 2)));
    CHECK_THROWS_AS(compute_jirf(vma, sigma, scenario({0}, {1.0}, 5)), svecm::Error);
}

TEST_CASE("shock construction") {
    svecm::panel::PricePanel p;
    p.values.resize(4, 3);
    p.values << 1, 5, 0.1, 3, 5, 0.4, 10, 5, 0.2, 20, 5, 0.9;
    p.series = {{"hog", "A"}, {"hog", "B"}, {"pork", "A"}};
    p.periods = {{"Pre", 0, 2}, {"Post", 2, 4}};
    const auto labels = p.labels();

    ShockRequest req;
    req.series = {"hog.A", "hog.B"};
    req.period = "Pre";
    auto sc = build_shock(req, labels, &p, nullptr);
    CHECK(sc.magnitudes(0) == doctest::Approx(1.0));  // {1, 3}: mean 2, population sd 1
    CHECK(sc.magnitudes(1) == 0.0);
    CHECK(sc.warnings.size() == 1);
    CHECK(sc.shocked == std::vector<std::size_t>{0, 1});
    const Eigen::MatrixXd e = sc.selector(3);
    CHECK(e.rows() == 3);
    CHECK(e.cols() == 2);
    CHECK(e.colwise().sum() == Eigen::RowVector2d(1.0, 1.0));
    CHECK(e(0, 0) == 1.0);
    CHECK(e(1, 1) == 1.0);

    svecm::varnet::VarFit fit;
    fit.sigma = Eigen::Vector3d(4.0, 9.0, 0.25).asDiagonal();
    req.source = MagnitudeSource::ResidualStd;
    req.series = {"pork.A"};
    CHECK(build_shock(req, labels, nullptr, &fit).magnitudes(0) == doctest::Approx(0.5));

    req.source = MagnitudeSource::User;
    req.series = {"pork.A", "hog.A"};
    req.user_magnitudes = {0.1, 0.2};
    auto u = build_shock(req, labels, nullptr, nullptr);
    CHECK(u.shocked == std::vector<std::size_t>{2, 0});
    CHECK(u.magnitudes(1) == 0.2);

    auto code_of = [&](ShockRequest r) {
        try {
            (void)build_shock(r, labels, &p, &fit);
        } catch (const svecm::Error& e) {
            return e.code();
        }
        return std::string("none");
    };
    ShockRequest bad = req;
    bad.series = {};
    CHECK(code_of(bad) == "scenario.empty");
    bad.series = {"hog.Z"};
    bad.user_magnitudes = {1.0};
    CHECK(code_of(bad) == "scenario.unknown_series");
    bad.series = {"hog.A", "hog.A"};
    bad.user_magnitudes = {1.0, 1.0};
    CHECK(code_of(bad) == "scenario.duplicate_series");
    bad.series = {"hog.A"};
    CHECK(code_of(bad) == "scenario.magnitude_count");
    bad.source = MagnitudeSource::SeriesStd;
    bad.period = "Nope";
    CHECK(code_of(bad) == "panel.unknown_period");

    CHECK(magnitude_source_from_string(to_string(MagnitudeSource::ResidualStd)) == MagnitudeSource::ResidualStd);
    CHECK_THROWS_AS(magnitude_source_from_string("bogus"), svecm::Error);
    const Eigen::VectorXd sd = series_std(p.values, 2, 4);
    CHECK(sd(0) == doctest::Approx(5.0));
}

TEST_CASE("serialization") {
    Eigen::MatrixXd sigma(2, 2);
    sigma << 4, 1, 1, 9;
    auto r = compute_jirf(to_vma({0.5 * Eigen::MatrixXd::Identity(2, 2)}, 2), sigma, scenario({0}, {2.0}, 2));
    r.series = {"hog.A", "hog.B"};
    const auto j = nlohmann::json::parse(r.to_json());
    CHECK(j["horizons"].size() == 3);
    CHECK(j["responses"]["hog.B"][0].get<double>() == doctest::Approx(0.5));
    CHECK(j["scenario"]["source"] == "user");
    CHECK_FALSE(j.contains("bootstrap"));
    const auto csv = r.to_csv();
    CHECK(csv.rfind("horizon,hog.A,hog.B\n0,2,0.5\n", 0) == 0);
}
