#include "svecm/error.hpp"
#include "svecm/vecm.hpp"

#include "sim.hpp"

#include <doctest.h>

#include <nlohmann/json.hpp>

#include <cmath>

using namespace svecm::vecm;
using svecm::testing::gaussian;
using svecm::testing::random_orthogonal;

namespace {

svecm::varnet::VarFit make_fit(std::vector<Eigen::MatrixXd> phi) {
    svecm::varnet::VarFit f;
    f.lags = phi.size();
    f.dim = static_cast<std::size_t>(phi.front().rows());
    f.phi = std::move(phi);
    f.intercept = Eigen::VectorXd::LinSpaced(static_cast<Eigen::Index>(f.dim), 0.1, 0.2);
    return f;
}

// Entropy-based rank computed directly from a singular-value vector.
double erank_oracle(const Eigen::VectorXd& s) {
    const double total = s.sum();
    double h = 0.0;
    for (double v : s)
        if (v > 0.0) h -= (v / total) * std::log(v / total);
    return std::exp(h);
}

}  // namespace

TEST_CASE("identity VAR has no error correction") {
    const auto v = to_vecm(make_fit({Eigen::MatrixXd::Identity(4, 4)}));
    CHECK(v.pi.cwiseAbs().maxCoeff() == 0.0);
    CHECK(v.gamma.empty());
}

TEST_CASE("VAR(2) hand example") {
    Eigen::MatrixXd p1(2, 2), p2(2, 2), pi(2, 2), g1(2, 2);
    p1 << 0.5, 0, 0, 0.5;
    p2 << 0.2, 0.1, 0, 0.2;
    pi << -0.3, 0.1, 0, -0.3;
    g1 << -0.2, -0.1, 0, -0.2;
    const auto fit = make_fit({p1, p2});
    const auto v = to_vecm(fit);
    CHECK((v.pi - pi).cwiseAbs().maxCoeff() <= 1e-15);
    REQUIRE(v.gamma.size() == 1);
    CHECK((v.gamma[0] - g1).cwiseAbs().maxCoeff() == 0.0);
    CHECK(v.intercept == fit.intercept);
    const auto back = to_levels(v);
    CHECK((back[0] - p1).cwiseAbs().maxCoeff() <= 1e-15);
    CHECK((back[1] - p2).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("VECM identities on random coefficients") {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const std::size_t p = 1 + seed % 4;
        std::vector<Eigen::MatrixXd> phi;
        for (std::size_t k = 0; k < p; ++k) phi.push_back(0.3 * gaussian(5, 5, seed * 10 + k));
        const auto v = to_vecm(make_fit(phi));
        Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(5, 5);
        for (const auto& f : phi) sum += f;
        CHECK((v.pi + Eigen::MatrixXd::Identity(5, 5) - sum).cwiseAbs().maxCoeff() <= 1e-12);
        REQUIRE(v.gamma.size() == p - 1);
        for (std::size_t i = 0; i + 1 < p; ++i) {
            Eigen::MatrixXd g = Eigen::MatrixXd::Zero(5, 5);
            for (std::size_t j = i + 1; j < p; ++j) g -= phi[j];
            CHECK((v.gamma[i] - g).cwiseAbs().maxCoeff() <= 1e-12);
        }
        const auto back = to_levels(v);
        for (std::size_t k = 0; k < p; ++k) CHECK((back[k] - phi[k]).cwiseAbs().maxCoeff() <= 1e-12);
    }
}

TEST_CASE("effective rank examples") {
    auto r = effective_rank(Eigen::MatrixXd::Identity(3, 3));
    CHECK(r.erank == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(r.entropy == doctest::Approx(std::log(3.0)).epsilon(1e-12));
    for (double w : r.weights) CHECK(w == doctest::Approx(1.0 / 3.0).epsilon(1e-12));

    const Eigen::VectorXd u = gaussian(6, 1, 1).col(0), w = gaussian(6, 1, 2).col(0);
    CHECK(effective_rank(u * w.transpose()).erank == doctest::Approx(1.0).epsilon(1e-12));

    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(3, 3);
    d(0, 0) = 1.0;
    d(1, 1) = 1.0;
    auto two = effective_rank(d);
    CHECK(two.erank == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(two.weights(0) == doctest::Approx(0.5));
    CHECK(two.weights(2) == 0.0);
    CHECK(two.above_one);
    CHECK(two.below_full);

    CHECK_THROWS_WITH_AS(effective_rank(Eigen::MatrixXd::Zero(4, 4)), "effective rank undefined for zero matrix",
                         svecm::Error);
}

TEST_CASE("effective rank of an 81-dimensional equal spectrum") {
    const Eigen::MatrixXd Q = random_orthogonal(81, 3), R = random_orthogonal(81, 4);
    const auto r = effective_rank(-0.2 * Q * R.transpose());
    CHECK(std::abs(r.erank - 81.0) < 1e-9);
    CHECK_FALSE(r.below_full);
    CHECK(r.dim == 81);
}

TEST_CASE("constructed spectrum with tiny tail") {
    for (int rank : {5, 40, 73}) {
        const Eigen::MatrixXd Q = random_orthogonal(81, 10 + static_cast<std::uint64_t>(rank));
        const Eigen::MatrixXd R = random_orthogonal(81, 20 + static_cast<std::uint64_t>(rank));
        Eigen::VectorXd s = Eigen::VectorXd::Constant(81, 1e-6);
        s.head(rank).setOnes();
        const auto r = effective_rank(Q * s.asDiagonal() * R.transpose());
        CHECK(std::abs(r.erank - rank) < 0.1);
        CHECK(r.erank == doctest::Approx(erank_oracle(s)).epsilon(1e-9));
        CHECK(r.below_full);
    }
}

TEST_CASE("effective rank invariances") {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const Eigen::MatrixXd A = gaussian(7, 7, seed);
        const auto base = effective_rank(A);
        CHECK(std::abs(base.weights.sum() - 1.0) <= 1e-12);
        CHECK(base.erank >= 1.0);
        CHECK(base.erank <= 7.0);
        for (int k = 1; k < 7; ++k) CHECK(base.singular_values(k) <= base.singular_values(k - 1));
        CHECK(std::abs(effective_rank(-3.5 * A).erank - base.erank) <= 1e-9);
        CHECK(std::abs(effective_rank(1e-8 * A).erank - base.erank) <= 1e-9);
        const Eigen::MatrixXd Q = random_orthogonal(7, seed + 100), R = random_orthogonal(7, seed + 200);
        CHECK(std::abs(effective_rank(Q * A * R).erank - base.erank) <= 1e-9);
        const Eigen::MatrixXd delta = gaussian(7, 7, seed + 300);
        CHECK(std::abs(effective_rank(A + 1e-10 * delta / delta.norm()).erank - base.erank) <= 1e-6);
    }
}

TEST_CASE("rank report") {
    Eigen::MatrixXd p1 = 0.9 * Eigen::MatrixXd::Identity(3, 3);
    p1(0, 1) = 0.05;
    const auto full = make_fit({p1});
    const auto sub = make_fit({Eigen::MatrixXd::Identity(2, 2) * 0.5});
    const auto t = rank_report({{"Pre", "full", &full}, {"Pre", "hog", &sub}, {"Post", "full", &full}});
    REQUIRE(t.rows.size() == 3);
    CHECK(t.rows[1].report.erank == doctest::Approx(2.0));
    CHECK(t.rows[0].report.period_label == "Pre");
    const auto text = t.to_text();
    CHECK(text.find("Slice") != std::string::npos);
    CHECK(text.find("Post") != std::string::npos);
    CHECK(text.find("(  2)") != std::string::npos);
    const auto j = nlohmann::json::parse(t.to_json());
    CHECK(j["ranks"].size() == 3);
    CHECK(j["ranks"][1]["slice"] == "hog");
    CHECK(j["ranks"][1]["dim"] == 2);
    CHECK_THROWS_AS(rank_report({{"Pre", "full", nullptr}}), svecm::Error);
}
