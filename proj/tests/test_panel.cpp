#include "svecm/error.hpp"
#include "svecm/panel.hpp"

#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

using namespace svecm::panel;

namespace {

Date d(const char* s) { return *parse_date(s); }

RawObservation obs(const char* date, const char* region, const char* commodity, double price) {
    return {d(date), region, commodity, price, std::nullopt};
}

PricePanel column_panel(std::vector<double> col) {
    PricePanel p;
    for (std::size_t t = 0; t < col.size(); ++t) p.stamps.push_back(d("2018-01-01") + std::chrono::days{7 * t});
    p.series = {{"hog", "A"}};
    p.commodity_order = {"hog"};
    p.region_order = {"A"};
    p.values.resize(static_cast<Eigen::Index>(col.size()), 1);
    p.missing.resize(static_cast<Eigen::Index>(col.size()), 1);
    for (std::size_t t = 0; t < col.size(); ++t) {
        p.values(static_cast<Eigen::Index>(t), 0) = col[t];
        p.missing(static_cast<Eigen::Index>(t), 0) = std::isnan(col[t]);
    }
    return p;
}

const double NaN = std::nan("");

}  // namespace

TEST_CASE("iso week bucketing uses the Monday") {
    CHECK(format_date(iso_week_monday(d("2016-09-27"))) == "2016-09-26");  // Tuesday
    CHECK(format_date(iso_week_monday(d("2016-10-02"))) == "2016-09-26");  // Sunday
    CHECK(format_date(iso_week_monday(d("2016-10-03"))) == "2016-10-03");  // Monday
    CHECK_FALSE(parse_date("2016-02-30").has_value());
    CHECK_FALSE(parse_date("2016/02/03").has_value());
}

TEST_CASE("aggregate averages same-week observations") {
    auto p = aggregate({obs("2018-01-02", "A", "hog", 10), obs("2018-01-04", "A", "hog", 20)});
    REQUIRE(p.rows() == 1);
    CHECK(p.values(0, 0) == 15.0);

    auto single = aggregate({obs("2018-01-02", "A", "hog", 12.5)});
    CHECK(single.values(0, 0) == 12.5);
}

TEST_CASE("aggregate three-week fixture marks empty cells missing") {
    // Weeks of 2018-01-01, 01-08, 01-15; B/hog has no observation in week 2.
    std::vector<RawObservation> raw{
        obs("2018-01-01", "B", "hog", 4), obs("2018-01-03", "A", "hog", 2), obs("2018-01-05", "A", "hog", 4),
        obs("2018-01-09", "A", "hog", 5), obs("2018-01-16", "A", "hog", 6), obs("2018-01-17", "B", "hog", 7),
        obs("2018-01-02", "A", "pork", 30), obs("2018-01-10", "A", "pork", 31), obs("2018-01-18", "A", "pork", 32),
        obs("2018-01-02", "B", "pork", 40), obs("2018-01-10", "B", "pork", 41), obs("2018-01-18", "B", "pork", 42),
    };
    auto p = aggregate(raw, {"pork", "hog"});
    REQUIRE(p.rows() == 3);
    REQUIRE(p.cols() == 4);
    // commodity-major in configured order, regions sorted
    CHECK(p.labels() == std::vector<std::string>{"pork.A", "pork.B", "hog.A", "hog.B"});
    CHECK(p.values(0, 2) == 3.0);
    CHECK(p.values(1, 2) == 5.0);
    CHECK(p.missing(1, 3));
    CHECK(std::isnan(p.values(1, 3)));
    CHECK_FALSE(p.missing(0, 3));
    CHECK(p.values(2, 3) == 7.0);
    CHECK(p.values(2, 1) == 42.0);
    // flattened index k*R + j
    CHECK(*p.find_series("hog.B") == 1 * 2 + 1);
}

TEST_CASE("aggregate errors") {
    CHECK_THROWS_WITH_AS(aggregate({}), "no observations", svecm::Error);
    std::istringstream bad("date,region,commodity,price\n2018-01-01,A,hog,3\n2018-13-01,A,hog,4\nnot-a-date,B,hog,5\n");
    try {
        (void)read_observations_csv(bad);
        FAIL("expected error");
    } catch (const svecm::Error& e) {
        CHECK(e.code() == "panel.unparseable_rows");
        CHECK(std::string(e.what()).find("row 3") != std::string::npos);
        CHECK(std::string(e.what()).find("row 4") != std::string::npos);
    }
    std::istringstream empty("date,region,commodity,price\n");
    CHECK_THROWS_WITH_AS(aggregate(read_observations_csv(empty)), "no observations", svecm::Error);
}

TEST_CASE("deflate") {
    auto p = aggregate({obs("2018-01-02", "A", "hog", 22), obs("2018-02-06", "A", "hog", 33)});
    std::map<Month, double> cpi{{*parse_month("2018-01"), 110}, {*parse_month("2018-02"), 100}};
    auto out = deflate(p, cpi, *parse_month("2018-02"));
    CHECK(out.values(0, 0) == doctest::Approx(20.0).epsilon(1e-15));

    // Constant CPI is the identity.
    std::map<Month, double> flat{{*parse_month("2018-01"), 100}, {*parse_month("2018-02"), 100}};
    auto same = deflate(p, flat, *parse_month("2018-01"));
    for (std::size_t t = 0; t < p.rows(); ++t)
        if (!p.missing(t, 0)) CHECK(same.values(t, 0) == p.values(t, 0));

    std::map<Month, double> partial{{*parse_month("2018-01"), 100}};
    CHECK_THROWS_WITH_AS(deflate(p, partial, *parse_month("2018-01")), doctest::Contains("2018-02"), svecm::Error);
}

TEST_CASE("deflate base January 2018 against hand computation") {
    // Stamps fall in Dec 2017, Jan 2018, Feb 2018. Hand values: 10*100/98, 11*100/100, 12*100/102.5.
    auto p = aggregate({obs("2017-12-26", "A", "hog", 10), obs("2018-01-02", "A", "hog", 11),
                        obs("2018-02-06", "A", "hog", 12)});
    std::map<Month, double> cpi{{*parse_month("2017-12"), 98},
                                {*parse_month("2018-01"), 100},
                                {*parse_month("2018-02"), 102.5}};
    auto out = deflate(p, cpi, *parse_month("2018-01"));
    CHECK(out.values(0, 0) == doctest::Approx(10.204081632653061).epsilon(1e-14));
    CHECK(out.values(1, 0) == doctest::Approx(11.0));
    CHECK(out.values(6, 0) == doctest::Approx(11.707317073170731).epsilon(1e-14));
}

TEST_CASE("interpolate") {
    auto a = interpolate(column_panel({1, NaN, 3}));
    CHECK(a.values(1, 0) == 2.0);
    auto b = interpolate(column_panel({NaN, 5, 7}));
    CHECK(b.values(0, 0) == 5.0);
    CHECK(b.values(2, 0) == 7.0);
    auto c = interpolate(column_panel({1, NaN, NaN, 4}));
    CHECK(c.values(1, 0) == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(c.values(2, 0) == doctest::Approx(3.0).epsilon(1e-15));
    CHECK(c.missing(1, 0));
    CHECK_THROWS_WITH_AS(interpolate(column_panel({NaN, 5, NaN})), doctest::Contains("hog.A"), svecm::Error);
}

TEST_CASE("interpolation is idempotent and preserves observed cells") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(1.0, 10.0);
    std::bernoulli_distribution gap(0.3);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> col(40);
        for (auto& v : col) v = gap(rng) ? NaN : u(rng);
        col[3] = 2.0;
        col[30] = 4.0;
        auto p = column_panel(col);
        auto once = interpolate(p);
        auto twice = interpolate(once);
        CHECK(once.values == twice.values);
        for (std::size_t t = 0; t < col.size(); ++t)
            if (!std::isnan(col[t])) CHECK(once.values(static_cast<Eigen::Index>(t), 0) == col[t]);
        CHECK(once.missing == p.missing);
    }
}

TEST_CASE("log transform") {
    auto p = log_transform(column_panel({1.0, std::exp(1.0)}));
    CHECK(p.values(0, 0) == 0.0);
    CHECK(p.values(1, 0) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(p.is_log());
    CHECK_THROWS_AS(log_transform(column_panel({1.0, 0.0})), svecm::Error);

    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.01, 1000.0);
    std::vector<double> col(200);
    for (auto& v : col) v = u(rng);
    auto lp = log_transform(column_panel(col));
    for (std::size_t t = 0; t < col.size(); ++t)
        CHECK(std::abs(std::exp(lp.values(static_cast<Eigen::Index>(t), 0)) - col[t]) <= 1e-12 * col[t]);
}

TEST_CASE("summaries") {
    auto c = tag_periods(column_panel({4, 4, 4, 4}), {{"Pre", d("2018-01-01"), d("2018-01-31")}});
    auto s = summarize(c, {"Pre"});
    REQUIRE(s.size() == 1);
    CHECK(s[0].mean == 4.0);
    CHECK(s[0].sd == 0.0);
    CHECK(s[0].min == 4.0);
    CHECK(s[0].median == 4.0);
    CHECK(s[0].max == 4.0);

    auto t = tag_periods(column_panel({1, 2, 3}), {{"Pre", d("2018-01-01"), d("2018-01-31")}});
    auto s2 = summarize(t, {"Pre"});
    CHECK(s2[0].median == 2.0);
    CHECK(s2[0].mean == 2.0);
    CHECK_THROWS_AS(summarize(t, {"Post9"}), svecm::Error);
}

TEST_CASE("summary missing percentage counts planted gaps") {
    std::vector<double> col(50, 3.0);
    for (int k : {1, 7, 13, 22, 40}) col[static_cast<std::size_t>(k)] = NaN;  // 5 of 50
    auto p = tag_periods(column_panel(col), {{"All", d("2018-01-01"), d("2019-12-31")}});
    auto s = summarize(p, {"All"});
    CHECK(s[0].missing_pct == 10.0);
    CHECK(s[0].observed == 45);
    CHECK(s[0].min <= s[0].median);
    CHECK(s[0].median <= s[0].max);
}

TEST_CASE("periods, exclusion and slicing") {
    std::vector<RawObservation> raw;
    for (int w = 0; w < 20; ++w) {
        const Date day = d("2018-01-01") + std::chrono::days{7 * w};
        for (const char* r : {"A", "B", "C"})
            for (const char* c : {"hog", "pork"}) {
                if (std::string(r) == "C" && std::string(c) == "pork" && w >= 12 && w < 16) continue;
                raw.push_back({day, r, c, 10.0 + w, std::nullopt});
            }
    }
    auto p = aggregate(raw, {"hog", "pork"});
    p = tag_periods(p, {{"Pre", d("2018-01-01"), d("2018-02-25")}, {"Post", d("2018-03-05"), d("2018-05-31")}});
    CHECK(p.period("Pre").begin == 0);
    CHECK(p.period("Pre").end == 8);
    CHECK(p.period("Post").begin == 9);
    // C.pork is 4/11 missing in Post -> region C dropped for both commodities
    auto kept = exclude_sparse_regions(p, 0.25);
    CHECK(kept.labels() == std::vector<std::string>{"hog.A", "hog.B", "pork.A", "pork.B"});
    CHECK(kept.region_order == std::vector<std::string>{"A", "B"});
    CHECK(kept.warnings.size() == 1);
    auto loose = exclude_sparse_regions(p, 0.5);
    CHECK(loose.cols() == 6);

    auto post = slice_period(kept, "Post");
    CHECK(post.rows() == 11);
    CHECK(post.period("Post").begin == 0);
    auto hog = select_commodity(kept, "hog");
    CHECK(hog.cols() == 2);

    CHECK_THROWS_AS(tag_periods(p, {{"X", d("2018-03-01"), d("2018-04-01")}, {"Y", d("2018-03-15"), d("2018-05-01")}}),
                    svecm::Error);
}

TEST_CASE("panel round-trips through CSV and sidecar") {
    std::vector<RawObservation> raw{obs("2018-01-01", "A", "hog", 1.25), obs("2018-01-15", "A", "hog", 2.5),
                                    obs("2018-01-08", "B", "hog", 0.1), obs("2018-01-15", "B", "hog", 0.3)};
    auto p = tag_periods(aggregate(raw), {{"Pre", d("2018-01-01"), d("2018-01-21")}});
    auto dir = std::filesystem::temp_directory_path() / "svecm_panel_rt";
    std::filesystem::create_directories(dir);
    save_panel(p, dir / "panel.csv", dir / "panel.json");
    auto q = load_panel(dir / "panel.csv", dir / "panel.json");
    CHECK(q.labels() == p.labels());
    CHECK(q.stamps == p.stamps);
    CHECK(q.missing == p.missing);
    for (Eigen::Index t = 0; t < p.values.rows(); ++t)
        for (Eigen::Index j = 0; j < p.values.cols(); ++j)
            if (!p.missing(t, j)) CHECK(q.values(t, j) == p.values(t, j));
    CHECK(q.period("Pre").end == 3);
    std::filesystem::remove_all(dir);
}
