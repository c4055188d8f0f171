#include "svecm/app/synth.hpp"

#include "svecm/app/serialize.hpp"
#include "svecm/error.hpp"
#include "svecm/format.hpp"

#include <cmath>
#include <random>
#include <sstream>

namespace svecm::app {

namespace {

std::string region_name(std::size_t i, std::size_t count) {
    const std::size_t width = count >= 100 ? 3 : 2;
    std::string digits = std::to_string(i + 1);
    while (digits.size() < width) digits.insert(0, "0");
    return "R" + digits;
}

}  // namespace

SynthData generate(const SynthConfig& c) {
    if (c.commodities.empty() || c.regions == 0) throw Error("synth.invalid", "need at least one commodity and region");
    if (c.weeks < 20) throw Error("synth.invalid", "need at least 20 weeks");
    if (c.max_obs_per_week == 0) throw Error("synth.invalid", "max_obs_per_week must be positive");
    if (c.sparse_regions > c.regions) throw Error("synth.invalid", "more sparse regions than regions");
    const auto start = panel::parse_date(c.start);
    if (!start) throw Error("synth.invalid", "bad start date '" + c.start + "'");

    const auto C = c.commodities.size(), R = c.regions;
    const auto m = static_cast<Eigen::Index>(C * R);
    const auto T = static_cast<Eigen::Index>(c.weeks);
    const auto r = static_cast<Eigen::Index>(c.rank == 0 ? std::max<std::size_t>(1, C * R / 2) : c.rank);
    if (r > m) throw Error("synth.invalid", "rank exceeds the number of series");

    std::mt19937_64 rng(c.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);

    SynthData d;
    for (std::size_t i = 0; i < R; ++i) d.regions.push_back(region_name(i, R));

    Eigen::MatrixXd g(m, r);
    for (Eigen::Index i = 0; i < m; ++i)
        for (Eigen::Index k = 0; k < r; ++k) g(i, k) = normal(rng);
    const Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
    const Eigen::MatrixXd B = qr.householderQ() * Eigen::MatrixXd::Identity(m, r);
    d.pi = -c.alpha * B * B.transpose();

    d.gamma1 = Eigen::MatrixXd::Zero(m, m);
    for (Eigen::Index i = 0; i < m; ++i)
        for (Eigen::Index j = 0; j < m; ++j)
            if (unif(rng) < c.sparsity) d.gamma1(i, j) = (unif(rng) < 0.5 ? -1.0 : 1.0) * (0.1 + 0.2 * unif(rng));
    const double norm = d.gamma1.size() ? Eigen::JacobiSVD<Eigen::MatrixXd>(d.gamma1).singularValues()(0) : 0.0;
    if (norm > 0.4) d.gamma1 *= 0.4 / norm;

    // Typical real price levels by commodity block with regional offsets.
    Eigen::VectorXd mu(m);
    for (std::size_t k = 0; k < C; ++k)
        for (std::size_t j = 0; j < R; ++j)
            mu(static_cast<Eigen::Index>(k * R + j)) = std::log(12.0 + 8.0 * static_cast<double>(k)) + 0.1 * normal(rng);

    // Innovations share a common factor.
    Eigen::MatrixXd chol = Eigen::MatrixXd::Identity(m, m) * std::sqrt(0.6);
    Eigen::MatrixXd shock(m, 1);
    const Eigen::Index burn = 100;
    Eigen::MatrixXd y(T + burn, m);
    y.row(0) = mu.transpose();
    y.row(1) = mu.transpose();
    for (Eigen::Index t = 2; t < T + burn; ++t) {
        const double common = normal(rng);
        Eigen::VectorXd e(m);
        for (Eigen::Index i = 0; i < m; ++i) e(i) = c.noise * (std::sqrt(0.6) * normal(rng) + std::sqrt(0.4) * common);
        const Eigen::VectorXd prev = y.row(t - 1).transpose();
        const Eigen::VectorXd dprev = (y.row(t - 1) - y.row(t - 2)).transpose();
        y.row(t) = (prev + d.pi * (prev - mu) + d.gamma1 * dprev + e).transpose();
    }
    d.latent = y.bottomRows(T);

    // CPI: slow inflation with noise, one value per month touched by the sample.
    const panel::Date monday0 = panel::iso_week_monday(*start);
    const panel::Date last_day = monday0 + std::chrono::days{7 * (T - 1) + 6};
    const panel::Month first_month = std::chrono::year_month_day{monday0}.year() / std::chrono::year_month_day{monday0}.month();
    const panel::Month last_month = std::chrono::year_month_day{last_day}.year() / std::chrono::year_month_day{last_day}.month();
    d.cpi_base = first_month;
    double index = 100.0;
    for (panel::Month mo = first_month; mo <= last_month; mo += std::chrono::months{1}) {
        d.cpi[mo] = std::round(index * 100.0) / 100.0;
        index *= 1.0 + 0.002 + 0.001 * normal(rng);
    }

    std::uniform_int_distribution<std::size_t> count(1, c.max_obs_per_week);
    for (Eigen::Index t = 0; t < T; ++t) {
        const panel::Date monday = monday0 + std::chrono::days{7 * t};
        const bool edge = t == 0 || t == T - 1;
        for (std::size_t k = 0; k < C; ++k)
            for (std::size_t j = 0; j < R; ++j) {
                const double miss = j < c.sparse_regions ? 0.4 : c.missing_rate;
                if (!edge && unif(rng) < miss) continue;
                const auto col = static_cast<Eigen::Index>(k * R + j);
                const std::size_t n = count(rng);
                for (std::size_t o = 0; o < n; ++o) {
                    auto day = monday + std::chrono::days{static_cast<int>(unif(rng) * 7.0)};
                    if (day < *start) day = *start;
                    const std::chrono::year_month_day ymd{day};
                    const double deflator = d.cpi.at(ymd.year() / ymd.month()) / d.cpi.at(d.cpi_base);
                    double price = std::exp(d.latent(t, col) + 0.002 * normal(rng)) * deflator;
                    price = std::round(price * 1e4) / 1e4;
                    d.observations.push_back({day, d.regions[j], c.commodities[k], price, std::nullopt});
                }
            }
    }

    const std::size_t P = std::max<std::size_t>(1, c.periods);
    const std::size_t len = c.weeks / P;
    for (std::size_t k = 0; k < P; ++k) {
        const std::size_t a = k * len, b = k + 1 == P ? c.weeks - 1 : (k + 1) * len - 1;
        d.periods.push_back({P == 1 ? "All" : (k == 0 ? "Pre" : "Post" + std::to_string(k)),
                             monday0 + std::chrono::days{7 * static_cast<long>(a)},
                             monday0 + std::chrono::days{7 * static_cast<long>(b) + 6}});
    }
    return d;
}

void write_bundle(const SynthData& d, const SynthConfig& c, const std::filesystem::path& dir) {
    std::ostringstream prices;
    prices << "date,region,commodity,price\n";
    for (const auto& o : d.observations)
        prices << panel::format_date(o.date) << ',' << o.region << ',' << o.commodity << ',' << format_double(o.price) << '\n';
    write_text(dir / "prices.csv", prices.str());

    std::ostringstream cpi;
    cpi << "month,index\n";
    for (const auto& [mo, v] : d.cpi) cpi << panel::format_month(mo) << ',' << format_double(v) << '\n';
    write_text(dir / "cpi.csv", cpi.str());

    std::vector<std::string> periods;
    for (const auto& p : d.periods)
        periods.push_back(p.name + ":" + panel::format_date(p.first) + ":" + panel::format_date(p.last));
    std::ostringstream conf;
    conf << "# Generated synthetic bundle (seed " << c.seed << ")\n"
         << "prices = prices.csv\n"
         << "cpi = cpi.csv\n"
         << "cpi_base = " << panel::format_month(d.cpi_base) << "\n"
         << "commodities = ";
    for (std::size_t k = 0; k < c.commodities.size(); ++k) conf << (k ? "," : "") << c.commodities[k];
    conf << "\nperiods = ";
    for (std::size_t k = 0; k < periods.size(); ++k) conf << (k ? "," : "") << periods[k];
    conf << "\n";
    const auto hog = std::find(c.commodities.begin(), c.commodities.end(), "hog");
    const std::string focus = hog != c.commodities.end() ? "hog" : c.commodities.front();
    conf << "focus_commodity = " << focus << "\n";
    if (d.regions.size() > 3) {
        conf << "focus_regions = ";
        for (std::size_t j = 0; j < 3; ++j) conf << (j ? "," : "") << d.regions[c.sparse_regions + j < d.regions.size() ? c.sparse_regions + j : j];
        conf << "\n";
    }
    conf << "output = out\n";
    write_text(dir / "pipeline.conf", conf.str());

    Json truth{{"commodities", c.commodities}, {"regions", d.regions}, {"weeks", c.weeks}, {"seed", c.seed},
               {"pi", matrix_to_json(d.pi)}, {"gamma1", matrix_to_json(d.gamma1)}};
    write_text(dir / "truth.json", truth.dump(1) + "\n");
}

}  // namespace svecm::app
