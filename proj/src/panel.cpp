#include "svecm/panel.hpp"

#include "svecm/error.hpp"
#include "svecm/format.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

namespace svecm::panel {

namespace {

using std::chrono::day;
using std::chrono::days;
using std::chrono::month;
using std::chrono::year;

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
        s.remove_suffix(1);
    return s;
}

std::vector<std::string_view> split_csv(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        auto pos = line.find(',', start);
        out.push_back(trim(line.substr(start, pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

bool parse_int(std::string_view s, int& v) {
    if (s.empty()) return false;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    return ec == std::errc{} && p == s.data() + s.size();
}

bool parse_real(std::string_view s, double& v) {
    if (s.empty()) return false;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    return ec == std::errc{} && p == s.data() + s.size();
}

template <class T>
std::vector<std::string> label_list(const std::vector<T>& v) {
    std::vector<std::string> out;
    for (const auto& x : v) out.push_back(x.label());
    return out;
}

double median_of(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const auto n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

PricePanel select_columns(const PricePanel& panel, const std::vector<std::size_t>& cols) {
    PricePanel out = panel;
    out.series.clear();
    out.values.resize(panel.rows(), static_cast<Eigen::Index>(cols.size()));
    out.missing.resize(panel.rows(), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t k = 0; k < cols.size(); ++k) {
        out.series.push_back(panel.series[cols[k]]);
        out.values.col(k) = panel.values.col(cols[k]);
        out.missing.col(k) = panel.missing.col(cols[k]);
    }
    return out;
}

}  // namespace

std::optional<Date> parse_date(std::string_view text) {
    text = trim(text);
    if (text.size() != 10 || text[4] != '-' || text[7] != '-') return std::nullopt;
    int y = 0, m = 0, d = 0;
    if (!parse_int(text.substr(0, 4), y) || !parse_int(text.substr(5, 2), m) ||
        !parse_int(text.substr(8, 2), d))
        return std::nullopt;
    std::chrono::year_month_day ymd{year{y}, month{static_cast<unsigned>(m)},
                                    day{static_cast<unsigned>(d)}};
    if (!ymd.ok()) return std::nullopt;
    return Date{ymd};
}

std::optional<Month> parse_month(std::string_view text) {
    text = trim(text);
    if (text.size() != 7 || text[4] != '-') return std::nullopt;
    int y = 0, m = 0;
    if (!parse_int(text.substr(0, 4), y) || !parse_int(text.substr(5, 2), m)) return std::nullopt;
    Month ym{year{y}, month{static_cast<unsigned>(m)}};
    if (!ym.ok()) return std::nullopt;
    return ym;
}

std::string format_date(Date d) {
    std::chrono::year_month_day ymd{d};
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
    return buf;
}

std::string format_month(Month m) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u", static_cast<int>(m.year()),
                  static_cast<unsigned>(m.month()));
    return buf;
}

Date iso_week_monday(Date d) {
    const std::chrono::weekday wd{d};
    // iso_encoding: Monday = 1 ... Sunday = 7
    return d - days{wd.iso_encoding() - 1};
}

bool PricePanel::is_log() const {
    return std::find(transforms.begin(), transforms.end(), "log") != transforms.end();
}

std::vector<std::string> PricePanel::labels() const { return label_list(series); }

std::optional<std::size_t> PricePanel::find_series(std::string_view label) const {
    for (std::size_t j = 0; j < series.size(); ++j)
        if (series[j].label() == label) return j;
    return std::nullopt;
}

const Period& PricePanel::period(std::string_view name) const {
    for (const auto& p : periods)
        if (p.name == name) return p;
    throw Error("panel.unknown_period", "unknown period '" + std::string(name) + "'");
}

std::vector<RawObservation> read_observations_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw Error("panel.no_observations", "no observations");
    auto header = split_csv(line);
    if (header.size() < 4 || header[0] != "date" || header[1] != "region" ||
        header[2] != "commodity" || header[3] != "price")
        throw Error("panel.bad_header",
                    "expected header 'date,region,commodity,price', got '" + line + "'");
    const bool has_deflator = header.size() >= 5;

    std::vector<RawObservation> out;
    std::vector<std::string> bad;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (trim(line).empty()) continue;
        auto f = split_csv(line);
        RawObservation obs;
        std::optional<Date> date = f.size() >= 4 ? parse_date(f[0]) : std::nullopt;
        double price = 0.0;
        if (!date || f[1].empty() || f[2].empty()) {
            bad.push_back("row " + std::to_string(row) + ": '" + line + "'");
            continue;
        }
        if (!parse_real(f[3], price) || !(price > 0.0) || !std::isfinite(price)) {
            bad.push_back("row " + std::to_string(row) + ": bad price in '" + line + "'");
            continue;
        }
        obs.date = *date;
        obs.region = std::string(f[1]);
        obs.commodity = std::string(f[2]);
        obs.price = price;
        if (has_deflator && f.size() >= 5 && !f[4].empty()) obs.deflator_key = std::string(f[4]);
        out.push_back(std::move(obs));
    }
    if (!bad.empty()) {
        std::string msg = "unparseable rows:";
        for (const auto& b : bad) msg += "\n  " + b;
        throw Error("panel.unparseable_rows", msg);
    }
    return out;
}

std::vector<RawObservation> read_observations_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("io.open", "cannot open " + path.string());
    return read_observations_csv(in);
}

std::map<Month, double> read_cpi_csv(std::istream& in) {
    std::string line;
    std::getline(in, line);
    auto header = split_csv(line);
    if (header.size() < 2 || header[0] != "month" || header[1] != "index")
        throw Error("panel.bad_header", "expected CPI header 'month,index'");
    std::map<Month, double> cpi;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (trim(line).empty()) continue;
        auto f = split_csv(line);
        double v = 0.0;
        auto m = f.size() >= 2 ? parse_month(f[0]) : std::nullopt;
        if (!m || !parse_real(f[1], v))
            throw Error("panel.unparseable_rows", "bad CPI row " + std::to_string(row));
        cpi[*m] = v;
    }
    return cpi;
}

std::map<Month, double> read_cpi_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("io.open", "cannot open " + path.string());
    return read_cpi_csv(in);
}

PricePanel aggregate(const std::vector<RawObservation>& raw,
                     const std::vector<std::string>& commodity_order) {
    if (raw.empty()) throw Error("panel.no_observations", "no observations");

    std::set<std::string> regions;
    std::set<std::string> commodities;
    Date first = iso_week_monday(raw.front().date);
    Date last = first;
    for (const auto& o : raw) {
        regions.insert(o.region);
        commodities.insert(o.commodity);
        const Date w = iso_week_monday(o.date);
        first = std::min(first, w);
        last = std::max(last, w);
    }

    PricePanel panel;
    for (const auto& c : commodity_order)
        if (commodities.count(c) &&
            std::find(panel.commodity_order.begin(), panel.commodity_order.end(), c) ==
                panel.commodity_order.end())
            panel.commodity_order.push_back(c);
    for (const auto& c : commodities)
        if (std::find(panel.commodity_order.begin(), panel.commodity_order.end(), c) ==
            panel.commodity_order.end())
            panel.commodity_order.push_back(c);
    panel.region_order.assign(regions.begin(), regions.end());

    const std::size_t R = panel.region_order.size();
    std::map<std::string, std::size_t> commodity_index, region_index;
    for (std::size_t k = 0; k < panel.commodity_order.size(); ++k)
        commodity_index[panel.commodity_order[k]] = k;
    for (std::size_t j = 0; j < R; ++j) region_index[panel.region_order[j]] = j;
    for (const auto& c : panel.commodity_order)
        for (const auto& r : panel.region_order) panel.series.push_back({c, r});

    const auto T = static_cast<std::size_t>((last - first).count() / 7 + 1);
    for (std::size_t t = 0; t < T; ++t) panel.stamps.push_back(first + days{7 * t});

    const auto m = panel.series.size();
    Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(T, m);
    Eigen::MatrixXi count = Eigen::MatrixXi::Zero(T, m);
    for (const auto& o : raw) {
        const auto t = static_cast<Eigen::Index>((iso_week_monday(o.date) - first).count() / 7);
        const auto j = commodity_index[o.commodity] * R + region_index[o.region];
        sum(t, j) += o.price;
        count(t, j) += 1;
    }
    panel.values.resize(T, m);
    panel.missing.resize(T, m);
    for (Eigen::Index t = 0; t < panel.values.rows(); ++t)
        for (Eigen::Index j = 0; j < panel.values.cols(); ++j) {
            panel.missing(t, j) = count(t, j) == 0;
            panel.values(t, j) = count(t, j) == 0 ? kNaN : sum(t, j) / count(t, j);
        }
    panel.transforms.push_back("aggregate:iso-week-mean");
    return panel;
}

PricePanel deflate(const PricePanel& panel, const std::map<Month, double>& cpi, Month base) {
    auto base_it = cpi.find(base);
    if (base_it == cpi.end())
        throw Error("panel.cpi_missing_month", "CPI has no entry for base month " + format_month(base));
    if (!(base_it->second > 0.0))
        throw Error("panel.cpi_nonpositive", "CPI base value must be positive");
    PricePanel out = panel;
    for (std::size_t t = 0; t < panel.rows(); ++t) {
        const std::chrono::year_month_day ymd{panel.stamps[t]};
        const Month mon{ymd.year(), ymd.month()};
        auto it = cpi.find(mon);
        if (it == cpi.end())
            throw Error("panel.cpi_missing_month", "CPI has no entry for month " + format_month(mon));
        if (!(it->second > 0.0))
            throw Error("panel.cpi_nonpositive", "CPI value for " + format_month(mon) + " must be positive");
        out.values.row(static_cast<Eigen::Index>(t)) *= base_it->second / it->second;
    }
    out.transforms.push_back("deflate:base=" + format_month(base));
    return out;
}

PricePanel interpolate(const PricePanel& panel) {
    PricePanel out = panel;
    const auto T = static_cast<Eigen::Index>(panel.rows());
    for (Eigen::Index j = 0; j < out.values.cols(); ++j) {
        std::vector<Eigen::Index> obs;
        for (Eigen::Index t = 0; t < T; ++t)
            if (!std::isnan(out.values(t, j))) obs.push_back(t);
        if (obs.size() < 2)
            throw Error("panel.too_few_observations",
                        "series " + panel.series[j].label() +
                            " has fewer than 2 observations; cannot interpolate");
        for (Eigen::Index t = 0; t < obs.front(); ++t) out.values(t, j) = out.values(obs.front(), j);
        for (Eigen::Index t = obs.back() + 1; t < T; ++t) out.values(t, j) = out.values(obs.back(), j);
        for (std::size_t k = 0; k + 1 < obs.size(); ++k) {
            const auto a = obs[k], b = obs[k + 1];
            const double va = out.values(a, j), vb = out.values(b, j);
            for (auto t = a + 1; t < b; ++t)
                out.values(t, j) = va + (vb - va) * static_cast<double>(t - a) / static_cast<double>(b - a);
        }
    }
    if (std::find(out.transforms.begin(), out.transforms.end(), "interpolate:linear") ==
        out.transforms.end())
        out.transforms.push_back("interpolate:linear");
    return out;
}

PricePanel log_transform(const PricePanel& panel) {
    if (panel.is_log()) throw Error("panel.already_log", "panel is already log-transformed");
    PricePanel out = panel;
    for (Eigen::Index t = 0; t < out.values.rows(); ++t)
        for (Eigen::Index j = 0; j < out.values.cols(); ++j) {
            const double v = out.values(t, j);
            if (std::isnan(v)) continue;
            if (!(v > 0.0))
                throw Error("panel.nonpositive",
                            "non-positive value " + format_double(v) + " at (" +
                                format_date(panel.stamps[t]) + ", " + panel.series[j].label() + ")");
            out.values(t, j) = std::log(v);
        }
    out.transforms.push_back("log");
    return out;
}

PricePanel tag_periods(const PricePanel& panel, const std::vector<PeriodDefinition>& defs) {
    PricePanel out = panel;
    out.periods.clear();
    for (std::size_t k = 0; k < defs.size(); ++k) {
        const auto& d = defs[k];
        if (d.last < d.first)
            throw Error("config.period_order", "period " + d.name + " ends before it starts");
        if (k > 0 && !(defs[k - 1].last < d.first))
            throw Error("config.period_overlap",
                        "periods " + defs[k - 1].name + " and " + d.name + " overlap or are unordered");
        Period p{d.name, panel.rows(), panel.rows()};
        for (std::size_t t = 0; t < panel.rows(); ++t) {
            if (panel.stamps[t] >= d.first && p.begin == panel.rows()) p.begin = t;
            if (panel.stamps[t] <= d.last) p.end = t + 1;
        }
        if (p.begin >= p.end)
            throw Error("panel.empty_period", "period " + d.name + " contains no weeks");
        out.periods.push_back(p);
    }
    if (std::find(out.transforms.begin(), out.transforms.end(), "period-assignment:monday") ==
        out.transforms.end())
        out.transforms.push_back("period-assignment:monday");
    return out;
}

PricePanel exclude_sparse_regions(const PricePanel& panel, double max_missing_fraction) {
    std::vector<Period> ranges = panel.periods;
    if (ranges.empty()) ranges.push_back({"all", 0, panel.rows()});
    std::set<std::string> dropped;
    for (std::size_t j = 0; j < panel.cols(); ++j)
        for (const auto& p : ranges) {
            std::size_t miss = 0;
            for (auto t = p.begin; t < p.end; ++t) miss += panel.missing(t, j) ? 1 : 0;
            if (static_cast<double>(miss) > max_missing_fraction * static_cast<double>(p.size()))
                dropped.insert(panel.series[j].region);
        }
    if (dropped.empty()) return panel;
    std::vector<std::size_t> keep;
    for (std::size_t j = 0; j < panel.cols(); ++j)
        if (!dropped.count(panel.series[j].region)) keep.push_back(j);
    PricePanel out = select_columns(panel, keep);
    std::erase_if(out.region_order, [&](const std::string& r) { return dropped.count(r) > 0; });
    for (const auto& r : dropped)
        out.warnings.push_back("dropped region " + r + ": exceeds " +
                               format_double(100.0 * max_missing_fraction) + "% missing in a period");
    return out;
}

PricePanel slice_period(const PricePanel& panel, std::string_view name) {
    const Period p = panel.period(name);
    PricePanel out = panel;
    const auto n = static_cast<Eigen::Index>(p.size());
    out.stamps.assign(panel.stamps.begin() + p.begin, panel.stamps.begin() + p.end);
    out.values = panel.values.middleRows(p.begin, n);
    out.missing = panel.missing.middleRows(p.begin, n);
    out.periods = {Period{p.name, 0, p.size()}};
    return out;
}

PricePanel select_commodity(const PricePanel& panel, std::string_view commodity) {
    std::vector<std::size_t> cols;
    for (std::size_t j = 0; j < panel.cols(); ++j)
        if (panel.series[j].commodity == commodity) cols.push_back(j);
    if (cols.empty())
        throw Error("panel.unknown_commodity", "no series for commodity '" + std::string(commodity) + "'");
    PricePanel out = select_columns(panel, cols);
    out.commodity_order = {std::string(commodity)};
    return out;
}

std::vector<PeriodSummary> summarize(const PricePanel& panel,
                                     const std::vector<std::string>& period_names) {
    if (panel.is_log())
        throw Error("panel.log_scale", "summaries are computed on level-scale prices");
    std::vector<PeriodSummary> out;
    for (const auto& commodity : panel.commodity_order) {
        for (const auto& name : period_names) {
            const Period& p = panel.period(name);
            std::vector<double> vals;
            std::size_t cells = 0, miss = 0;
            for (std::size_t j = 0; j < panel.cols(); ++j) {
                if (panel.series[j].commodity != commodity) continue;
                for (auto t = p.begin; t < p.end; ++t) {
                    ++cells;
                    if (panel.missing(t, j)) {
                        ++miss;
                        continue;
                    }
                    vals.push_back(panel.values(t, j));
                }
            }
            PeriodSummary s;
            s.commodity = commodity;
            s.period = name;
            s.observed = vals.size();
            s.missing_pct = cells == 0 ? 0.0 : 100.0 * static_cast<double>(miss) / static_cast<double>(cells);
            if (!vals.empty()) {
                const double n = static_cast<double>(vals.size());
                s.mean = std::accumulate(vals.begin(), vals.end(), 0.0) / n;
                double ss = 0.0;
                for (double v : vals) ss += (v - s.mean) * (v - s.mean);
                s.sd = vals.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
                s.min = *std::min_element(vals.begin(), vals.end());
                s.max = *std::max_element(vals.begin(), vals.end());
                s.median = median_of(vals);
            } else {
                s.mean = s.sd = s.min = s.median = s.max = kNaN;
            }
            out.push_back(s);
        }
    }
    return out;
}

void write_panel_csv(const PricePanel& panel, std::ostream& out) {
    out << "date";
    for (const auto& s : panel.series) out << ',' << s.label();
    out << '\n';
    for (std::size_t t = 0; t < panel.rows(); ++t) {
        out << format_date(panel.stamps[t]);
        for (std::size_t j = 0; j < panel.cols(); ++j) {
            out << ',';
            const double v = panel.values(t, j);
            if (!std::isnan(v)) out << format_double(v);
        }
        out << '\n';
    }
}

std::string panel_sidecar_json(const PricePanel& panel) {
    nlohmann::ordered_json j;
    j["rows"] = panel.rows();
    j["cols"] = panel.cols();
    j["commodities"] = panel.commodity_order;
    j["regions"] = panel.region_order;
    j["series"] = panel.labels();
    j["transforms"] = panel.transforms;
    j["warnings"] = panel.warnings;
    auto periods = nlohmann::ordered_json::array();
    for (const auto& p : panel.periods)
        periods.push_back({{"name", p.name},
                           {"begin", p.begin},
                           {"end", p.end},
                           {"first", format_date(panel.stamps[p.begin])},
                           {"last", format_date(panel.stamps[p.end - 1])}});
    j["periods"] = periods;
    // Sparse mask: per series, the row indices that were originally missing.
    auto mask = nlohmann::ordered_json::object();
    for (std::size_t c = 0; c < panel.cols(); ++c) {
        std::vector<std::size_t> rows;
        for (std::size_t t = 0; t < panel.rows(); ++t)
            if (panel.missing(t, c)) rows.push_back(t);
        mask[panel.series[c].label()] = rows;
    }
    j["missing"] = mask;
    return j.dump(2);
}

void save_panel(const PricePanel& panel, const std::filesystem::path& csv_path,
                const std::filesystem::path& sidecar_path) {
    {
        std::ofstream out(csv_path);
        if (!out) throw Error("io.open", "cannot write " + csv_path.string());
        write_panel_csv(panel, out);
    }
    std::ofstream side(sidecar_path);
    if (!side) throw Error("io.open", "cannot write " + sidecar_path.string());
    side << panel_sidecar_json(panel) << '\n';
}

PricePanel load_panel(const std::filesystem::path& csv_path,
                      const std::filesystem::path& sidecar_path) {
    std::ifstream side(sidecar_path);
    if (!side) throw Error("io.open", "cannot open " + sidecar_path.string());
    const auto j = nlohmann::json::parse(side);
    std::ifstream in(csv_path);
    if (!in) throw Error("io.open", "cannot open " + csv_path.string());

    PricePanel panel;
    panel.commodity_order = j.at("commodities").get<std::vector<std::string>>();
    panel.region_order = j.at("regions").get<std::vector<std::string>>();
    panel.transforms = j.at("transforms").get<std::vector<std::string>>();
    panel.warnings = j.at("warnings").get<std::vector<std::string>>();

    std::string line;
    std::getline(in, line);
    auto header = split_csv(line);
    for (std::size_t k = 1; k < header.size(); ++k) {
        const auto dot = header[k].find('.');
        if (dot == std::string_view::npos)
            throw Error("panel.bad_header", "series column without '.': " + std::string(header[k]));
        panel.series.push_back({std::string(header[k].substr(0, dot)), std::string(header[k].substr(dot + 1))});
    }
    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        auto f = split_csv(line);
        auto d = parse_date(f[0]);
        if (!d || f.size() != header.size())
            throw Error("panel.unparseable_rows", "bad panel row: " + line);
        panel.stamps.push_back(*d);
        std::vector<double> r;
        for (std::size_t k = 1; k < f.size(); ++k) {
            double v = kNaN;
            if (!f[k].empty() && !parse_real(f[k], v))
                throw Error("panel.unparseable_rows", "bad value in row: " + line);
            r.push_back(v);
        }
        rows.push_back(std::move(r));
    }
    const auto T = rows.size(), m = panel.series.size();
    panel.values.resize(T, m);
    panel.missing = Mask::Constant(T, m, false);
    for (std::size_t t = 0; t < T; ++t)
        for (std::size_t c = 0; c < m; ++c) panel.values(t, c) = rows[t][c];
    for (std::size_t c = 0; c < m; ++c)
        for (auto t : j.at("missing").at(panel.series[c].label()).get<std::vector<std::size_t>>())
            panel.missing(t, c) = true;
    for (const auto& p : j.at("periods"))
        panel.periods.push_back({p.at("name").get<std::string>(), p.at("begin").get<std::size_t>(),
                                 p.at("end").get<std::size_t>()});
    return panel;
}

}  // namespace svecm::panel
