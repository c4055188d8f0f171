#include "svecm/app/config.hpp"

#include "svecm/error.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

namespace svecm::app {

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

double to_double(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        const double d = std::stod(v, &used);
        if (used == v.size()) return d;
    } catch (const std::exception&) {
    }
    throw Error("config.invalid", key + ": expected a number, got '" + v + "'");
}

std::size_t to_size(const std::string& key, const std::string& v) {
    if (v.empty() || v.find_first_not_of("0123456789") != std::string::npos)
        throw Error("config.invalid", key + ": expected a non-negative integer, got '" + v + "'");
    return static_cast<std::size_t>(std::stoull(v));
}

std::optional<std::size_t> to_optional_size(const std::string& key, const std::string& v) {
    if (v.empty() || v == "auto") return std::nullopt;
    return to_size(key, v);
}

bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "yes" || v == "1" || v == "on") return true;
    if (v == "false" || v == "no" || v == "0" || v == "off") return false;
    throw Error("config.invalid", key + ": expected true or false, got '" + v + "'");
}

std::vector<double> to_doubles(const std::string& key, const std::string& v) {
    std::vector<double> out;
    for (const auto& item : split_list(v)) out.push_back(to_double(key, item));
    return out;
}

}  // namespace

std::vector<std::string> split_list(std::string_view text, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= text.size()) {
        const auto end = text.find(sep, start);
        const auto piece = trim(text.substr(start, end == std::string_view::npos ? std::string_view::npos : end - start));
        if (!piece.empty()) out.push_back(piece);
        if (end == std::string_view::npos) break;
        start = end + 1;
    }
    return out;
}

std::string join_list(const std::vector<std::string>& items, char sep) {
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (i) out += sep;
        out += items[i];
    }
    return out;
}

const std::vector<ConfigKey>& config_keys() {
    static const std::vector<ConfigKey> keys{
        {"prices", "", "long-form price CSV: date,region,commodity,price"},
        {"cpi", "", "monthly CPI CSV: month,index (empty: no deflation)"},
        {"cpi_base", "", "base month YYYY-MM for deflation"},
        {"commodities", "piglet,hog,pork", "commodity block order"},
        {"periods", "", "Name:YYYY-MM-DD:YYYY-MM-DD entries, comma separated, in time order"},
        {"max_missing", "0.25", "drop regions with a larger missing share in any period"},
        {"adf_spec", "c", "ADF deterministic terms: n, c or ct"},
        {"adf_max_lag", "auto", "ADF maximum lag (auto: Schwert rule)"},
        {"significance", "0.05", "significance level for test decisions"},
        {"chow_lags", "1", "lag order of the Chow regressions"},
        {"max_lags", "4", "largest lag order considered by AIC"},
        {"lags", "auto", "fixed lag order (auto: AIC selection)"},
        {"lambda_grid", "", "explicit descending lambda grid (empty: generated)"},
        {"n_lambdas", "50", "generated lambda grid size"},
        {"lambda_min_ratio", "0.0001", "smallest generated lambda relative to lambda_max"},
        {"gamma_grid", "0.1,0.5,0.9", "elastic-net mixing values"},
        {"cv_folds", "5", "rolling-origin folds"},
        {"cv_initial_window", "auto", "first training window in design rows"},
        {"cv_step", "auto", "rows per validation block"},
        {"tol", "1e-07", "coordinate-descent tolerance"},
        {"max_sweeps", "10000", "coordinate-descent sweep cap"},
        {"commodity_ranks", "true", "also fit per-commodity sub-systems for the rank table"},
        {"rank_tolerance", "0.5", "margin used by the effective-rank flags"},
        {"horizon", "8", "JIRF horizon"},
        {"shock_source", "series-std", "series-std or residual-std"},
        {"jirf_period", "", "period whose model drives the JIRFs (empty: first)"},
        {"focus_commodity", "hog", "commodity of the focus-region scenario"},
        {"focus_regions", "", "regions shocked in the focus scenario (empty: no such scenario)"},
        {"bootstrap", "true", "run the bootstrap stage"},
        {"replicates", "500", "bootstrap replicates"},
        {"confidence", "0.95", "bootstrap band level"},
        {"recompute_shocks", "true", "recompute shock sizes on every replicate"},
        {"keep_draws", "false", "archive every replicate response"},
        {"output", "out", "artifact directory"},
        {"seed", "", "master seed (empty: SPARSEVECM_SEED, else 0)"},
        {"threads", "0", "worker threads (0: hardware concurrency)"},
    };
    return keys;
}

ConfigMap::ConfigMap() {
    for (const auto& k : config_keys()) entries_.emplace_back(k.name, k.default_value);
}

void ConfigMap::set(const std::string& key, const std::string& value) {
    for (auto& [k, v] : entries_)
        if (k == key) {
            v = trim(value);
            return;
        }
    throw Error("config.unknown_key", "unknown config key '" + key + "'");
}

const std::string& ConfigMap::get(const std::string& key) const {
    for (const auto& [k, v] : entries_)
        if (k == key) return v;
    throw Error("config.unknown_key", "unknown config key '" + key + "'");
}

ConfigMap ConfigMap::parse(std::string_view text, std::string_view origin) {
    ConfigMap map;
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t number = 0;
    while (std::getline(in, line)) {
        ++number;
        const auto body = trim(line);
        if (body.empty() || body.front() == '#') continue;
        const auto eq = body.find('=');
        if (eq == std::string::npos)
            throw Error("config.syntax", std::string(origin) + ":" + std::to_string(number) + ": expected key = value");
        const auto key = trim(std::string_view(body).substr(0, eq));
        try {
            map.set(key, body.substr(eq + 1));
        } catch (const Error& e) {
            throw Error(e.code(), std::string(origin) + ":" + std::to_string(number) + ": " + e.what());
        }
    }
    return map;
}

ConfigMap ConfigMap::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("config.unreadable", "cannot read config file " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    ConfigMap map = parse(ss.str(), path.string());
    map.base_dir = path.parent_path();
    return map;
}

std::string ConfigMap::to_text() const {
    std::string out;
    for (const auto& [k, v] : entries_) out += k + " = " + v + "\n";
    return out;
}

PipelineConfig build_config(const ConfigMap& map) {
    PipelineConfig c;
    auto path = [&](const std::string& key) -> std::filesystem::path {
        const auto& v = map.get(key);
        if (v.empty()) return {};
        std::filesystem::path p(v);
        return p.is_relative() && !map.base_dir.empty() ? map.base_dir / p : p;
    };
    c.prices = path("prices");
    c.cpi = path("cpi");
    if (const auto& b = map.get("cpi_base"); !b.empty()) {
        c.cpi_base = panel::parse_month(b);
        if (!c.cpi_base) throw Error("config.invalid", "cpi_base: expected YYYY-MM, got '" + b + "'");
    }
    if (!c.cpi.empty() && !c.cpi_base) throw Error("config.invalid", "cpi_base is required when cpi is set");
    c.commodities = split_list(map.get("commodities"));

    for (const auto& entry : split_list(map.get("periods"))) {
        const auto parts = split_list(entry, ':');
        if (parts.size() != 3) throw Error("config.invalid", "periods: expected Name:first:last, got '" + entry + "'");
        const auto first = panel::parse_date(parts[1]);
        const auto last = panel::parse_date(parts[2]);
        if (!first || !last) throw Error("config.invalid", "periods: bad date in '" + entry + "'");
        if (*last < *first) throw Error("config.invalid", "periods: '" + parts[0] + "' ends before it starts");
        if (!c.periods.empty() && !(c.periods.back().last < *first))
            throw Error("config.invalid", "periods must be ordered and non-overlapping");
        c.periods.push_back({parts[0], *first, *last});
    }
    c.max_missing = to_double("max_missing", map.get("max_missing"));

    c.adf_spec = stattests::deterministic_from_string(map.get("adf_spec"));
    c.adf_max_lag = to_optional_size("adf_max_lag", map.get("adf_max_lag"));
    c.significance = to_double("significance", map.get("significance"));
    if (!(c.significance > 0.0 && c.significance < 1.0)) throw Error("config.invalid", "significance must lie in (0, 1)");
    c.chow_lags = to_size("chow_lags", map.get("chow_lags"));

    c.max_lags = to_size("max_lags", map.get("max_lags"));
    c.lags = to_optional_size("lags", map.get("lags"));
    c.net.lambdas = to_doubles("lambda_grid", map.get("lambda_grid"));
    c.net.n_lambdas = to_size("n_lambdas", map.get("n_lambdas"));
    c.net.lambda_min_ratio = to_double("lambda_min_ratio", map.get("lambda_min_ratio"));
    c.net.gammas = to_doubles("gamma_grid", map.get("gamma_grid"));
    c.net.cv_folds = to_size("cv_folds", map.get("cv_folds"));
    c.net.cv_initial_window = to_optional_size("cv_initial_window", map.get("cv_initial_window"));
    c.net.cv_step = to_optional_size("cv_step", map.get("cv_step"));
    c.net.tolerance = to_double("tol", map.get("tol"));
    c.net.max_sweeps = to_size("max_sweeps", map.get("max_sweeps"));
    c.commodity_ranks = to_bool("commodity_ranks", map.get("commodity_ranks"));
    c.rank_tolerance = to_double("rank_tolerance", map.get("rank_tolerance"));

    c.horizon = to_size("horizon", map.get("horizon"));
    c.shock_source = jirf::magnitude_source_from_string(map.get("shock_source"));
    if (c.shock_source == jirf::MagnitudeSource::User)
        throw Error("config.invalid", "shock_source: pipeline scenarios need series-std or residual-std");
    c.jirf_period = map.get("jirf_period");
    c.focus_commodity = map.get("focus_commodity");
    c.focus_regions = split_list(map.get("focus_regions"));

    c.run_bootstrap = to_bool("bootstrap", map.get("bootstrap"));
    c.boot.replicates = to_size("replicates", map.get("replicates"));
    c.boot.confidence = to_double("confidence", map.get("confidence"));
    c.boot.recompute_shocks = to_bool("recompute_shocks", map.get("recompute_shocks"));
    c.boot.keep_draws = to_bool("keep_draws", map.get("keep_draws"));

    c.output = path("output");
    if (c.output.empty()) throw Error("config.invalid", "output directory is empty");
    std::string seed = map.get("seed");
    if (seed.empty())
        if (const char* env = std::getenv("SPARSEVECM_SEED")) seed = trim(env);
    c.seed = seed.empty() ? 0 : static_cast<std::uint64_t>(to_size("seed", seed));
    c.threads = to_size("threads", map.get("threads"));

    c.net.threads = c.threads;
    c.boot.seed = c.seed;
    c.boot.threads = c.threads;
    c.boot.solver.tolerance = c.net.tolerance;
    c.boot.solver.max_sweeps = c.net.max_sweeps;
    c.boot.solver.standardize = c.net.standardize;
    c.net.validate();
    c.boot.validate();

    c.source = map;
    if (map.get("seed").empty()) c.source.set("seed", std::to_string(c.seed));
    return c;
}

}  // namespace svecm::app
