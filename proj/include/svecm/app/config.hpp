#pragma once

#include "svecm/bootstrap.hpp"
#include "svecm/jirf.hpp"
#include "svecm/panel.hpp"
#include "svecm/stattests.hpp"
#include "svecm/varnet.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace svecm::app {

struct ConfigKey {
    std::string name;
    std::string default_value;
    std::string help;
};

/// Every recognised key with its default, in echo order.
const std::vector<ConfigKey>& config_keys();

/**
 * Raw `key = value` settings. Lines starting with `#` and blank lines are
 * ignored; later assignments win. Unknown keys are rejected.
 */
class ConfigMap {
public:
    ConfigMap();

    static ConfigMap parse(std::string_view text, std::string_view origin = "config");
    static ConfigMap load(const std::filesystem::path& path);

    void set(const std::string& key, const std::string& value);
    [[nodiscard]] const std::string& get(const std::string& key) const;
    [[nodiscard]] const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }
    /// Directory relative paths are resolved against (the config file's directory).
    std::filesystem::path base_dir;

    /// Canonical `key = value` text, one line per key in schema order.
    [[nodiscard]] std::string to_text() const;

private:
    std::vector<std::pair<std::string, std::string>> entries_;
};

struct PipelineConfig {
    std::filesystem::path prices;
    std::filesystem::path cpi;
    std::optional<panel::Month> cpi_base;
    std::vector<std::string> commodities;
    std::vector<panel::PeriodDefinition> periods;
    double max_missing = 0.25;

    stattests::Deterministic adf_spec = stattests::Deterministic::Constant;
    std::optional<std::size_t> adf_max_lag;
    double significance = 0.05;
    std::size_t chow_lags = 1;

    std::size_t max_lags = 4;
    std::optional<std::size_t> lags;
    varnet::ElasticNetConfig net;
    bool commodity_ranks = true;
    double rank_tolerance = 0.5;

    std::size_t horizon = 8;
    jirf::MagnitudeSource shock_source = jirf::MagnitudeSource::SeriesStd;
    std::string jirf_period;
    std::string focus_commodity;
    std::vector<std::string> focus_regions;

    bool run_bootstrap = true;
    bootstrap::BootstrapSpec boot;

    std::filesystem::path output;
    std::uint64_t seed = 0;
    std::size_t threads = 0;

    /// The settings this config was built from, for the manifest echo.
    ConfigMap source;
};

/// Typed view of a ConfigMap. `SPARSEVECM_SEED` is consulted when `seed` is empty.
PipelineConfig build_config(const ConfigMap& map);

std::vector<std::string> split_list(std::string_view text, char sep = ',');
std::string join_list(const std::vector<std::string>& items, char sep = ',');

}  // namespace svecm::app
