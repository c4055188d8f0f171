#pragma once

#include <Eigen/Dense>

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace svecm::panel {

using Date = std::chrono::sys_days;
using Month = std::chrono::year_month;
using Mask = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>;

/// Parses `YYYY-MM-DD`. Returns nullopt on malformed or out-of-range input.
std::optional<Date> parse_date(std::string_view text);
/// Parses `YYYY-MM`.
std::optional<Month> parse_month(std::string_view text);
std::string format_date(Date d);
std::string format_month(Month m);

/// Monday of the ISO week containing `d`.
Date iso_week_monday(Date d);

struct RawObservation {
    Date date;
    std::string region;
    std::string commodity;
    double price = 0.0;
    std::optional<std::string> deflator_key;
};

struct SeriesId {
    std::string commodity;
    std::string region;

    [[nodiscard]] std::string label() const { return commodity + "." + region; }
    friend bool operator==(const SeriesId&, const SeriesId&) = default;
};

/// Named contiguous half-open row range [begin, end).
struct Period {
    std::string name;
    std::size_t begin = 0;
    std::size_t end = 0;

    [[nodiscard]] std::size_t size() const { return end - begin; }
};

/// Calendar definition of a period; inclusive on both ends.
struct PeriodDefinition {
    std::string name;
    Date first;
    Date last;
};

/**
 * Rectangular weekly panel of prices.
 *
 * Columns are ordered commodity-major, regions sorted lexicographically within
 * each commodity block, so (commodity k, region j) lives at column k*R + j.
 * `values` holds NaN in missing cells until interpolate() fills them; `missing`
 * keeps the original missingness afterwards.
 */
struct PricePanel {
    std::vector<Date> stamps;
    std::vector<SeriesId> series;
    std::vector<std::string> commodity_order;
    std::vector<std::string> region_order;
    Eigen::MatrixXd values;
    Mask missing;
    std::vector<Period> periods;
    std::vector<std::string> transforms;
    std::vector<std::string> warnings;

    [[nodiscard]] std::size_t rows() const { return stamps.size(); }
    [[nodiscard]] std::size_t cols() const { return series.size(); }
    [[nodiscard]] bool is_log() const;
    [[nodiscard]] std::vector<std::string> labels() const;
    [[nodiscard]] std::optional<std::size_t> find_series(std::string_view label) const;
    /// Throws Error("panel.unknown_period") when absent.
    [[nodiscard]] const Period& period(std::string_view name) const;
};

/// Reads long-form `date,region,commodity,price[,deflator]` CSV.
/// Throws with every offending row listed when dates or prices fail to parse.
std::vector<RawObservation> read_observations_csv(std::istream& in);
std::vector<RawObservation> read_observations_csv(const std::filesystem::path& path);

/// Reads `month,index` CSV with `YYYY-MM` months.
std::map<Month, double> read_cpi_csv(std::istream& in);
std::map<Month, double> read_cpi_csv(const std::filesystem::path& path);

/**
 * Averages observations into (ISO week, region, commodity) cells.
 *
 * `commodity_order` fixes the commodity blocks; commodities absent from it are
 * appended in lexicographic order. Weeks run from the earliest to the latest
 * Monday with a constant 7-day step; cells without observations are missing.
 */
PricePanel aggregate(const std::vector<RawObservation>& raw,
                     const std::vector<std::string>& commodity_order = {});

/// Multiplies each row by cpi(base) / cpi(month of the row's Monday).
PricePanel deflate(const PricePanel& panel, const std::map<Month, double>& cpi, Month base);

/// Linear fill of interior gaps, constant extension at the edges.
PricePanel interpolate(const PricePanel& panel);

PricePanel log_transform(const PricePanel& panel);

/// Assigns rows to named periods by the row's Monday. Periods must be ordered
/// and non-overlapping; an empty period is an error.
PricePanel tag_periods(const PricePanel& panel, const std::vector<PeriodDefinition>& defs);

/**
 * Drops every region whose series (any commodity) exceed `max_missing_fraction`
 * missing in any tagged period (whole sample when untagged). Dropping whole
 * regions keeps the commodity-major grid rectangular. A warning per dropped
 * region is appended.
 */
PricePanel exclude_sparse_regions(const PricePanel& panel, double max_missing_fraction = 0.25);

/// Rows of one period; the result carries a single period spanning all rows.
PricePanel slice_period(const PricePanel& panel, std::string_view period);

/// Columns of one commodity, periods preserved.
PricePanel select_commodity(const PricePanel& panel, std::string_view commodity);

struct PeriodSummary {
    std::string commodity;
    std::string period;
    double mean = 0.0;
    double sd = 0.0;
    double min = 0.0;
    double median = 0.0;
    double max = 0.0;
    double missing_pct = 0.0;
    std::size_t observed = 0;
};

/// Statistics over observed cells per (commodity, period). Requires a level-scale panel.
std::vector<PeriodSummary> summarize(const PricePanel& panel,
                                     const std::vector<std::string>& period_names);

/// Wide CSV: `date` then one `<commodity>.<region>` column per series. Missing cells are empty.
void write_panel_csv(const PricePanel& panel, std::ostream& out);
/// Sidecar JSON with mask, period tags, transform metadata and series order.
std::string panel_sidecar_json(const PricePanel& panel);

void save_panel(const PricePanel& panel, const std::filesystem::path& csv_path,
                const std::filesystem::path& sidecar_path);
PricePanel load_panel(const std::filesystem::path& csv_path,
                      const std::filesystem::path& sidecar_path);

}  // namespace svecm::panel
