#pragma once

#include "svecm/bootstrap.hpp"
#include "svecm/jirf.hpp"
#include "svecm/panel.hpp"
#include "svecm/stattests.hpp"
#include "svecm/varnet.hpp"

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <string>
#include <string_view>

namespace svecm::app {

using Json = nlohmann::ordered_json;

/// {"rows", "cols", "data"} with data in row-major order.
Json matrix_to_json(const Eigen::MatrixXd& m);
Eigen::MatrixXd matrix_from_json(const Json& j);

/**
 * VarFit document. Coefficients are stored as "phi": one row-major m x m
 * block per lag, so phi[k].data[i * m + j] is the effect of series j at lag
 * k + 1 on equation i.
 */
Json varfit_to_json(const varnet::VarFit& fit);
varnet::VarFit varfit_from_json(const Json& j);

Json adf_to_json(const stattests::AdfResult& r);
Json panel_unit_root_to_json(const stattests::PanelUnitRootResult& r);
Json chow_to_json(const stattests::ChowResult& r);
Json pairwise_to_json(const stattests::PairwiseResult& r);
Json lag_selection_to_json(const varnet::LagSelection& s);
Json summary_to_json(const std::vector<panel::PeriodSummary>& rows);

/// Lowercase hex SHA-256.
std::string sha256_hex(std::string_view data);
std::string sha256_file(const std::filesystem::path& path);

void write_text(const std::filesystem::path& path, std::string_view text);
std::string read_text(const std::filesystem::path& path);

}  // namespace svecm::app
