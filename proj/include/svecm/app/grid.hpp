#pragma once

#include "svecm/app/serialize.hpp"
#include "svecm/vecm.hpp"

#include <string>
#include <string_view>
#include <vector>

namespace svecm::app {

/// A coefficient matrix laid out as commodity blocks of R regions each.
struct GridExport {
    std::string matrix;
    std::string period;
    Eigen::MatrixXd values;
    std::vector<std::string> labels;
    std::vector<std::string> commodities;
    std::size_t block = 0;
    /// Row/column indices where a new commodity block starts (commodity count - 1 entries).
    std::vector<std::size_t> boundaries;

    [[nodiscard]] Json to_json() const;
    /// `row,col,value,intensity` with intensity = value / max|value| in [-1, 1].
    [[nodiscard]] std::string render_csv() const;
};

/// Names accepted by export_grid: "Pi" and "Gamma1".."Gamma{p-1}".
std::vector<std::string> grid_names(const vecm::VecmView& view);

GridExport export_grid(const vecm::VecmView& view, std::string_view matrix, std::string period,
                       const std::vector<std::string>& commodities);

}  // namespace svecm::app
