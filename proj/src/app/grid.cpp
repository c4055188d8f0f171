#include "svecm/app/grid.hpp"

#include "svecm/error.hpp"
#include "svecm/format.hpp"

#include <sstream>

namespace svecm::app {

std::vector<std::string> grid_names(const vecm::VecmView& view) {
    std::vector<std::string> names{"Pi"};
    for (std::size_t k = 1; k <= view.gamma.size(); ++k) names.push_back("Gamma" + std::to_string(k));
    return names;
}

GridExport export_grid(const vecm::VecmView& view, std::string_view matrix, std::string period,
                       const std::vector<std::string>& commodities) {
    GridExport g;
    g.matrix = std::string(matrix);
    g.period = std::move(period);
    if (matrix == "Pi") {
        g.values = view.pi;
    } else if (matrix.rfind("Gamma", 0) == 0 && matrix.size() > 5 &&
               matrix.substr(5).find_first_not_of("0123456789") == std::string_view::npos) {
        const auto k = std::stoul(std::string(matrix.substr(5)));
        if (k < 1 || k > view.gamma.size())
            throw Error("matrix.unknown", "no matrix '" + g.matrix + "'; the model has " +
                                              std::to_string(view.gamma.size()) + " Gamma matrices");
        g.values = view.gamma[k - 1];
    } else {
        throw Error("matrix.unknown", "unknown matrix '" + g.matrix + "'; expected Pi or Gamma<k>");
    }
    const auto m = static_cast<std::size_t>(g.values.rows());
    g.labels = view.series;
    if (g.labels.size() != m) {
        g.labels.clear();
        for (std::size_t i = 0; i < m; ++i) g.labels.push_back(std::to_string(i));
    }
    g.commodities = commodities;
    const std::size_t C = commodities.empty() ? 1 : commodities.size();
    if (m % C != 0) throw Error("matrix.layout", "matrix size is not a multiple of the commodity count");
    g.block = m / C;
    for (std::size_t k = 1; k < C; ++k) g.boundaries.push_back(k * g.block);
    return g;
}

Json GridExport::to_json() const {
    const double peak = values.size() ? values.cwiseAbs().maxCoeff() : 0.0;
    return Json{{"matrix", matrix},     {"period", period},         {"dim", values.rows()},
                {"labels", labels},     {"commodities", commodities}, {"block", block},
                {"boundaries", boundaries}, {"max_abs", peak},      {"values", matrix_to_json(values)}};
}

std::string GridExport::render_csv() const {
    const double peak = values.size() ? values.cwiseAbs().maxCoeff() : 0.0;
    std::ostringstream out;
    out << "row,col,value,intensity\n";
    for (Eigen::Index i = 0; i < values.rows(); ++i)
        for (Eigen::Index j = 0; j < values.cols(); ++j) {
            const double v = values(i, j);
            out << labels[static_cast<std::size_t>(i)] << ',' << labels[static_cast<std::size_t>(j)] << ','
                << format_double(v) << ',' << format_double(peak > 0.0 ? v / peak : 0.0) << '\n';
        }
    return out.str();
}

}  // namespace svecm::app
