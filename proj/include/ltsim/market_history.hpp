#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ltsim/market_model.hpp"

namespace ltsim {

/// Dense panel of strictly positive prices on a regular monthly grid.
/// prices(k, a) is the price of asset a at grid point k; the grid origin is
/// the first date and grid.n_steps() == rows - 1.
struct MarketHistory {
    TimeGrid grid = TimeGrid::monthly(1);
    std::vector<std::string> asset_ids;
    Eigen::MatrixXd prices;  ///< time x asset

    std::size_t n_points() const noexcept { return static_cast<std::size_t>(prices.rows()); }
    std::size_t n_assets() const noexcept { return asset_ids.size(); }
    std::vector<double> series(std::size_t asset) const;
};

}  // namespace ltsim
