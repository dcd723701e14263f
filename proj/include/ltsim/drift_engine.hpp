#pragma once

// Per-step drift: constant CMA drift, per-path drift-uncertainty offset and
// the history-dependent negative-return-correlation (NRC) term.

#include <cstddef>
#include <vector>

#include <Eigen/Dense>

#include "ltsim/innovation_sampler.hpp"
#include "ltsim/market_model.hpp"

namespace ltsim {

/// Per-path drift offset in per-step units: sigma_1y / sqrt(dt_cal) * N(0,1),
/// one independent draw per asset, scaled by step_years.
Eigen::VectorXd du_draw(RngStream& stream, const Eigen::VectorXd& sigma_annual, double dt_cal_years,
                        double step_years);

/// D(n steps) = (1 + mu_step)^(-n).
double discount_factor(double mu_step, std::size_t n_steps);

/// Drift state of one path: base drift, DU offset, NRC horizons and a
/// rolling price window deep enough for the longest horizon.
class DriftState {
public:
    DriftState(Eigen::VectorXd mu_base_step, Eigen::VectorXd du_offset,
               std::vector<std::vector<NrcHorizon>> horizons_per_asset);

    /// Appends the prices observed at the next time point.
    void push_prices(const Eigen::VectorXd& prices);

    /// NRC term at the latest pushed time. A horizon whose lagged price is not
    /// yet available contributes 0; an asset with a zero current or lagged
    /// price contributes 0.
    Eigen::VectorXd nrc_term() const;

    /// mu_base + du_offset + nrc_term; 0 for assets whose latest price is 0.
    Eigen::VectorXd total_drift() const;

    const Eigen::VectorXd& mu_base_step() const noexcept { return mu_base_; }
    const Eigen::VectorXd& du_offset() const noexcept { return du_offset_; }
    std::size_t window_depth() const noexcept { return depth_; }
    std::size_t observed() const noexcept { return count_; }

private:
    /// Price of asset a, lag steps before the latest point; requires lag < available().
    double lagged(std::size_t asset, std::size_t lag) const;
    std::size_t available() const noexcept { return count_ < depth_ ? count_ : depth_; }

    Eigen::VectorXd mu_base_;
    Eigen::VectorXd du_offset_;
    std::vector<std::vector<NrcHorizon>> horizons_;
    std::size_t depth_ = 1;
    Eigen::MatrixXd window_;  // asset x depth, ring buffer over columns
    std::size_t head_ = 0;    // column of the latest point
    std::size_t count_ = 0;
};

}  // namespace ltsim
