#pragma once

// Path generation: per-step drift plus covariance root times innovation,
// multiplicative price update with an absorbing state at zero, and seeded
// parallel ensembles.

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ltsim/covariance_engine.hpp"
#include "ltsim/drift_engine.hpp"
#include "ltsim/innovation_sampler.hpp"
#include "ltsim/market_history.hpp"
#include "ltsim/market_model.hpp"

namespace ltsim {

/// Prices at or below p_min become 0 and the asset is flagged absorbed;
/// already absorbed assets stay at 0.
Eigen::VectorXd apply_absorbing(Eigen::VectorXd prices, const Eigen::VectorXd& p_min, std::vector<bool>& absorbed);

struct PathState {
    std::size_t path_id = 0;
    std::size_t step = 0;
    Eigen::VectorXd prices;
    Eigen::VectorXd p_min;
    std::vector<bool> absorbed;
    DriftState drift;
    std::optional<CovarianceState> covariance;  ///< only for the LMARCH model
    RngStream stream;
    bool zero_innovations = false;  ///< test hook: eps = 0 at every step
};

/// Everything that entered one step, so realized quantities can be checked
/// against the filtration.
struct StepRecord {
    Eigen::VectorXd drift;
    Eigen::MatrixXd sqrt_sigma;
    InnovationVector innovation;
    Eigen::VectorXd returns;
};

enum class FaultMode { FailFast, SkipAndReport };

struct SimulationOptions {
    std::size_t threads = 0;  ///< 0 = hardware concurrency; output does not depend on it
    FaultMode fault_mode = FaultMode::FailFast;
    /// Streaming mode: keep only these grid steps (0..n_steps). Empty = keep all.
    std::vector<std::size_t> retained_steps;
    /// Starting prices; defaults to the last seeded history row, else 100.
    Eigen::VectorXd initial_prices;
    bool zero_innovations = false;
};

struct PathFault {
    std::size_t path = 0;
    std::size_t step = 0;
    std::string message;
};

struct EnsembleResult {
    ProcessSpec spec;
    CmaParameters cma;
    TimeGrid grid = TimeGrid::monthly(1);
    std::uint64_t master_seed = 0;
    bool seeded_history = false;
    std::size_t n_paths = 0;
    std::vector<std::size_t> steps;  ///< retained grid steps, ascending
    std::vector<double> prices;      ///< [path][retained point][asset]
    std::vector<PathFault> faults;   ///< skip-and-report mode only; faulted paths hold NaN

    std::size_t n_assets() const noexcept { return cma.size(); }
    std::size_t n_points() const noexcept { return steps.size(); }
    bool partial() const noexcept { return !faults.empty(); }

    double price(std::size_t path, std::size_t point, std::size_t asset) const {
        return prices[(path * n_points() + point) * n_assets() + asset];
    }
    std::span<const double> path_block(std::size_t path) const {
        return {prices.data() + path * n_points() * n_assets(), n_points() * n_assets()};
    }
    /// Prices of one asset along one path, at the retained points.
    std::vector<double> series(std::size_t path, std::size_t asset) const;
    /// Index of a grid step among the retained points.
    std::optional<std::size_t> point_of_step(std::size_t step) const;
    bool path_ok(std::size_t path) const;
};

class PathSimulator {
public:
    PathSimulator(ProcessSpec spec, CmaParameters cma, TimeGrid grid,
                  std::optional<MarketHistory> seed_history = std::nullopt, double eps_min = kDefaultEpsMin);

    /// Initial state of a path: DU draw, seeded drift and covariance windows,
    /// p_min from the starting prices.
    PathState start_path(std::uint64_t master_seed, std::size_t path_id,
                         const Eigen::VectorXd& initial_prices = {}) const;

    /// Advances the path by one step. Throws NumericalFault on a non-finite
    /// value or a covariance that lost definiteness.
    void step(PathState& state, StepRecord* record = nullptr) const;

    EnsembleResult simulate(std::size_t n_paths, std::uint64_t master_seed,
                            const SimulationOptions& options = {}) const;

    const ProcessSpec& spec() const noexcept { return spec_; }
    const CmaParameters& cma() const noexcept { return cma_; }
    const TimeGrid& grid() const noexcept { return grid_; }
    const StepParameters& step_parameters() const noexcept { return step_; }
    const SymmetricMatrix& sigma_cma_step() const noexcept { return sigma_cma_step_; }
    const InnovationLaw& innovation_law() const noexcept { return law_; }
    Eigen::VectorXd default_initial_prices() const;

private:
    ProcessSpec spec_;
    CmaParameters cma_;
    TimeGrid grid_;
    std::optional<MarketHistory> history_;
    double eps_min_;
    StepParameters step_;
    SymmetricMatrix sigma_cma_step_;
    Eigen::MatrixXd constant_root_;
    std::shared_ptr<const LmarchKernel> kernel_;
    InnovationLaw law_;
    std::vector<std::vector<NrcHorizon>> horizons_;
    double w_inf_ = 1.0;
};

/// Convenience wrapper around PathSimulator::simulate.
EnsembleResult simulate_ensemble(const ProcessSpec& spec, const CmaParameters& cma, const TimeGrid& grid,
                                 std::size_t n_paths, std::uint64_t master_seed,
                                 const std::optional<MarketHistory>& seed_history = std::nullopt,
                                 const SimulationOptions& options = {});

}  // namespace ltsim
