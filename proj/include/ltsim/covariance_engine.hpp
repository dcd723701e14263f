#pragma once

// Conditional covariance of the process: constant CMA covariance or the
// affine long-memory ARCH model, plus multi-horizon variance forecasts.

#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "ltsim/market_model.hpp"

namespace ltsim {

/// One-step memory kernel: w(l) for lags 0 <= l < l_max, summing to 1.
struct LmarchKernel {
    std::vector<double> taus;               ///< EMA time constants, in steps
    std::vector<double> component_weights;  ///< convex weights of the EMAs
    std::size_t l_max = 0;
    std::vector<double> weights;
};

/// w(l) = sum_k c_k (1 - mu_k) mu_k^l with mu_k = exp(-1/tau_k) and
/// c_k proportional to 1 - ln(tau_k)/ln(decay), truncated at l_max and
/// renormalized. Throws ValidationError on invalid taus.
LmarchKernel build_kernel(std::span<const double> taus, std::size_t l_max, double decay = 96.0);

/// Same construction with explicit (non-negative) component weights.
LmarchKernel build_kernel(std::span<const double> taus, std::span<const double> component_weights,
                          std::size_t l_max);

/// Kernel from raw lag weights (normalized to 1); used for rectangular windows.
LmarchKernel kernel_from_weights(std::vector<double> weights);

LmarchKernel build_kernel(const KernelConfig& config);

/// Multi-horizon forecast weights: forecast = long_run * LR + sum_l lags[l] * x(t - l).
/// long_run + sum(lags) = 1 when the kernel sums to 1.
struct HorizonWeights {
    std::size_t horizon = 1;
    double long_run = 0.0;
    std::vector<double> lags;
};

/// Iterates the affine one-step map n times, replacing future squared
/// returns by their conditional expectations, and averages the n one-step
/// forecasts. n = 1 gives (w_inf, (1 - w_inf) w(l)).
HorizonWeights horizon_weights(const LmarchKernel& kernel, double w_inf, std::size_t horizon);

/// Applies horizon weights to squared (demeaned) returns, most recent first.
/// When fewer than l_max lags exist, the lag weights are renormalized over
/// the available ones. Throws InsufficientDataError on an empty history.
double apply_horizon_weights(const HorizonWeights& weights, std::span<const double> squares_recent_first,
                             double long_run_variance);

/// Equal-weight mean of squared (not demeaned) returns over a window.
/// Throws InsufficientDataError when the window is empty or shorter than required.
double rma_variance(std::span<const double> returns, std::size_t required = 0);

/// Covariance state of one path.
class CovarianceState {
public:
    /// Starts at the fixed point: every lag slot holds sigma_cma_step, so the
    /// linear part equals the CMA covariance until real returns arrive.
    CovarianceState(std::shared_ptr<const LmarchKernel> kernel, SymmetricMatrix sigma_cma_step,
                    Eigen::VectorXd mu_step, double w_inf);

    /// Records the return realized at the latest time point.
    void push_return(const Eigen::VectorXd& r);

    /// sum_l w(l) (r(t-l) - mu)(r(t-l) - mu)^T
    SymmetricMatrix linear_covariance() const;
    /// w_inf * Sigma_CMA + (1 - w_inf) * linear
    SymmetricMatrix affine_covariance() const;

    /// Per-asset variance forecast at scale delta-t, averaged over the next
    /// `horizon` steps. horizon = 1 is the diagonal of affine_covariance().
    Eigen::VectorXd variance_forecast(std::size_t horizon) const;
    Eigen::VectorXd variance_forecast(const HorizonWeights& weights) const;

    double w_inf() const noexcept { return w_inf_; }
    const SymmetricMatrix& sigma_cma_step() const noexcept { return sigma_cma_; }
    const LmarchKernel& kernel() const noexcept { return *kernel_; }
    std::size_t dimension() const noexcept { return sigma_cma_.dimension(); }

private:
    std::span<const double> slot(std::size_t lag) const;

    std::shared_ptr<const LmarchKernel> kernel_;
    SymmetricMatrix sigma_cma_;
    Eigen::VectorXd mu_;
    double w_inf_;
    std::size_t packed_ = 0;
    std::vector<double> outer_;  // l_max slots of packed outer products, ring buffer
    std::size_t head_ = 0;       // slot of lag 0
};

}  // namespace ltsim
