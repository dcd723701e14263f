#pragma once

// Estimators shared by empirical and simulated inputs: realized returns,
// annualization, realized innovations, folded cdf, lag-one correlations with
// Monte Carlo bands, cross-over table and terminal-wealth statistics.

#include <cstddef>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "ltsim/covariance_engine.hpp"
#include "ltsim/market_history.hpp"
#include "ltsim/market_model.hpp"
#include "ltsim/path_simulator.hpp"

namespace ltsim {

enum class ReturnMode { Relative, Log };

/// (p_now - p_base)/p_base, or ln(p_now/p_base). Throws ValidationError when
/// p_base is not positive (absorbed asset).
double realized_return(double p_now, double p_base, ReturnMode mode = ReturnMode::Relative);

/// Returns over `horizon` steps ending at every grid point t >= horizon.
/// out[t] is NaN for t < horizon or where the base price is zero.
std::vector<double> horizon_returns(std::span<const double> prices, std::size_t horizon,
                                    ReturnMode mode = ReturnMode::Relative);

enum class AnnualizeKind { ReturnShape, Location, Volatility };

/// ReturnShape and Volatility scale by sqrt(1y/dT), Location by 1y/dT.
double annualize(double value, double dt_years, AnnualizeKind kind);

struct SeriesSample {
    std::vector<double> values;
    std::string label;
    std::size_t scale_steps = 1;
};

/// Forecast evaluated at grid point t from data up to t; NaN = not yet defined.
using Forecast = std::function<double(std::size_t)>;

inline constexpr double kVolatilityFloor = 1e-12;

/// eps(t + dT) = (r(t + dT) - mu(t; dT)) / sigma(t; dT) for every t where
/// the volatility forecast is defined. Stops at the first absorbed price.
SeriesSample realized_innovations(std::span<const double> prices, std::size_t horizon, const Forecast& drift,
                                  const Forecast& volatility, std::string label = {});

/// sigma(t; dT) from the multi-horizon LMARCH forecast on one-step returns
/// demeaned by `mean`. out[t] uses returns up to t; out[0] is NaN.
std::vector<double> lmarch_volatility(std::span<const double> prices, const LmarchKernel& kernel, double w_inf,
                                      double long_run_variance, std::size_t horizon, double mean = 0.0);

/// Realized innovations of simulated data: CMA drift and the process own
/// covariance model (LMARCH forecast with its w_inf, or the CMA volatility).
/// Paths are pooled in path order; faulted paths are skipped.
SeriesSample simulated_innovations(const EnsembleResult& ensemble, std::size_t asset, std::size_t horizon);

/// Realized innovations of historical data: full-sample mean return and a
/// pure LMARCH forecast (w_inf = 0) with the default kernel.
SeriesSample empirical_innovations(const MarketHistory& history, std::size_t asset, std::size_t horizon);

struct FoldedCdf {
    std::vector<double> x;     ///< sorted sample
    std::vector<double> cdf;   ///< (i - 0.5)/N
    std::vector<double> fold;  ///< min(F, 1 - F)

    std::size_t size() const noexcept { return x.size(); }
    /// Empirical cdf at an arbitrary point by counting, with the same plotting positions.
    double cdf_at(double value) const;
    double fold_at(double value) const;
};

FoldedCdf folded_cdf(std::vector<double> sample);

/// Pearson correlation of x(t) and y(t + dT) over every t where both are
/// finite. Throws InsufficientDataError below `min_pairs` pairs or on a
/// constant leg.
double lag_one_correlation(std::span<const double> x, std::span<const double> y, std::size_t horizon,
                           std::size_t min_pairs = 8);

enum class LagOneStatistic { Returns, Volatility };

std::string_view to_string(LagOneStatistic statistic);

/// Lag-one correlation of one price series: relative returns over dT, or
/// log LMARCH volatility forecast (w_inf = 0, raw squares) at t against log
/// rectangular volatility over (t, t + dT].
double lag_one_statistic(std::span<const double> prices, std::size_t horizon, LagOneStatistic statistic,
                         const LmarchKernel& kernel);

struct LagOneCurve {
    std::string label;
    std::vector<std::size_t> horizons;  ///< in steps
    std::vector<double> correlation;    ///< single series value, or MC mean
    std::vector<double> band;           ///< 1.95 sigma_MC half-width; empty for a single series
    std::vector<std::size_t> samples;   ///< paths contributing per horizon
    std::vector<std::string> notes;     ///< per-horizon insufficient-data reports

    bool has_band() const noexcept { return !band.empty(); }
};

inline constexpr double kBandWidth = 1.95;

LagOneCurve lag_one_curve(std::span<const double> prices, std::span<const std::size_t> horizons,
                          LagOneStatistic statistic, const LmarchKernel& kernel, std::string label = {});

/// Per-path correlations, then mean and +-1.95 sigma_MC across paths.
LagOneCurve mc_lag_one_bands(const EnsembleResult& ensemble, std::size_t asset, std::span<const std::size_t> horizons,
                             LagOneStatistic statistic, const LmarchKernel& kernel, std::size_t threads = 0);

struct CrossoverRow {
    std::string asset_id;
    double mu = 0.0;
    double sigma = 0.0;
    double crossover_years = 0.0;  ///< (sigma/mu)^2, +inf for mu = 0
    double sharpe = 0.0;           ///< mu/sigma
};

CrossoverRow crossover_row(std::string asset_id, double mu_annual, double sigma_annual);
std::vector<CrossoverRow> crossover_table(const CmaParameters& cma);

struct WealthRow {
    double horizon_years = 0.0;
    std::size_t step = 0;
    std::size_t paths = 0;
    double mean_drift = 0.0;      ///< (mean W/p0)^(1y/dT) - 1
    double stddev = 0.0;          ///< stddev of ln(W/p0) / sqrt(dT/1y)
    double stddev_wealth = 0.0;   ///< stddev of W/p0 / sqrt(dT/1y)
    double q01 = 0.0;             ///< lower empirical quantiles of W/p0
    double q05 = 0.0;
    double median = 0.0;
    double var_ratio = 0.0;       ///< q01 / q05
};

/// Lower empirical quantile: order statistic at ceil(q N) of a sorted sample.
double lower_quantile(std::span<const double> sorted, double q);

/// Terminal-wealth statistics of one asset at each horizon (in years).
/// Absorbed paths enter the log statistics at the absorbing threshold.
std::vector<WealthRow> wealth_statistics(const EnsembleResult& ensemble, std::span<const double> horizons_years,
                                         std::size_t asset = 0);

// ---------------------------------------------------------------------------
// Report container shared by every statistic, serialized by data_io.

struct Curve {
    std::string name;
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;
    std::vector<std::string> labels;  ///< optional per-row text (asset id); empty when unused
    std::vector<std::string> notes;
};

struct StatReport {
    std::string statistic;
    std::map<std::string, std::string> metadata;
    std::vector<Curve> curves;
};

Curve to_curve(const std::vector<WealthRow>& rows, std::string name);
Curve to_curve(const std::vector<CrossoverRow>& rows, std::string name);
Curve to_curve(const LagOneCurve& curve, std::string name);
Curve to_curve(const FoldedCdf& cdf, std::string name);

}  // namespace ltsim
