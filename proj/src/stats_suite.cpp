#include "ltsim/stats_suite.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "ltsim/errors.hpp"
#include "ltsim/parallel.hpp"

namespace ltsim {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void require_full_grid(const EnsembleResult& e) {
    if (e.steps.size() != e.grid.n_steps() + 1)
        throw ValidationError("statistic needs every grid step of the ensemble (no streaming retention)");
}

double sample_stddev(std::span<const double> v) {
    if (v.size() < 2) return 0.0;
    const double m = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size() - 1));
}

}  // namespace

double realized_return(double p_now, double p_base, ReturnMode mode) {
    if (!(p_base > 0.0)) throw ValidationError("return undefined: base price is not positive");
    if (mode == ReturnMode::Log) {
        if (!(p_now > 0.0)) throw ValidationError("log return undefined: price is not positive");
        return std::log(p_now / p_base);
    }
    return (p_now - p_base) / p_base;
}

std::vector<double> horizon_returns(std::span<const double> prices, std::size_t horizon, ReturnMode mode) {
    if (horizon == 0) throw ValidationError("return horizon must be at least one step");
    std::vector<double> out(prices.size(), kNaN);
    for (std::size_t t = horizon; t < prices.size(); ++t) {
        const double base = prices[t - horizon];
        if (!(base > 0.0) || (mode == ReturnMode::Log && !(prices[t] > 0.0))) continue;
        out[t] = realized_return(prices[t], base, mode);
    }
    return out;
}

double annualize(double value, double dt_years, AnnualizeKind kind) {
    if (!(dt_years > 0.0)) throw ValidationError("annualization horizon must be positive");
    switch (kind) {
        case AnnualizeKind::Location:
            return value / dt_years;
        case AnnualizeKind::ReturnShape:
        case AnnualizeKind::Volatility:
            return value / std::sqrt(dt_years);
    }
    return value;
}

// ---------------------------------------------------------------------------

SeriesSample realized_innovations(std::span<const double> prices, std::size_t horizon, const Forecast& drift,
                                  const Forecast& volatility, std::string label) {
    if (horizon == 0) throw ValidationError("innovation horizon must be at least one step");
    SeriesSample out{{}, std::move(label), horizon};
    for (std::size_t t = 0; t + horizon < prices.size(); ++t) {
        if (!(prices[t] > 0.0) || !(prices[t + horizon] > 0.0)) break;
        const double sigma = volatility(t);
        if (std::isnan(sigma)) continue;
        if (!(sigma >= kVolatilityFloor))
            throw NumericalFault("degenerate volatility forecast at grid point " + std::to_string(t));
        const double r = realized_return(prices[t + horizon], prices[t]);
        out.values.push_back((r - drift(t)) / sigma);
    }
    return out;
}

std::vector<double> lmarch_volatility(std::span<const double> prices, const LmarchKernel& kernel, double w_inf,
                                      double long_run_variance, std::size_t horizon, double mean) {
    const std::size_t n = prices.size();
    std::vector<double> out(n, kNaN);
    if (n < 2) return out;
    const HorizonWeights hw = horizon_weights(kernel, w_inf, horizon);
    // rev[j] holds the square of the return ending at point n - 1 - j
    std::vector<double> rev(n - 1, 0.0);
    std::size_t last = n - 1;
    for (std::size_t k = 1; k < n; ++k) {
        if (!(prices[k - 1] > 0.0) || !(prices[k] > 0.0)) {
            last = k - 1;
            break;
        }
        const double d = prices[k] / prices[k - 1] - 1.0 - mean;
        rev[n - 1 - k] = d * d;
    }
    const auto h = static_cast<double>(horizon);
    for (std::size_t t = 1; t <= last; ++t) {
        const std::span<const double> recent(rev.data() + (n - 1 - t), t);
        out[t] = std::sqrt(h * apply_horizon_weights(hw, recent, long_run_variance));
    }
    return out;
}

SeriesSample simulated_innovations(const EnsembleResult& ensemble, std::size_t asset, std::size_t horizon) {
    require_full_grid(ensemble);
    if (asset >= ensemble.n_assets()) throw ValidationError("asset index out of range");
    const StepParameters step = scale_to_step(ensemble.cma, ensemble.grid);
    const auto a = static_cast<Eigen::Index>(asset);
    const double mu = step.mu(a);
    const double var_step = step.sigma(a) * step.sigma(a);
    const double drift_h = std::pow(1.0 + mu, static_cast<double>(horizon)) - 1.0;
    const bool lmarch = ensemble.spec.covariance.model == CovarianceModel::AffineLmarch;
    const LmarchKernel kernel = build_kernel(ensemble.spec.covariance.kernel);
    const double w_inf = ensemble.spec.effective_w_inf();
    const double constant_vol = std::sqrt(var_step * static_cast<double>(horizon));

    SeriesSample out{{}, ensemble.cma.asset_ids[asset], horizon};
    for (std::size_t p = 0; p < ensemble.n_paths; ++p) {
        if (!ensemble.path_ok(p)) continue;
        const std::vector<double> prices = ensemble.series(p, asset);
        std::vector<double> vol;
        if (lmarch) vol = lmarch_volatility(prices, kernel, w_inf, var_step, horizon, mu);
        const Forecast drift = [&](std::size_t) { return drift_h; };
        const Forecast sigma = [&](std::size_t t) { return lmarch ? vol[t] : constant_vol; };
        const SeriesSample s = realized_innovations(prices, horizon, drift, sigma);
        out.values.insert(out.values.end(), s.values.begin(), s.values.end());
    }
    return out;
}

SeriesSample empirical_innovations(const MarketHistory& history, std::size_t asset, std::size_t horizon) {
    if (asset >= history.n_assets()) throw ValidationError("asset index out of range");
    const std::vector<double> prices = history.series(asset);
    if (prices.size() < horizon + 2) throw InsufficientDataError("history shorter than the innovation horizon");
    double mean = 0.0;
    for (std::size_t k = 1; k < prices.size(); ++k) mean += prices[k] / prices[k - 1] - 1.0;
    mean /= static_cast<double>(prices.size() - 1);
    const double drift_h = std::pow(1.0 + mean, static_cast<double>(horizon)) - 1.0;
    const std::vector<double> vol = lmarch_volatility(prices, build_kernel(KernelConfig{}), 0.0, 0.0, horizon, mean);
    return realized_innovations(
        prices, horizon, [&](std::size_t) { return drift_h; }, [&](std::size_t t) { return vol[t]; },
        history.asset_ids[asset]);
}

// ---------------------------------------------------------------------------

double FoldedCdf::cdf_at(double value) const {
    const auto count = static_cast<std::size_t>(std::upper_bound(x.begin(), x.end(), value) - x.begin());
    if (count == 0) return 0.0;
    return (static_cast<double>(count) - 0.5) / static_cast<double>(x.size());
}

double FoldedCdf::fold_at(double value) const {
    const double f = cdf_at(value);
    return std::min(f, 1.0 - f);
}

FoldedCdf folded_cdf(std::vector<double> sample) {
    if (sample.size() < 2) throw InsufficientDataError("folded cdf needs at least two observations");
    for (double v : sample)
        if (!std::isfinite(v)) throw ValidationError("folded cdf sample contains a non-finite value");
    std::sort(sample.begin(), sample.end());
    FoldedCdf out;
    const auto n = static_cast<double>(sample.size());
    out.cdf.resize(sample.size());
    out.fold.resize(sample.size());
    for (std::size_t i = 0; i < sample.size(); ++i) {
        out.cdf[i] = (static_cast<double>(i) + 0.5) / n;
        out.fold[i] = std::min(out.cdf[i], 1.0 - out.cdf[i]);
    }
    out.x = std::move(sample);
    return out;
}

// ---------------------------------------------------------------------------

double lag_one_correlation(std::span<const double> x, std::span<const double> y, std::size_t horizon,
                           std::size_t min_pairs) {
    if (x.size() != y.size()) throw ValidationError("lag-one legs must share the time grid");
    if (horizon == 0) throw ValidationError("lag-one horizon must be at least one step");
    std::size_t n = 0;
    double sx = 0.0, sy = 0.0;
    for (std::size_t t = 0; t + horizon < x.size(); ++t) {
        if (!std::isfinite(x[t]) || !std::isfinite(y[t + horizon])) continue;
        sx += x[t];
        sy += y[t + horizon];
        ++n;
    }
    if (n < std::max<std::size_t>(min_pairs, 2))
        throw InsufficientDataError("lag-one correlation at " + std::to_string(horizon) + " steps has " +
                                    std::to_string(n) + " pairs");
    const double mx = sx / static_cast<double>(n);
    const double my = sy / static_cast<double>(n);
    double cxy = 0.0, cxx = 0.0, cyy = 0.0;
    for (std::size_t t = 0; t + horizon < x.size(); ++t) {
        if (!std::isfinite(x[t]) || !std::isfinite(y[t + horizon])) continue;
        const double dx = x[t] - mx;
        const double dy = y[t + horizon] - my;
        cxy += dx * dy;
        cxx += dx * dx;
        cyy += dy * dy;
    }
    if (!(cxx > 0.0) || !(cyy > 0.0)) throw InsufficientDataError("lag-one correlation leg is constant");
    return std::clamp(cxy / std::sqrt(cxx * cyy), -1.0, 1.0);
}

std::string_view to_string(LagOneStatistic statistic) {
    return statistic == LagOneStatistic::Returns ? "returns" : "volatility";
}

double lag_one_statistic(std::span<const double> prices, std::size_t horizon, LagOneStatistic statistic,
                         const LmarchKernel& kernel) {
    if (statistic == LagOneStatistic::Returns) {
        const std::vector<double> r = horizon_returns(prices, horizon);
        return lag_one_correlation(r, r, horizon);
    }
    const std::size_t n = prices.size();
    std::vector<double> x = lmarch_volatility(prices, kernel, 0.0, 0.0, horizon);
    for (std::size_t t = 0; t < std::min(horizon, n); ++t) x[t] = kNaN;
    for (double& v : x) v = std::log(v);

    std::vector<double> y(n, kNaN);
    const std::vector<double> one = horizon_returns(prices, 1);
    double window = 0.0;
    for (std::size_t t = 1; t < n; ++t) {
        if (std::isnan(one[t])) break;
        window += one[t] * one[t];
        if (t > horizon) window -= one[t - horizon] * one[t - horizon];
        if (t >= horizon) y[t] = 0.5 * std::log(std::max(window, 0.0) / static_cast<double>(horizon));
    }
    for (double& v : x)
        if (!std::isfinite(v)) v = kNaN;
    for (double& v : y)
        if (!std::isfinite(v)) v = kNaN;
    return lag_one_correlation(x, y, horizon);
}

LagOneCurve lag_one_curve(std::span<const double> prices, std::span<const std::size_t> horizons,
                          LagOneStatistic statistic, const LmarchKernel& kernel, std::string label) {
    LagOneCurve out;
    out.label = std::move(label);
    out.horizons.assign(horizons.begin(), horizons.end());
    for (std::size_t h : horizons) {
        try {
            out.correlation.push_back(lag_one_statistic(prices, h, statistic, kernel));
            out.samples.push_back(1);
        } catch (const InsufficientDataError& e) {
            out.correlation.push_back(kNaN);
            out.samples.push_back(0);
            out.notes.push_back(e.what());
        }
    }
    return out;
}

LagOneCurve mc_lag_one_bands(const EnsembleResult& ensemble, std::size_t asset, std::span<const std::size_t> horizons,
                             LagOneStatistic statistic, const LmarchKernel& kernel, std::size_t threads) {
    require_full_grid(ensemble);
    if (asset >= ensemble.n_assets()) throw ValidationError("asset index out of range");
    const std::size_t nh = horizons.size();
    std::vector<double> per_path(ensemble.n_paths * nh, kNaN);
    parallel_for(ensemble.n_paths, threads, [&](std::size_t p) {
        if (!ensemble.path_ok(p)) return;
        const std::vector<double> prices = ensemble.series(p, asset);
        for (std::size_t i = 0; i < nh; ++i) {
            try {
                per_path[p * nh + i] = lag_one_statistic(prices, horizons[i], statistic, kernel);
            } catch (const InsufficientDataError&) {
            }
        }
    });

    LagOneCurve out;
    out.label = ensemble.cma.asset_ids[asset];
    out.horizons.assign(horizons.begin(), horizons.end());
    std::vector<double> values;
    for (std::size_t i = 0; i < nh; ++i) {
        values.clear();
        for (std::size_t p = 0; p < ensemble.n_paths; ++p)
            if (std::isfinite(per_path[p * nh + i])) values.push_back(per_path[p * nh + i]);
        out.samples.push_back(values.size());
        if (values.empty()) {
            out.correlation.push_back(kNaN);
            out.band.push_back(kNaN);
            out.notes.push_back("no path has enough pairs at " + std::to_string(horizons[i]) + " steps");
            continue;
        }
        out.correlation.push_back(std::accumulate(values.begin(), values.end(), 0.0) /
                                  static_cast<double>(values.size()));
        out.band.push_back(kBandWidth * sample_stddev(values));
    }
    return out;
}

// ---------------------------------------------------------------------------

CrossoverRow crossover_row(std::string asset_id, double mu_annual, double sigma_annual) {
    if (!(sigma_annual > 0.0)) throw ValidationError("cross-over needs a positive volatility");
    CrossoverRow row{std::move(asset_id), mu_annual, sigma_annual, 0.0, mu_annual / sigma_annual};
    row.crossover_years = mu_annual == 0.0 ? std::numeric_limits<double>::infinity()
                                           : (sigma_annual / mu_annual) * (sigma_annual / mu_annual);
    return row;
}

std::vector<CrossoverRow> crossover_table(const CmaParameters& cma) {
    std::vector<CrossoverRow> out;
    out.reserve(cma.size());
    for (std::size_t a = 0; a < cma.size(); ++a) {
        const auto i = static_cast<Eigen::Index>(a);
        out.push_back(crossover_row(cma.asset_ids[a], cma.mu_annual(i), cma.sigma_annual(i)));
    }
    return out;
}

double lower_quantile(std::span<const double> sorted, double q) {
    if (sorted.empty()) throw InsufficientDataError("quantile of an empty sample");
    if (!(q > 0.0 && q <= 1.0)) throw ValidationError("quantile level must lie in (0, 1]");
    const auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(sorted.size())));
    return sorted[std::clamp<std::size_t>(rank, 1, sorted.size()) - 1];
}

std::vector<WealthRow> wealth_statistics(const EnsembleResult& ensemble, std::span<const double> horizons_years,
                                         std::size_t asset) {
    if (asset >= ensemble.n_assets()) throw ValidationError("asset index out of range");
    const auto start = ensemble.point_of_step(0);
    if (!start) throw ValidationError("wealth statistics need the initial grid point");

    std::vector<WealthRow> out;
    std::vector<double> ratio;
    std::vector<double> logs;
    for (double years : horizons_years) {
        if (!(years > 0.0)) throw ValidationError("wealth horizon must be positive");
        const std::size_t step = ensemble.grid.steps_for_years(years);
        if (step > ensemble.grid.n_steps()) throw ValidationError("wealth horizon lies beyond the time grid");
        const auto point = ensemble.point_of_step(step);
        if (!point) throw ValidationError("wealth horizon is not a retained grid step");

        ratio.clear();
        logs.clear();
        for (std::size_t p = 0; p < ensemble.n_paths; ++p) {
            if (!ensemble.path_ok(p)) continue;
            const double p0 = ensemble.price(p, *start, asset);
            const double w = ensemble.price(p, *point, asset) / p0;
            const double floor = ensemble.spec.p_min_absolute ? *ensemble.spec.p_min_absolute / p0
                                                              : ensemble.spec.p_min_fraction;
            ratio.push_back(w);
            logs.push_back(std::log(std::max(w, floor)));
        }
        if (ratio.empty()) throw InsufficientDataError("no valid path for wealth statistics");

        const double dt = ensemble.grid.year_fraction(step);
        const double mean = std::accumulate(ratio.begin(), ratio.end(), 0.0) / static_cast<double>(ratio.size());
        WealthRow row;
        row.horizon_years = dt;
        row.step = step;
        row.paths = ratio.size();
        row.mean_drift = std::pow(mean, 1.0 / dt) - 1.0;
        row.stddev = sample_stddev(logs) / std::sqrt(dt);
        row.stddev_wealth = sample_stddev(ratio) / std::sqrt(dt);
        std::sort(ratio.begin(), ratio.end());
        row.q01 = lower_quantile(ratio, 0.01);
        row.q05 = lower_quantile(ratio, 0.05);
        row.median = lower_quantile(ratio, 0.5);
        row.var_ratio = row.q05 > 0.0 ? row.q01 / row.q05 : kNaN;
        out.push_back(row);
    }
    return out;
}

// ---------------------------------------------------------------------------

Curve to_curve(const std::vector<WealthRow>& rows, std::string name) {
    Curve c{std::move(name),
            {"horizon_years", "step", "paths", "mean_drift", "stddev", "stddev_wealth", "q01", "q05", "median",
             "var_ratio"},
            {},
            {},
            {}};
    for (const auto& r : rows)
        c.rows.push_back({r.horizon_years, static_cast<double>(r.step), static_cast<double>(r.paths), r.mean_drift,
                          r.stddev, r.stddev_wealth, r.q01, r.q05, r.median, r.var_ratio});
    return c;
}

Curve to_curve(const std::vector<CrossoverRow>& rows, std::string name) {
    Curve c{std::move(name), {"mu", "sigma", "crossover_years", "sharpe"}, {}, {}, {}};
    for (const auto& r : rows) {
        c.rows.push_back({r.mu, r.sigma, r.crossover_years, r.sharpe});
        c.labels.push_back(r.asset_id);
    }
    return c;
}

Curve to_curve(const LagOneCurve& curve, std::string name) {
    Curve c{std::move(name), {"horizon_steps", "correlation", "samples"}, {}, {}, curve.notes};
    if (curve.has_band()) c.columns.insert(c.columns.end(), {"band", "lower", "upper"});
    for (std::size_t i = 0; i < curve.horizons.size(); ++i) {
        std::vector<double> row{static_cast<double>(curve.horizons[i]), curve.correlation[i],
                                static_cast<double>(curve.samples[i])};
        if (curve.has_band())
            row.insert(row.end(), {curve.band[i], curve.correlation[i] - curve.band[i],
                                   curve.correlation[i] + curve.band[i]});
        c.rows.push_back(std::move(row));
    }
    return c;
}

Curve to_curve(const FoldedCdf& cdf, std::string name) {
    Curve c{std::move(name), {"x", "cdf", "fold"}, {}, {}, {}};
    c.rows.reserve(cdf.size());
    for (std::size_t i = 0; i < cdf.size(); ++i) c.rows.push_back({cdf.x[i], cdf.cdf[i], cdf.fold[i]});
    return c;
}

}  // namespace ltsim
