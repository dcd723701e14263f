#include "ltsim/covariance_engine.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ltsim/errors.hpp"

namespace ltsim {

namespace {

void check_taus(std::span<const double> taus, std::size_t l_max) {
    if (taus.empty()) throw ValidationError("kernel needs at least one time constant");
    for (double tau : taus)
        if (!(tau > 0.0) || !std::isfinite(tau)) throw ValidationError("kernel time constants must be positive");
    if (!(static_cast<double>(l_max) > *std::max_element(taus.begin(), taus.end())))
        throw ValidationError("kernel truncation l_max must exceed the largest time constant");
}

}  // namespace

LmarchKernel build_kernel(std::span<const double> taus, std::span<const double> component_weights,
                          std::size_t l_max) {
    check_taus(taus, l_max);
    if (component_weights.size() != taus.size())
        throw ValidationError("kernel needs one component weight per time constant");
    const double total = std::accumulate(component_weights.begin(), component_weights.end(), 0.0);
    for (double c : component_weights)
        if (!(c >= 0.0)) throw ValidationError("kernel component weights must be non-negative");
    if (!(total > 0.0)) throw ValidationError("kernel component weights sum to zero");

    LmarchKernel k;
    k.taus.assign(taus.begin(), taus.end());
    k.l_max = l_max;
    for (double c : component_weights) k.component_weights.push_back(c / total);
    k.weights.assign(l_max, 0.0);
    for (std::size_t i = 0; i < taus.size(); ++i) {
        const double mu = std::exp(-1.0 / taus[i]);
        double term = k.component_weights[i] * (1.0 - mu);
        for (std::size_t l = 0; l < l_max; ++l) {
            k.weights[l] += term;
            term *= mu;
        }
    }
    const double sum = std::accumulate(k.weights.begin(), k.weights.end(), 0.0);
    for (double& w : k.weights) w /= sum;
    return k;
}

LmarchKernel build_kernel(std::span<const double> taus, std::size_t l_max, double decay) {
    check_taus(taus, l_max);
    if (!(decay > 1.0)) throw ValidationError("kernel decay must exceed 1");
    std::vector<double> c;
    c.reserve(taus.size());
    for (double tau : taus) {
        const double v = 1.0 - std::log(tau) / std::log(decay);
        if (!(v > 0.0)) throw ValidationError("kernel time constants must be below the decay parameter");
        c.push_back(v);
    }
    return build_kernel(taus, c, l_max);
}

LmarchKernel build_kernel(const KernelConfig& config) { return build_kernel(config.taus, config.l_max, config.decay); }

LmarchKernel kernel_from_weights(std::vector<double> weights) {
    if (weights.empty()) throw ValidationError("kernel needs at least one lag");
    const double sum = std::accumulate(weights.begin(), weights.end(), 0.0);
    for (double w : weights)
        if (!(w >= 0.0)) throw ValidationError("kernel weights must be non-negative");
    if (!(sum > 0.0)) throw ValidationError("kernel weights sum to zero");
    LmarchKernel k;
    k.l_max = weights.size();
    for (double& w : weights) w /= sum;
    k.weights = std::move(weights);
    return k;
}

HorizonWeights horizon_weights(const LmarchKernel& kernel, double w_inf, std::size_t horizon) {
    if (horizon == 0) throw ValidationError("forecast horizon must be at least one step");
    const std::size_t L = kernel.l_max;
    // Each one-step forecast v_j = c_j * LR + sum_l h_j[l] x(t - l).
    std::vector<double> c(horizon, 0.0);
    std::vector<std::vector<double>> h(horizon, std::vector<double>(L, 0.0));
    for (std::size_t j = 0; j < horizon; ++j) {
        c[j] = w_inf;
        auto& hj = h[j];
        for (std::size_t l = 0; l < L; ++l) {
            const double wl = (1.0 - w_inf) * kernel.weights[l];
            if (l < j) {
                // x(t + j - l) lies in the future: replaced by the forecast v_{j-l-1}
                const std::size_t src = j - l - 1;
                c[j] += wl * c[src];
                for (std::size_t m = 0; m < L; ++m) hj[m] += wl * h[src][m];
            } else {
                hj[l - j] += wl;
            }
        }
    }
    HorizonWeights out;
    out.horizon = horizon;
    out.lags.assign(L, 0.0);
    const double inv = 1.0 / static_cast<double>(horizon);
    for (std::size_t j = 0; j < horizon; ++j) {
        out.long_run += inv * c[j];
        for (std::size_t m = 0; m < L; ++m) out.lags[m] += inv * h[j][m];
    }
    return out;
}

double apply_horizon_weights(const HorizonWeights& weights, std::span<const double> squares_recent_first,
                             double long_run_variance) {
    const std::size_t avail = std::min(squares_recent_first.size(), weights.lags.size());
    if (avail == 0) throw InsufficientDataError("variance forecast needs at least one past return");
    double acc = 0.0;
    double used = 0.0;
    for (std::size_t l = 0; l < avail; ++l) {
        acc += weights.lags[l] * squares_recent_first[l];
        used += weights.lags[l];
    }
    if (avail < weights.lags.size()) {
        const double mass = std::accumulate(weights.lags.begin(), weights.lags.end(), 0.0);
        if (used > 0.0) acc *= mass / used;
    }
    return weights.long_run * long_run_variance + acc;
}

double rma_variance(std::span<const double> returns, std::size_t required) {
    if (returns.empty() || returns.size() < required)
        throw InsufficientDataError("rectangular volatility window is incomplete");
    double s = 0.0;
    for (double r : returns) s += r * r;
    return s / static_cast<double>(returns.size());
}

// ---------------------------------------------------------------------------

CovarianceState::CovarianceState(std::shared_ptr<const LmarchKernel> kernel, SymmetricMatrix sigma_cma_step,
                                 Eigen::VectorXd mu_step, double w_inf)
    : kernel_(std::move(kernel)), sigma_cma_(std::move(sigma_cma_step)), mu_(std::move(mu_step)), w_inf_(w_inf) {
    if (!kernel_ || kernel_->l_max == 0) throw ValidationError("covariance state needs a kernel");
    if (!(w_inf >= 0.0 && w_inf <= 1.0)) throw ValidationError("w_inf must lie in [0, 1]");
    if (static_cast<std::size_t>(mu_.size()) != sigma_cma_.dimension())
        throw ValidationError("covariance state dimension mismatch");
    packed_ = SymmetricMatrix::packed_size(sigma_cma_.dimension());
    outer_.resize(kernel_->l_max * packed_);
    const auto p = sigma_cma_.packed();
    for (std::size_t s = 0; s < kernel_->l_max; ++s) std::copy(p.begin(), p.end(), outer_.begin() + s * packed_);
}

std::span<const double> CovarianceState::slot(std::size_t lag) const {
    const std::size_t L = kernel_->l_max;
    const std::size_t s = (head_ + L - lag) % L;
    return {outer_.data() + s * packed_, packed_};
}

void CovarianceState::push_return(const Eigen::VectorXd& r) {
    if (r.size() != mu_.size()) throw ValidationError("return vector dimension mismatch");
    head_ = (head_ + 1) % kernel_->l_max;
    double* dst = outer_.data() + head_ * packed_;
    const Eigen::VectorXd d = r - mu_;
    const auto n = d.size();
    std::size_t k = 0;
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j <= i; ++j) dst[k++] = d(i) * d(j);
}

SymmetricMatrix CovarianceState::linear_covariance() const {
    SymmetricMatrix out(sigma_cma_.dimension(), 0.0);
    auto acc = out.packed();
    const auto& w = kernel_->weights;
    for (std::size_t l = 0; l < kernel_->l_max; ++l) {
        const auto s = slot(l);
        const double wl = w[l];
        for (std::size_t k = 0; k < packed_; ++k) acc[k] += wl * s[k];
    }
    return out;
}

SymmetricMatrix CovarianceState::affine_covariance() const {
    if (w_inf_ == 1.0) return sigma_cma_;
    SymmetricMatrix out = linear_covariance();
    auto acc = out.packed();
    const auto cma = sigma_cma_.packed();
    for (std::size_t k = 0; k < packed_; ++k) acc[k] = w_inf_ * cma[k] + (1.0 - w_inf_) * acc[k];
    return out;
}

Eigen::VectorXd CovarianceState::variance_forecast(std::size_t horizon) const {
    return variance_forecast(horizon_weights(*kernel_, w_inf_, horizon));
}

Eigen::VectorXd CovarianceState::variance_forecast(const HorizonWeights& weights) const {
    const auto n = static_cast<Eigen::Index>(sigma_cma_.dimension());
    Eigen::VectorXd out(n);
    std::vector<double> squares(kernel_->l_max);
    for (Eigen::Index a = 0; a < n; ++a) {
        const auto ai = static_cast<std::size_t>(a);
        const std::size_t diag = ai * (ai + 1) / 2 + ai;
        for (std::size_t l = 0; l < kernel_->l_max; ++l) squares[l] = slot(l)[diag];
        out(a) = apply_horizon_weights(weights, squares, sigma_cma_(ai, ai));
    }
    return out;
}

}  // namespace ltsim
