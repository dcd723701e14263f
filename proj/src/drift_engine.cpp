#include "ltsim/drift_engine.hpp"

#include <algorithm>
#include <cmath>

#include "ltsim/errors.hpp"

namespace ltsim {

Eigen::VectorXd du_draw(RngStream& stream, const Eigen::VectorXd& sigma_annual, double dt_cal_years,
                        double step_years) {
    if (!(dt_cal_years > 0.0)) throw ValidationError("drift uncertainty calibration span must be positive");
    Eigen::VectorXd offset(sigma_annual.size());
    const double scale = step_years / std::sqrt(dt_cal_years);
    for (Eigen::Index i = 0; i < offset.size(); ++i) offset(i) = sigma_annual(i) * scale * stream.normal();
    return offset;
}

double discount_factor(double mu_step, std::size_t n_steps) {
    return std::pow(1.0 + mu_step, -static_cast<double>(n_steps));
}

DriftState::DriftState(Eigen::VectorXd mu_base_step, Eigen::VectorXd du_offset,
                       std::vector<std::vector<NrcHorizon>> horizons_per_asset)
    : mu_base_(std::move(mu_base_step)), du_offset_(std::move(du_offset)), horizons_(std::move(horizons_per_asset)) {
    const auto n = mu_base_.size();
    if (du_offset_.size() == 0) du_offset_ = Eigen::VectorXd::Zero(n);
    if (du_offset_.size() != n || static_cast<Eigen::Index>(horizons_.size()) != n)
        throw ValidationError("drift state dimension mismatch");
    std::size_t longest = 0;
    for (const auto& list : horizons_)
        for (const auto& h : list) {
            if (h.steps == 0) throw ValidationError("NRC horizon must be at least one step");
            longest = std::max(longest, h.steps);
        }
    depth_ = longest + 1;
    window_ = Eigen::MatrixXd::Zero(n, static_cast<Eigen::Index>(depth_));
}

void DriftState::push_prices(const Eigen::VectorXd& prices) {
    if (prices.size() != mu_base_.size()) throw ValidationError("price vector dimension mismatch");
    head_ = count_ == 0 ? 0 : (head_ + 1) % depth_;
    window_.col(static_cast<Eigen::Index>(head_)) = prices;
    ++count_;
}

double DriftState::lagged(std::size_t asset, std::size_t lag) const {
    const std::size_t col = (head_ + depth_ - lag) % depth_;
    return window_(static_cast<Eigen::Index>(asset), static_cast<Eigen::Index>(col));
}

Eigen::VectorXd DriftState::nrc_term() const {
    const auto n = mu_base_.size();
    Eigen::VectorXd out = Eigen::VectorXd::Zero(n);
    if (count_ == 0) return out;
    for (Eigen::Index a = 0; a < n; ++a) {
        const auto ai = static_cast<std::size_t>(a);
        const double now = lagged(ai, 0);
        if (now == 0.0) continue;
        double sum = 0.0;
        for (const auto& h : horizons_[ai]) {
            if (h.steps >= available()) continue;
            const double past = lagged(ai, h.steps);
            if (past == 0.0) continue;
            const double forward = past / discount_factor(mu_base_(a), h.steps);
            sum += h.gamma / static_cast<double>(h.steps) * (now / forward - 1.0);
        }
        out(a) = sum;
    }
    return out;
}

Eigen::VectorXd DriftState::total_drift() const {
    Eigen::VectorXd mu = mu_base_ + du_offset_ + nrc_term();
    if (count_ > 0)
        for (Eigen::Index a = 0; a < mu.size(); ++a)
            if (lagged(static_cast<std::size_t>(a), 0) == 0.0) mu(a) = 0.0;
    return mu;
}

}  // namespace ltsim
