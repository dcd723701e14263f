#include "ltsim/path_simulator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>

#include "ltsim/errors.hpp"
#include "ltsim/parallel.hpp"

namespace ltsim {

std::vector<double> MarketHistory::series(std::size_t asset) const {
    std::vector<double> out(n_points());
    for (std::size_t k = 0; k < out.size(); ++k)
        out[k] = prices(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(asset));
    return out;
}

Eigen::VectorXd apply_absorbing(Eigen::VectorXd prices, const Eigen::VectorXd& p_min, std::vector<bool>& absorbed) {
    if (p_min.size() != prices.size() || absorbed.size() != static_cast<std::size_t>(prices.size()))
        throw ValidationError("absorbing rule dimension mismatch");
    for (Eigen::Index a = 0; a < prices.size(); ++a) {
        auto flag = absorbed[static_cast<std::size_t>(a)];
        if (flag || prices(a) <= p_min(a)) {
            prices(a) = 0.0;
            flag = true;
        }
    }
    return prices;
}

// ---------------------------------------------------------------------------

std::vector<double> EnsembleResult::series(std::size_t path, std::size_t asset) const {
    std::vector<double> out(n_points());
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = price(path, k, asset);
    return out;
}

std::optional<std::size_t> EnsembleResult::point_of_step(std::size_t step) const {
    const auto it = std::lower_bound(steps.begin(), steps.end(), step);
    if (it == steps.end() || *it != step) return std::nullopt;
    return static_cast<std::size_t>(it - steps.begin());
}

bool EnsembleResult::path_ok(std::size_t path) const {
    return std::none_of(faults.begin(), faults.end(), [&](const PathFault& f) { return f.path == path; });
}

// ---------------------------------------------------------------------------

PathSimulator::PathSimulator(ProcessSpec spec, CmaParameters cma, TimeGrid grid,
                             std::optional<MarketHistory> seed_history, double eps_min)
    : spec_(std::move(spec)), cma_(std::move(cma)), grid_(grid), history_(std::move(seed_history)), eps_min_(eps_min) {
    require_valid(cma_, eps_min_);
    validate_spec(spec_);
    step_ = scale_to_step(cma_, grid_);
    sigma_cma_step_ = grid_.step_years() * covariance_from_cma(cma_);
    constant_root_ = matrix_sqrt(sigma_cma_step_, eps_min_);
    horizons_ = nrc_horizons_per_asset(spec_, cma_);
    if (spec_.covariance.model == CovarianceModel::AffineLmarch) {
        kernel_ = std::make_shared<const LmarchKernel>(build_kernel(spec_.covariance.kernel));
        w_inf_ = spec_.effective_w_inf();
    }
    if (spec_.innovations.model == InnovationModel::NonCentralStudent)
        law_ = build_student_params(spec_.innovations.nu, gamma_asym_per_asset(spec_, cma_), eps_min_);
    else
        law_ = NormalInnovations{};

    if (history_) {
        if (history_->asset_ids != cma_.asset_ids)
            throw ValidationError("seed history assets must match the CMA assets in order");
        if (history_->n_points() < 1) throw ValidationError("seed history is empty");
        if ((history_->prices.array() <= 0.0).any()) throw ValidationError("seed history prices must be positive");
    }
}

Eigen::VectorXd PathSimulator::default_initial_prices() const {
    if (history_) return history_->prices.row(history_->prices.rows() - 1).transpose();
    return Eigen::VectorXd::Constant(static_cast<Eigen::Index>(cma_.size()), 100.0);
}

PathState PathSimulator::start_path(std::uint64_t master_seed, std::size_t path_id,
                                    const Eigen::VectorXd& initial_prices) const {
    const auto n = static_cast<Eigen::Index>(cma_.size());
    Eigen::VectorXd p0 = initial_prices.size() == 0 ? default_initial_prices() : initial_prices;
    if (p0.size() != n) throw ValidationError("initial prices dimension mismatch");
    if ((p0.array() <= 0.0).any()) throw ValidationError("initial prices must be positive");
    if (history_ && initial_prices.size() != 0 && !initial_prices.isApprox(default_initial_prices()))
        throw ValidationError("a seeded path starts from the last history prices");

    Eigen::VectorXd du = Eigen::VectorXd::Zero(n);
    if (spec_.du) {
        RngStream du_stream(master_seed, path_id, StreamPurpose::DriftUncertainty);
        du = du_draw(du_stream, cma_.sigma_annual, spec_.du->calibration_years, grid_.step_years());
    }

    DriftState drift(step_.mu, du, horizons_);
    std::optional<CovarianceState> cov;
    if (kernel_) cov.emplace(kernel_, sigma_cma_step_, step_.mu, w_inf_);

    if (history_) {
        const auto rows = static_cast<std::size_t>(history_->prices.rows());
        const std::size_t price_rows = std::min(rows, drift.window_depth());
        for (std::size_t k = rows - price_rows; k < rows; ++k)
            drift.push_prices(history_->prices.row(static_cast<Eigen::Index>(k)).transpose());
        if (cov) {
            const std::size_t ret_rows = std::min(rows - 1, cov->kernel().l_max);
            for (std::size_t k = rows - ret_rows; k < rows; ++k) {
                const Eigen::VectorXd prev = history_->prices.row(static_cast<Eigen::Index>(k - 1)).transpose();
                const Eigen::VectorXd now = history_->prices.row(static_cast<Eigen::Index>(k)).transpose();
                cov->push_return((now.array() / prev.array() - 1.0).matrix());
            }
        }
    } else {
        drift.push_prices(p0);
    }

    Eigen::VectorXd p_min = spec_.p_min_absolute ? Eigen::VectorXd::Constant(n, *spec_.p_min_absolute)
                                                 : Eigen::VectorXd(p0 * spec_.p_min_fraction);
    return PathState{path_id,
                     0,
                     p0,
                     std::move(p_min),
                     std::vector<bool>(static_cast<std::size_t>(n), false),
                     std::move(drift),
                     std::move(cov),
                     RngStream(master_seed, path_id, StreamPurpose::Innovations),
                     false};
}

void PathSimulator::step(PathState& state, StepRecord* record) const {
    const auto n = static_cast<Eigen::Index>(cma_.size());
    const Eigen::VectorXd mu = state.drift.total_drift();

    Eigen::MatrixXd root_storage;
    const Eigen::MatrixXd* root = &constant_root_;
    if (state.covariance) {
        const SymmetricMatrix sigma = state.covariance->affine_covariance();
        try {
            if (n == 1) {
                const double v = sigma(0, 0);
                if (!(v > 0.0)) throw NotPositiveDefiniteError("non-positive conditional variance", v);
                root_storage = Eigen::MatrixXd::Constant(1, 1, std::sqrt(v));
            } else {
                root_storage = matrix_sqrt(sigma, eps_min_);
            }
        } catch (const NotPositiveDefiniteError& e) {
            throw NumericalFault(std::string("conditional covariance lost definiteness: ") + e.what(), state.path_id,
                                 state.step);
        }
        root = &root_storage;
    }

    const InnovationVector eps = state.zero_innovations ? InnovationVector(InnovationVector::Zero(n))
                                                        : sample_innovation(state.stream, law_, cma_.size());
    const Eigen::VectorXd r = mu + (*root) * eps;
    if (!r.allFinite()) throw NumericalFault("non-finite return", state.path_id, state.step);

    Eigen::VectorXd next = (state.prices.array() * (1.0 + r.array())).matrix();
    next = apply_absorbing(std::move(next), state.p_min, state.absorbed);
    if (!next.allFinite()) throw NumericalFault("non-finite price", state.path_id, state.step);

    state.drift.push_prices(next);
    if (state.covariance) state.covariance->push_return(r);
    state.prices = std::move(next);
    ++state.step;

    if (record) {
        record->drift = mu;
        record->sqrt_sigma = *root;
        record->innovation = eps;
        record->returns = r;
    }
}

EnsembleResult PathSimulator::simulate(std::size_t n_paths, std::uint64_t master_seed,
                                       const SimulationOptions& options) const {
    EnsembleResult out;
    out.spec = spec_;
    out.cma = cma_;
    out.grid = grid_;
    out.master_seed = master_seed;
    out.seeded_history = history_.has_value();
    out.n_paths = n_paths;
    if (options.retained_steps.empty()) {
        out.steps.resize(grid_.n_steps() + 1);
        for (std::size_t k = 0; k <= grid_.n_steps(); ++k) out.steps[k] = k;
    } else {
        out.steps = options.retained_steps;
        std::sort(out.steps.begin(), out.steps.end());
        out.steps.erase(std::unique(out.steps.begin(), out.steps.end()), out.steps.end());
        if (out.steps.back() > grid_.n_steps()) throw ValidationError("retained step beyond the time grid");
    }
    // configuration errors surface as ValidationError before any path runs
    if (n_paths > 0) (void)start_path(master_seed, 0, options.initial_prices);

    const std::size_t n = cma_.size();
    const std::size_t points = out.steps.size();
    out.prices.assign(n_paths * points * n, 0.0);

    std::mutex fault_mutex;
    std::vector<PathFault> faults;
    std::atomic<bool> stop{false};

    parallel_for(n_paths, options.threads, [&](std::size_t path) {
        if (stop.load(std::memory_order_relaxed)) return;
        double* block = out.prices.data() + path * points * n;
        std::size_t step_reached = 0;
        try {
            PathState state = start_path(master_seed, path, options.initial_prices);
            state.zero_innovations = options.zero_innovations;
            std::size_t next_point = 0;
            auto store = [&] {
                while (next_point < points && out.steps[next_point] == state.step) {
                    for (std::size_t a = 0; a < n; ++a)
                        block[next_point * n + a] = state.prices(static_cast<Eigen::Index>(a));
                    ++next_point;
                }
            };
            store();
            for (std::size_t k = 0; k < grid_.n_steps() && next_point < points; ++k) {
                step_reached = k;
                step(state, nullptr);
                store();
            }
        } catch (const std::exception& e) {
            std::fill(block, block + points * n, std::numeric_limits<double>::quiet_NaN());
            std::lock_guard lock(fault_mutex);
            const auto* nf = dynamic_cast<const NumericalFault*>(&e);
            faults.push_back({path, nf ? nf->step() : step_reached, nf ? nf->reason() : std::string(e.what())});
            if (options.fault_mode == FaultMode::FailFast) stop.store(true);
        }
    });

    std::sort(faults.begin(), faults.end(), [](const PathFault& a, const PathFault& b) { return a.path < b.path; });
    if (!faults.empty() && options.fault_mode == FaultMode::FailFast) {
        const auto& f = faults.front();
        throw NumericalFault(f.message, f.path, f.step);
    }
    out.faults = std::move(faults);
    return out;
}

EnsembleResult simulate_ensemble(const ProcessSpec& spec, const CmaParameters& cma, const TimeGrid& grid,
                                 std::size_t n_paths, std::uint64_t master_seed,
                                 const std::optional<MarketHistory>& seed_history, const SimulationOptions& options) {
    return PathSimulator(spec, cma, grid, seed_history).simulate(n_paths, master_seed, options);
}

}  // namespace ltsim
