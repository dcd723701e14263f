#include "ltsim/market_model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "ltsim/errors.hpp"

namespace ltsim {

std::string_view to_string(AssetClass cls) {
    switch (cls) {
        case AssetClass::Equity: return "Equity";
        case AssetClass::FixedIncome: return "FixedIncome";
        case AssetClass::Alternative: return "Alternative";
    }
    return "Equity";
}

AssetClass asset_class_from_string(std::string_view text) {
    if (text == "Equity") return AssetClass::Equity;
    if (text == "FixedIncome" || text == "FI") return AssetClass::FixedIncome;
    if (text == "Alternative" || text == "Alt") return AssetClass::Alternative;
    throw ValidationError("unknown asset class '" + std::string(text) +
                          "' (expected Equity, FixedIncome or Alternative)");
}

// ---------------------------------------------------------------------------

TimeGrid::TimeGrid(double step_years, std::size_t n_steps, std::chrono::year_month_day origin)
    : step_years_(step_years), n_steps_(n_steps), origin_(origin) {
    if (!(step_years > 0.0) || !std::isfinite(step_years))
        throw ValidationError("time grid step length must be positive");
    if (n_steps < 1) throw ValidationError("time grid needs at least one step");
    if (!origin.ok()) throw ValidationError("time grid origin is not a valid date");
}

TimeGrid TimeGrid::monthly(std::size_t n_steps, std::chrono::year_month_day origin) {
    return TimeGrid(1.0 / 12.0, n_steps, origin);
}

std::size_t TimeGrid::steps_for_years(double years) const {
    if (years < 0.0) throw ValidationError("negative duration");
    return static_cast<std::size_t>(std::llround(years / step_years_));
}

bool TimeGrid::is_monthly() const noexcept { return std::abs(step_years_ * 12.0 - 1.0) < 1e-12; }

std::chrono::year_month_day TimeGrid::date_at(std::size_t k) const {
    using namespace std::chrono;
    if (!is_monthly()) return origin_;
    const year_month ym = year_month{origin_.year(), origin_.month()} + months{static_cast<int>(k)};
    return year_month_day{year_month_day_last{ym.year(), month_day_last{ym.month()}}};
}

// ---------------------------------------------------------------------------

SymmetricMatrix::SymmetricMatrix(std::size_t dimension, double fill)
    : dim_(dimension), data_(packed_size(dimension), fill) {}

SymmetricMatrix SymmetricMatrix::identity(std::size_t dimension) {
    SymmetricMatrix m(dimension, 0.0);
    for (std::size_t i = 0; i < dimension; ++i) m(i, i) = 1.0;
    return m;
}

SymmetricMatrix SymmetricMatrix::from_dense(const Eigen::MatrixXd& m, double tol) {
    if (m.rows() != m.cols()) throw ValidationError("matrix is not square");
    const auto n = static_cast<std::size_t>(m.rows());
    SymmetricMatrix out(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            const double lo = m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
            const double up = m(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i));
            if (std::abs(lo - up) > tol) {
                std::ostringstream os;
                os << "matrix is not symmetric at (" << i << ", " << j << "): " << lo << " vs " << up;
                throw ValidationError(os.str());
            }
            out(i, j) = lo;
        }
    }
    return out;
}

Eigen::MatrixXd SymmetricMatrix::dense() const {
    const auto n = static_cast<Eigen::Index>(dim_);
    Eigen::MatrixXd m(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j <= i; ++j) {
            const double v = (*this)(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
            m(i, j) = v;
            m(j, i) = v;
        }
    return m;
}

Eigen::VectorXd SymmetricMatrix::diagonal() const {
    Eigen::VectorXd d(static_cast<Eigen::Index>(dim_));
    for (std::size_t i = 0; i < dim_; ++i) d(static_cast<Eigen::Index>(i)) = (*this)(i, i);
    return d;
}

SymmetricMatrix& SymmetricMatrix::operator+=(const SymmetricMatrix& other) {
    if (other.dim_ != dim_) throw ValidationError("symmetric matrix dimension mismatch");
    for (std::size_t k = 0; k < data_.size(); ++k) data_[k] += other.data_[k];
    return *this;
}

SymmetricMatrix& SymmetricMatrix::operator*=(double factor) {
    for (double& v : data_) v *= factor;
    return *this;
}

double SymmetricMatrix::frobenius_norm() const {
    double s = 0.0;
    for (std::size_t i = 0; i < dim_; ++i)
        for (std::size_t j = 0; j <= i; ++j) {
            const double v = (*this)(i, j);
            s += (i == j ? 1.0 : 2.0) * v * v;
        }
    return std::sqrt(s);
}

// ---------------------------------------------------------------------------

namespace {

CmaValidation fail(CmaValidation::Issue issue, std::string message) {
    CmaValidation v;
    v.issue = issue;
    v.message = std::move(message);
    return v;
}

}  // namespace

CmaValidation validate_cma(const CmaParameters& cma, double eps_min) {
    using Issue = CmaValidation::Issue;
    const std::size_t n = cma.asset_ids.size();
    const auto ni = static_cast<Eigen::Index>(n);
    if (n == 0) return fail(Issue::DimensionMismatch, "CMA has no assets");
    if (cma.asset_classes.size() != n || cma.mu_annual.size() != ni || cma.sigma_annual.size() != ni ||
        cma.correlation.rows() != ni || cma.correlation.cols() != ni) {
        std::ostringstream os;
        os << "CMA dimension mismatch: " << n << " ids, " << cma.asset_classes.size() << " classes, "
           << cma.mu_annual.size() << " drifts, " << cma.sigma_annual.size() << " volatilities, "
           << cma.correlation.rows() << "x" << cma.correlation.cols() << " correlation";
        return fail(Issue::DimensionMismatch, os.str());
    }
    for (Eigen::Index i = 0; i < ni; ++i) {
        if (!std::isfinite(cma.mu_annual(i)) || !std::isfinite(cma.sigma_annual(i)))
            return fail(Issue::NonFinite, "non-finite drift or volatility for asset " + cma.asset_ids[i]);
        if (!(cma.sigma_annual(i) > 0.0)) {
            auto v = fail(Issue::NonPositiveSigma, "volatility must be positive for asset " + cma.asset_ids[i]);
            v.entry = {static_cast<std::size_t>(i), static_cast<std::size_t>(i)};
            return v;
        }
    }
    constexpr double tol = 1e-12;
    for (Eigen::Index i = 0; i < ni; ++i) {
        for (Eigen::Index j = 0; j < ni; ++j) {
            const double c = cma.correlation(i, j);
            const std::pair<std::size_t, std::size_t> at{static_cast<std::size_t>(i), static_cast<std::size_t>(j)};
            std::ostringstream where;
            where << "(" << i << ", " << j << ")";
            if (!std::isfinite(c)) {
                auto v = fail(Issue::NonFinite, "non-finite correlation at " + where.str());
                v.entry = at;
                return v;
            }
            if (std::abs(c - cma.correlation(j, i)) > tol) {
                auto v = fail(Issue::NotSymmetric, "correlation is not symmetric at " + where.str());
                v.entry = at;
                return v;
            }
            if (i == j && std::abs(c - 1.0) > tol) {
                auto v = fail(Issue::BadDiagonal, "correlation diagonal must be 1 at " + where.str());
                v.entry = at;
                return v;
            }
            if (std::abs(c) > 1.0 + tol) {
                auto v = fail(Issue::OutOfRange, "correlation outside [-1, 1] at " + where.str());
                v.entry = at;
                return v;
            }
        }
    }
    const auto eig = symmetric_eigen(SymmetricMatrix::from_dense(cma.correlation, tol));
    const double lo = eig.values(0);
    const double hi = eig.values(ni - 1);
    if (lo < eps_min * hi) {
        std::ostringstream os;
        os << "correlation matrix is not positive definite: smallest eigenvalue " << lo
           << " below floor " << eps_min * hi;
        auto v = fail(Issue::NotPositiveDefinite, os.str());
        v.min_eigenvalue = lo;
        return v;
    }
    CmaValidation ok;
    ok.min_eigenvalue = lo;
    return ok;
}

void require_valid(const CmaParameters& cma, double eps_min) {
    const auto v = validate_cma(cma, eps_min);
    if (v.ok()) return;
    if (v.issue == CmaValidation::Issue::NotPositiveDefinite)
        throw NotPositiveDefiniteError(v.message, v.min_eigenvalue.value_or(0.0));
    throw ValidationError(v.message);
}

StepParameters scale_to_step(const CmaParameters& cma, const TimeGrid& grid) {
    const double ratio = grid.step_years();
    return {cma.mu_annual * ratio, cma.sigma_annual * std::sqrt(ratio)};
}

SymmetricMatrix covariance_from_cma(const CmaParameters& cma) {
    require_valid(cma);
    const std::size_t n = cma.size();
    SymmetricMatrix cov(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j <= i; ++j) {
            const auto a = static_cast<Eigen::Index>(i);
            const auto b = static_cast<Eigen::Index>(j);
            cov(i, j) = i == j ? cma.sigma_annual(a) * cma.sigma_annual(a)
                               : cma.sigma_annual(a) * cma.sigma_annual(b) * cma.correlation(a, b);
        }
    return cov;
}

std::pair<Eigen::VectorXd, Eigen::MatrixXd> decompose_covariance(const SymmetricMatrix& cov) {
    const auto n = static_cast<Eigen::Index>(cov.dimension());
    Eigen::VectorXd sigma(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double v = cov(static_cast<std::size_t>(i), static_cast<std::size_t>(i));
        if (!(v > 0.0)) throw ValidationError("covariance has a non-positive diagonal entry");
        sigma(i) = std::sqrt(v);
    }
    Eigen::MatrixXd rho(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j)
            rho(i, j) = i == j ? 1.0
                               : cov(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) /
                                     (sigma(i) * sigma(j));
    return {sigma, rho};
}

SymmetricEigen symmetric_eigen(const SymmetricMatrix& m) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(m.dense());
    if (solver.info() != Eigen::Success) throw NumericalFault("eigendecomposition did not converge");
    return {solver.eigenvalues(), solver.eigenvectors()};
}

namespace {

Eigen::MatrixXd symmetric_power(const SymmetricMatrix& m, double power, double eps_min) {
    if (m.dimension() == 0) throw ValidationError("empty matrix");
    const auto eig = symmetric_eigen(m);
    const Eigen::Index n = eig.values.size();
    const double lo = eig.values(0);
    const double hi = eig.values(n - 1);
    if (!(hi > 0.0) || lo < eps_min * hi) {
        std::ostringstream os;
        os << "matrix is not positive definite: smallest eigenvalue " << lo << ", largest " << hi;
        throw NotPositiveDefiniteError(os.str(), lo);
    }
    const Eigen::VectorXd scaled = eig.values.array().pow(power).matrix();
    return eig.vectors * scaled.asDiagonal() * eig.vectors.transpose();
}

}  // namespace

Eigen::MatrixXd matrix_sqrt(const SymmetricMatrix& m, double eps_min) { return symmetric_power(m, 0.5, eps_min); }

Eigen::MatrixXd matrix_inverse_sqrt(const SymmetricMatrix& m, double eps_min) {
    return symmetric_power(m, -0.5, eps_min);
}

// ---------------------------------------------------------------------------

NrcConfig NrcConfig::defaults() {
    NrcConfig cfg;
    cfg.horizons[AssetClass::Equity] = {{6, 0.20}, {40, -0.45}};
    cfg.horizons[AssetClass::FixedIncome] = {{6, 0.20}, {40, -0.20}};
    cfg.horizons[AssetClass::Alternative] = {{6, 0.20}, {40, -0.20}};
    return cfg;
}

double ProcessSpec::effective_w_inf() const {
    if (covariance.w_inf) return *covariance.w_inf;
    return nrc ? 0.40 : 0.55;
}

void validate_spec(const ProcessSpec& spec) {
    if (spec.du && !(spec.du->calibration_years > 0.0))
        throw ValidationError("drift.du.calibration_years must be positive");
    if (spec.nrc) {
        for (const auto& [cls, list] : spec.nrc->horizons) {
            for (const auto& h : list) {
                if (h.steps == 0)
                    throw ValidationError("drift.nrc horizon for " + std::string(to_string(cls)) +
                                          " must be at least one step");
                if (!std::isfinite(h.gamma))
                    throw ValidationError("drift.nrc gamma for " + std::string(to_string(cls)) + " is not finite");
            }
        }
    }
    const double w = spec.effective_w_inf();
    if (!(w >= 0.0 && w <= 1.0)) throw ValidationError("covariance.w_inf must lie in [0, 1]");
    const auto& k = spec.covariance.kernel;
    if (spec.covariance.model == CovarianceModel::AffineLmarch) {
        if (k.taus.empty()) throw ValidationError("covariance.kernel.taus must not be empty");
        for (double tau : k.taus)
            if (!(tau > 0.0)) throw ValidationError("covariance.kernel.taus must be positive");
        if (!(static_cast<double>(k.l_max) > *std::max_element(k.taus.begin(), k.taus.end())))
            throw ValidationError("covariance.kernel.l_max must exceed the largest tau");
        if (!(k.decay > 1.0)) throw ValidationError("covariance.kernel.decay must exceed 1");
    }
    if (spec.innovations.model == InnovationModel::NonCentralStudent && !(spec.innovations.nu > 2.0))
        throw ValidationError("innovations.nu must exceed 2 (finite variance)");
    if (!(spec.p_min_fraction > 0.0 && spec.p_min_fraction < 1.0))
        throw ValidationError("p_min_fraction must lie in (0, 1)");
    if (spec.p_min_absolute && !(*spec.p_min_absolute >= 0.0))
        throw ValidationError("p_min_absolute must be non-negative");
}

std::vector<std::vector<NrcHorizon>> nrc_horizons_per_asset(const ProcessSpec& spec, const CmaParameters& cma) {
    std::vector<std::vector<NrcHorizon>> out(cma.size());
    if (!spec.nrc) return out;
    for (std::size_t a = 0; a < cma.size(); ++a) {
        const auto it = spec.nrc->horizons.find(cma.asset_classes[a]);
        if (it != spec.nrc->horizons.end()) out[a] = it->second;
    }
    return out;
}

Eigen::VectorXd gamma_asym_per_asset(const ProcessSpec& spec, const CmaParameters& cma) {
    const auto n = static_cast<Eigen::Index>(cma.size());
    Eigen::VectorXd g(n);
    if (spec.innovations.gamma_asym) {
        const auto& v = *spec.innovations.gamma_asym;
        if (v.size() != cma.size())
            throw ValidationError("innovations.gamma_asym must have one entry per asset");
        for (Eigen::Index i = 0; i < n; ++i) g(i) = v[static_cast<std::size_t>(i)];
        return g;
    }
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto it = spec.innovations.gamma_by_class.find(cma.asset_classes[static_cast<std::size_t>(i)]);
        g(i) = it == spec.innovations.gamma_by_class.end() ? 0.0 : it->second;
    }
    return g;
}

}  // namespace ltsim
