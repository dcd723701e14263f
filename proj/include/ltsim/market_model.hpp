#pragma once

// Capital market assumptions, process configuration, the time grid and the
// small dense linear-algebra helpers shared by every other module.

#include <chrono>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace ltsim {

/// Smallest admissible eigenvalue, relative to the largest one.
inline constexpr double kDefaultEpsMin = 1e-8;

enum class AssetClass { Equity, FixedIncome, Alternative };

std::string_view to_string(AssetClass cls);
/// Accepts "Equity", "FixedIncome", "Alternative" (plus the short forms "FI" and "Alt").
AssetClass asset_class_from_string(std::string_view text);

// ---------------------------------------------------------------------------
// Time grid

/// Uniform grid of process steps. Calendar dates are labels only; all the
/// math uses the year fraction k * step_years.
class TimeGrid {
public:
    TimeGrid(double step_years, std::size_t n_steps,
             std::chrono::year_month_day origin = std::chrono::year{2000} / 1 / 31);

    /// Monthly grid, the default process step.
    static TimeGrid monthly(std::size_t n_steps,
                            std::chrono::year_month_day origin = std::chrono::year{2000} / 1 / 31);

    double step_years() const noexcept { return step_years_; }
    std::size_t n_steps() const noexcept { return n_steps_; }
    std::chrono::year_month_day origin() const noexcept { return origin_; }

    double year_fraction(std::size_t k) const noexcept { return static_cast<double>(k) * step_years_; }
    /// Number of whole steps in a span of years (rounded to nearest).
    std::size_t steps_for_years(double years) const;
    /// Month-end label of step k on a monthly grid; the origin for other grids.
    std::chrono::year_month_day date_at(std::size_t k) const;
    bool is_monthly() const noexcept;

private:
    double step_years_;
    std::size_t n_steps_;
    std::chrono::year_month_day origin_;
};

// ---------------------------------------------------------------------------
// Symmetric matrices

/// Dense symmetric matrix holding only the lower triangle, so symmetry is
/// exact by construction.
class SymmetricMatrix {
public:
    SymmetricMatrix() = default;
    explicit SymmetricMatrix(std::size_t dimension, double fill = 0.0);

    static SymmetricMatrix identity(std::size_t dimension);
    /// Throws ValidationError when |m(i,j) - m(j,i)| exceeds tol anywhere.
    static SymmetricMatrix from_dense(const Eigen::MatrixXd& m, double tol = 1e-12);

    std::size_t dimension() const noexcept { return dim_; }
    double operator()(std::size_t i, std::size_t j) const noexcept { return data_[index(i, j)]; }
    double& operator()(std::size_t i, std::size_t j) noexcept { return data_[index(i, j)]; }

    Eigen::MatrixXd dense() const;
    Eigen::VectorXd diagonal() const;

    /// Packed lower triangle, row by row: (0,0), (1,0), (1,1), (2,0), ...
    std::span<const double> packed() const noexcept { return data_; }
    std::span<double> packed() noexcept { return data_; }
    static std::size_t packed_size(std::size_t dimension) noexcept { return dimension * (dimension + 1) / 2; }

    SymmetricMatrix& operator+=(const SymmetricMatrix& other);
    SymmetricMatrix& operator*=(double factor);
    friend SymmetricMatrix operator+(SymmetricMatrix a, const SymmetricMatrix& b) { return a += b; }
    friend SymmetricMatrix operator*(double f, SymmetricMatrix a) { return a *= f; }

    double frobenius_norm() const;

private:
    static std::size_t index(std::size_t i, std::size_t j) noexcept {
        return i >= j ? i * (i + 1) / 2 + j : j * (j + 1) / 2 + i;
    }

    std::size_t dim_ = 0;
    std::vector<double> data_;
};

// ---------------------------------------------------------------------------
// Capital market assumptions

struct CmaParameters {
    std::vector<std::string> asset_ids;
    std::vector<AssetClass> asset_classes;
    Eigen::VectorXd mu_annual;     ///< fraction per year
    Eigen::VectorXd sigma_annual;  ///< fraction per sqrt(year)
    Eigen::MatrixXd correlation;

    std::size_t size() const noexcept { return asset_ids.size(); }
};

struct CmaValidation {
    enum class Issue {
        None,
        DimensionMismatch,
        NonFinite,
        NonPositiveSigma,
        NotSymmetric,
        BadDiagonal,
        OutOfRange,
        NotPositiveDefinite,
    };

    Issue issue = Issue::None;
    std::string message;
    std::optional<double> min_eigenvalue;
    std::optional<std::pair<std::size_t, std::size_t>> entry;

    bool ok() const noexcept { return issue == Issue::None; }
};

/// Checks dimensions, sigma > 0, symmetry, unit diagonal, entries in [-1, 1]
/// and min eigenvalue >= eps_min * max eigenvalue of the correlation.
CmaValidation validate_cma(const CmaParameters& cma, double eps_min = kDefaultEpsMin);

/// Throws NotPositiveDefiniteError or ValidationError when validate_cma fails.
void require_valid(const CmaParameters& cma, double eps_min = kDefaultEpsMin);

struct StepParameters {
    Eigen::VectorXd mu;     ///< drift per step
    Eigen::VectorXd sigma;  ///< volatility per step
};

StepParameters scale_to_step(const CmaParameters& cma, const TimeGrid& grid);

/// Sigma = diag(sigma) * rho * diag(sigma), annualized.
SymmetricMatrix covariance_from_cma(const CmaParameters& cma);

/// Inverse of covariance_from_cma: volatilities and correlation.
std::pair<Eigen::VectorXd, Eigen::MatrixXd> decompose_covariance(const SymmetricMatrix& cov);

struct SymmetricEigen {
    Eigen::VectorXd values;   ///< ascending
    Eigen::MatrixXd vectors;  ///< columns
};

SymmetricEigen symmetric_eigen(const SymmetricMatrix& m);

/// Symmetric square root A (A = A^T, A * A^T = m) through the eigendecomposition.
/// Throws NotPositiveDefiniteError when the smallest eigenvalue is below
/// eps_min times the largest one.
Eigen::MatrixXd matrix_sqrt(const SymmetricMatrix& m, double eps_min = kDefaultEpsMin);

/// m^{-1/2}, same code path and same failure rule as matrix_sqrt.
Eigen::MatrixXd matrix_inverse_sqrt(const SymmetricMatrix& m, double eps_min = kDefaultEpsMin);

// ---------------------------------------------------------------------------
// Process configuration

struct NrcHorizon {
    std::size_t steps = 0;  ///< horizon length in process steps
    double gamma = 0.0;
};

struct DuConfig {
    double calibration_years = 25.0;
};

struct NrcConfig {
    std::map<AssetClass, std::vector<NrcHorizon>> horizons;

    /// Two horizons per class: a short positive one and a long negative one.
    static NrcConfig defaults();
};

enum class CovarianceModel { Constant, AffineLmarch };

struct KernelConfig {
    std::vector<double> taus{3.0, 6.0, 12.0, 24.0, 48.0};  ///< in steps (months on the default grid)
    std::size_t l_max = 120;
    double decay = 96.0;  ///< the single shape parameter of the component weights
};

struct CovarianceConfig {
    CovarianceModel model = CovarianceModel::Constant;
    std::optional<double> w_inf;  ///< defaults to 0.40 with NRC, 0.55 without
    KernelConfig kernel;
};

enum class InnovationModel { Normal, NonCentralStudent };

struct InnovationConfig {
    InnovationModel model = InnovationModel::Normal;
    double nu = 8.0;
    std::map<AssetClass, double> gamma_by_class{
        {AssetClass::Equity, -0.30},
        {AssetClass::FixedIncome, -0.15},
        {AssetClass::Alternative, -0.15},
    };
    /// Optional per-asset override, one entry per asset in CMA order.
    std::optional<std::vector<double>> gamma_asym;
};

struct ProcessSpec {
    std::string name = "constant";
    std::optional<DuConfig> du;
    std::optional<NrcConfig> nrc;
    CovarianceConfig covariance;
    InnovationConfig innovations;
    double p_min_fraction = 0.01;
    std::optional<double> p_min_absolute;

    double effective_w_inf() const;
};

/// Range checks on every field; throws ValidationError naming the field.
void validate_spec(const ProcessSpec& spec);

/// NRC horizons for each asset, resolved through its class.
std::vector<std::vector<NrcHorizon>> nrc_horizons_per_asset(const ProcessSpec& spec, const CmaParameters& cma);

/// Asymmetry vector for each asset, resolved through the per-asset override or the class defaults.
Eigen::VectorXd gamma_asym_per_asset(const ProcessSpec& spec, const CmaParameters& cma);

}  // namespace ltsim
