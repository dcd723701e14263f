#pragma once

// Seeded random streams and the innovation laws: standard normal and the
// multivariate non-central Student with zero mean and identity covariance.

#include <cstdint>
#include <random>
#include <variant>

#include <Eigen/Dense>

#include "ltsim/market_model.hpp"

namespace ltsim {

/// Sub-stream selector within one path.
enum class StreamPurpose : std::uint64_t {
    Innovations = 0,
    DriftUncertainty = 1,
};

struct StreamId {
    std::uint64_t path = 0;
    std::uint64_t counter = 0;
};

/// Single-owner random stream. The sequence depends only on
/// (master_seed, stream id), so paths can be generated in any order.
class RngStream {
public:
    RngStream(std::uint64_t master_seed, StreamId id);
    RngStream(std::uint64_t master_seed, std::uint64_t path, StreamPurpose purpose)
        : RngStream(master_seed, StreamId{path, static_cast<std::uint64_t>(purpose)}) {}

    double normal() { return normal_(engine_); }
    double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }
    /// Chi-square draw through the gamma(dof/2, 2) law.
    double chi_squared(double dof);

private:
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
    std::gamma_distribution<double> gamma_{1.0, 2.0};
};

using InnovationVector = Eigen::VectorXd;

struct MixingMoments {
    double e_sqrt_w = 1.0;  ///< closed-form approximation (1 - 3/(4 nu - 1))^{-1}
    double e_w = 1.0;       ///< nu / (nu - 2)
};

/// Throws ValidationError when nu <= 2 (infinite variance).
MixingMoments moments_of_w(double nu);

/// theta(nu) = 1 - E[sqrt w]^2 / E[w], the relative variance of sqrt(w).
double theta_of_nu(double nu);

struct StudentParams {
    double nu = 8.0;
    Eigen::VectorXd gamma;
    double theta = 0.0;
    double e_sqrt_w = 1.0;
    double e_w = 1.0;
    Eigen::MatrixXd chi_inv_sqrt;  ///< (I + theta gamma gamma^T)^{-1/2}

    std::size_t dimension() const noexcept { return static_cast<std::size_t>(gamma.size()); }
};

StudentParams build_student_params(double nu, Eigen::VectorXd gamma_asym, double eps_min = kDefaultEpsMin);

/// w = nu / Q with Q ~ chi2(nu).
double sample_mixing_w(RngStream& stream, double nu);

/// Deterministic core of the Student generator for a given mixing draw w
/// and standard normal vector z.
InnovationVector student_innovation(const StudentParams& params, double w, const Eigen::VectorXd& z);

struct NormalInnovations {};

using InnovationLaw = std::variant<NormalInnovations, StudentParams>;

/// Draws one innovation vector. The Student law draws w first, then the n normals.
InnovationVector sample_innovation(RngStream& stream, const InnovationLaw& law, std::size_t dimension);

/// r = mu + A * eps. Throws ValidationError on a dimension mismatch.
Eigen::VectorXd sample_returns(const Eigen::VectorXd& mu_step, const Eigen::MatrixXd& sqrt_sigma,
                               const InnovationVector& eps);

}  // namespace ltsim
