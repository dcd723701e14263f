#include "ltsim/innovation_sampler.hpp"

#include <cmath>

#include "ltsim/errors.hpp"

namespace ltsim {

namespace {

std::seed_seq make_seed_seq(std::uint64_t master_seed, StreamId id) {
    auto lo = [](std::uint64_t v) { return static_cast<std::uint32_t>(v & 0xffffffffu); };
    auto hi = [](std::uint64_t v) { return static_cast<std::uint32_t>(v >> 32); };
    return std::seed_seq{lo(master_seed), hi(master_seed), lo(id.path), hi(id.path), lo(id.counter), hi(id.counter)};
}

void require_finite_variance(double nu) {
    if (!(nu > 2.0) || std::isnan(nu))
        throw ValidationError("Student degrees of freedom must exceed 2 for a finite variance");
}

}  // namespace

RngStream::RngStream(std::uint64_t master_seed, StreamId id) {
    auto seq = make_seed_seq(master_seed, id);
    engine_.seed(seq);
}

double RngStream::chi_squared(double dof) {
    if (gamma_.alpha() != 0.5 * dof) gamma_ = std::gamma_distribution<double>(0.5 * dof, 2.0);
    return gamma_(engine_);
}

MixingMoments moments_of_w(double nu) {
    require_finite_variance(nu);
    if (std::isinf(nu)) return {1.0, 1.0};
    return {1.0 / (1.0 - 3.0 / (4.0 * nu - 1.0)), nu / (nu - 2.0)};
}

double theta_of_nu(double nu) {
    const auto m = moments_of_w(nu);
    return 1.0 - m.e_sqrt_w * m.e_sqrt_w / m.e_w;
}

StudentParams build_student_params(double nu, Eigen::VectorXd gamma_asym, double eps_min) {
    const auto m = moments_of_w(nu);
    StudentParams p;
    p.nu = nu;
    p.theta = 1.0 - m.e_sqrt_w * m.e_sqrt_w / m.e_w;
    p.e_sqrt_w = m.e_sqrt_w;
    p.e_w = m.e_w;
    p.gamma = std::move(gamma_asym);
    const Eigen::MatrixXd chi = Eigen::MatrixXd::Identity(p.gamma.size(), p.gamma.size()) +
                                p.theta * p.gamma * p.gamma.transpose();
    p.chi_inv_sqrt = matrix_inverse_sqrt(SymmetricMatrix::from_dense(chi, 1e-15), eps_min);
    return p;
}

double sample_mixing_w(RngStream& stream, double nu) {
    require_finite_variance(nu);
    return nu / stream.chi_squared(nu);
}

InnovationVector student_innovation(const StudentParams& params, double w, const Eigen::VectorXd& z) {
    if (z.size() != params.gamma.size()) throw ValidationError("innovation dimension mismatch");
    const double sqrt_w = std::sqrt(w);
    const double norm = std::sqrt(params.e_w);
    const Eigen::VectorXd mixed = ((sqrt_w - params.e_sqrt_w) / norm) * params.gamma + (sqrt_w / norm) * z;
    return params.chi_inv_sqrt * mixed;
}

InnovationVector sample_innovation(RngStream& stream, const InnovationLaw& law, std::size_t dimension) {
    const auto n = static_cast<Eigen::Index>(dimension);
    if (const auto* student = std::get_if<StudentParams>(&law)) {
        if (student->dimension() != dimension) throw ValidationError("innovation dimension mismatch");
        const double w = sample_mixing_w(stream, student->nu);
        Eigen::VectorXd z(n);
        for (Eigen::Index i = 0; i < n; ++i) z(i) = stream.normal();
        return student_innovation(*student, w, z);
    }
    Eigen::VectorXd z(n);
    for (Eigen::Index i = 0; i < n; ++i) z(i) = stream.normal();
    return z;
}

Eigen::VectorXd sample_returns(const Eigen::VectorXd& mu_step, const Eigen::MatrixXd& sqrt_sigma,
                               const InnovationVector& eps) {
    if (sqrt_sigma.rows() != mu_step.size() || sqrt_sigma.cols() != eps.size())
        throw ValidationError("return dimension mismatch");
    return mu_step + sqrt_sigma * eps;
}

}  // namespace ltsim
