#include <cmath>
#include <numeric>
#include <vector>

#include "doctest.h"
#include "ltsim/covariance_engine.hpp"
#include "ltsim/errors.hpp"
#include "test_support.hpp"

using namespace ltsim;
using ltsim::testing::random_pd;

namespace {

std::shared_ptr<const LmarchKernel> share(LmarchKernel k) { return std::make_shared<const LmarchKernel>(std::move(k)); }

SymmetricMatrix sym(const Eigen::MatrixXd& m) { return SymmetricMatrix::from_dense(m); }

double sum_of(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0); }

}  // namespace

TEST_CASE("default kernel shape") {
    const LmarchKernel k = build_kernel(KernelConfig{});
    REQUIRE(k.weights.size() == 120);
    CHECK(sum_of(k.weights) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(sum_of(k.component_weights) == doctest::Approx(1.0).epsilon(1e-12));
    for (std::size_t l = 1; l < k.weights.size(); ++l) CHECK(k.weights[l] < k.weights[l - 1]);
    CHECK(k.weights.back() > 0.0);
    // component weights follow 1 - ln(tau)/ln(96)
    const double c3 = 1.0 - std::log(3.0) / std::log(96.0), c48 = 1.0 - std::log(48.0) / std::log(96.0);
    CHECK(k.component_weights.front() / k.component_weights.back() == doctest::Approx(c3 / c48).epsilon(1e-12));
}

TEST_CASE("kernel construction") {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(0.5, 40.0);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> taus(1 + trial % 6);
        for (double& t : taus) t = u(rng);
        const LmarchKernel k = build_kernel(taus, 50 + trial % 100, 96.0);
        CHECK(sum_of(k.weights) == doctest::Approx(1.0).epsilon(1e-12));
        for (std::size_t l = 1; l < k.weights.size(); ++l) {
            CHECK(k.weights[l] >= 0.0);
            CHECK(k.weights[l] <= k.weights[l - 1]);
        }
    }
    const std::vector<double> tiny{1e-3};
    const LmarchKernel point = build_kernel(tiny, 5, 96.0);
    CHECK(point.weights[0] == doctest::Approx(1.0));
    CHECK(point.weights[1] < 1e-300);

    const std::vector<double> empty, neg{-1.0}, big{130.0}, normal{12.0};
    CHECK_THROWS_AS(build_kernel(empty, 120, 96.0), ValidationError);
    CHECK_THROWS_AS(build_kernel(neg, 120, 96.0), ValidationError);
    CHECK_THROWS_AS(build_kernel(big, 120, 96.0), ValidationError);
    CHECK_THROWS_AS(build_kernel(normal, 12, 96.0), ValidationError);
    CHECK_THROWS_AS(build_kernel(normal, 120, 1.0), ValidationError);
    CHECK_THROWS_AS(kernel_from_weights({}), ValidationError);
    CHECK_THROWS_AS(kernel_from_weights({1.0, -0.5}), ValidationError);
    CHECK(kernel_from_weights({2.0, 2.0}).weights[1] == 0.5);
}

TEST_CASE("linear covariance examples") {
    const auto k = share(kernel_from_weights({0.6, 0.4}));
    CovarianceState st(k, sym(Eigen::MatrixXd::Constant(1, 1, 1e-3)), Eigen::VectorXd::Zero(1), 0.0);
    st.push_return(Eigen::VectorXd::Constant(1, -0.01));
    st.push_return(Eigen::VectorXd::Constant(1, 0.02));
    CHECK(st.linear_covariance()(0, 0) == doctest::Approx(2.8e-4).epsilon(1e-12));
    CHECK(st.affine_covariance()(0, 0) == doctest::Approx(2.8e-4).epsilon(1e-12));

    // returns equal to the drift give a zero matrix
    const Eigen::Vector2d mu(0.01, 0.005);
    CovarianceState flat(share(build_kernel(KernelConfig{})), sym(random_pd(2, 1)), mu, 0.4);
    for (int i = 0; i < 120; ++i) flat.push_return(mu);
    CHECK(flat.linear_covariance().dense().norm() == 0.0);
}

TEST_CASE("linear covariance is consistent on iid draws") {
    const Eigen::MatrixXd s0 = random_pd(3, 9);
    const Eigen::LLT<Eigen::MatrixXd> llt(s0);
    const Eigen::MatrixXd l = llt.matrixL();
    std::mt19937_64 rng(12);
    std::normal_distribution<double> z;
    std::vector<double> dist;
    for (std::size_t len : {50u, 500u, 5000u}) {
        double total = 0.0;
        for (int rep = 0; rep < 5; ++rep) {
            CovarianceState st(share(kernel_from_weights(std::vector<double>(len, 1.0))), sym(s0),
                               Eigen::VectorXd::Zero(3), 0.0);
            for (std::size_t i = 0; i < len; ++i) st.push_return(l * Eigen::Vector3d(z(rng), z(rng), z(rng)));
            total += (st.linear_covariance().dense() - s0).norm();
        }
        dist.push_back(total / 5);
    }
    CHECK(dist[1] < dist[0]);
    CHECK(dist[2] < dist[1]);
    CHECK(dist[2] < 0.1 * s0.norm());
}

TEST_CASE("rectangular volatility") {
    const std::vector<double> c(7, 0.03);
    CHECK(rma_variance(c) == doctest::Approx(9e-4).epsilon(1e-14));
    const std::vector<double> two{0.01, -0.01};
    CHECK(rma_variance(two) == doctest::Approx(1e-4).epsilon(1e-14));
    CHECK_THROWS_AS(rma_variance(std::vector<double>{}), InsufficientDataError);
    CHECK_THROWS_AS(rma_variance(two, 3), InsufficientDataError);

    // equals the linear diagonal under a rectangular kernel with zero drift
    std::mt19937_64 rng(3);
    std::normal_distribution<double> z(0.0, 0.04);
    const std::size_t len = 24;
    CovarianceState st(share(kernel_from_weights(std::vector<double>(len, 1.0))),
                       sym(Eigen::MatrixXd::Constant(1, 1, 0.002)), Eigen::VectorXd::Zero(1), 0.0);
    std::vector<double> rs;
    for (std::size_t i = 0; i < len; ++i) {
        rs.push_back(z(rng));
        st.push_return(Eigen::VectorXd::Constant(1, rs.back()));
    }
    CHECK(st.linear_covariance()(0, 0) == doctest::Approx(rma_variance(rs, len)).epsilon(1e-12));
}

TEST_CASE("affine covariance") {
    const Eigen::MatrixXd cma = random_pd(3, 21) * 1e-3;
    const Eigen::Vector3d mu(0.004, 0.003, 0.001);
    const auto k = share(build_kernel(KernelConfig{}));
    std::mt19937_64 rng(6);
    std::normal_distribution<double> z(0.0, 0.06);
    for (double w : {0.0, 0.25, 0.55, 1.0}) {
        CovarianceState st(k, sym(cma), mu, w);
        // starts at the fixed point
        CHECK((st.affine_covariance().dense() - cma).norm() < 1e-15);
        for (int t = 0; t < 200; ++t) {
            st.push_return(Eigen::Vector3d(z(rng), z(rng), z(rng)));
            const Eigen::MatrixXd lin = st.linear_covariance().dense();
            const Eigen::MatrixXd aff = st.affine_covariance().dense();
            CHECK((aff - aff.transpose()).norm() == 0.0);
            CHECK((aff - (w * cma + (1.0 - w) * lin)).norm() < 1e-15);
            for (int i = 0; i < 3; ++i)
                for (int j = 0; j < 3; ++j) {
                    CHECK(aff(i, j) >= std::min(lin(i, j), cma(i, j)) - 1e-18);
                    CHECK(aff(i, j) <= std::max(lin(i, j), cma(i, j)) + 1e-18);
                }
            if (w == 1.0) CHECK(aff == cma);
            if (w > 0.0) CHECK(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(aff).eigenvalues().minCoeff() > 0.0);
            CHECK(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(lin).eigenvalues().minCoeff() > -1e-15);
        }
    }
    CHECK_THROWS_AS(CovarianceState(k, sym(cma), mu, 1.2), ValidationError);
    CHECK_THROWS_AS(CovarianceState(k, sym(cma), mu, -0.1), ValidationError);
    CHECK_THROWS_AS(CovarianceState(k, sym(cma), Eigen::Vector2d::Zero(), 0.5), ValidationError);
}

TEST_CASE("covariance is measurable") {
    const auto k = share(build_kernel(KernelConfig{}));
    const Eigen::MatrixXd cma = random_pd(2, 2) * 1e-3;
    CovarianceState a(k, sym(cma), Eigen::Vector2d::Zero(), 0.4), b = a;
    std::mt19937_64 rng(1);
    std::normal_distribution<double> z(0.0, 0.05);
    for (int t = 0; t < 30; ++t) {
        const Eigen::Vector2d r(z(rng), z(rng));
        a.push_return(r);
        b.push_return(r);
    }
    const Eigen::MatrixXd now = a.affine_covariance().dense();
    CHECK(b.affine_covariance().dense() == now);
    b.push_return(Eigen::Vector2d(0.5, -0.5));
    CHECK(a.affine_covariance().dense() == now);
    CHECK(b.affine_covariance().dense() != now);
}

TEST_CASE("horizon weights") {
    const LmarchKernel k = build_kernel(KernelConfig{});
    const HorizonWeights one = horizon_weights(k, 0.4, 1);
    CHECK(one.long_run == 0.4);
    for (std::size_t l = 0; l < k.l_max; ++l) CHECK(one.lags[l] == doctest::Approx(0.6 * k.weights[l]).epsilon(1e-14));
    for (std::size_t n : {1u, 2u, 7u, 36u, 120u, 240u})
        for (double w : {0.0, 0.4, 0.55, 1.0}) {
            const HorizonWeights hw = horizon_weights(k, w, n);
            CHECK(hw.long_run + sum_of(hw.lags) == doctest::Approx(1.0).epsilon(1e-12));
            for (double x : hw.lags) CHECK(x >= 0.0);
        }
    CHECK_THROWS_AS(horizon_weights(k, 0.4, 0), ValidationError);

    const std::vector<double> sq{1.0, 2.0};
    const HorizonWeights hw = horizon_weights(kernel_from_weights({0.5, 0.3, 0.2}), 0.0, 1);
    CHECK(apply_horizon_weights(hw, sq, 9.0) == doctest::Approx((0.5 * 1.0 + 0.3 * 2.0) / 0.8));
    CHECK_THROWS_AS(apply_horizon_weights(hw, std::span<const double>{}, 1.0), InsufficientDataError);
}

TEST_CASE("variance forecast") {
    const auto k = share(build_kernel(KernelConfig{}));
    const Eigen::MatrixXd cma = random_pd(2, 5) * 2e-3;
    const Eigen::Vector2d mu(0.005, 0.002);

    SUBCASE("flat at the fixed point") {
        CovarianceState st(k, sym(cma), mu, 0.4);
        for (std::size_t n = 1; n <= 60; ++n) {
            const Eigen::VectorXd f = st.variance_forecast(n);
            CHECK(f(0) == doctest::Approx(cma(0, 0)).epsilon(1e-12));
            CHECK(f(1) == doctest::Approx(cma(1, 1)).epsilon(1e-12));
        }
    }
    SUBCASE("one step is the affine diagonal") {
        CovarianceState st(k, sym(cma), mu, 0.55);
        std::mt19937_64 rng(9);
        std::normal_distribution<double> z(0.0, 0.08);
        for (int t = 0; t < 40; ++t) {
            st.push_return(Eigen::Vector2d(z(rng), z(rng)));
            const Eigen::VectorXd f = st.variance_forecast(1);
            const Eigen::MatrixXd aff = st.affine_covariance().dense();
            CHECK(f(0) == doctest::Approx(aff(0, 0)).epsilon(1e-12));
            CHECK(f(1) == doctest::Approx(aff(1, 1)).epsilon(1e-12));
        }
    }
    SUBCASE("closed-form iteration with a one-lag kernel") {
        // v_j - LR = (1 - w)^(j+1) (x0 - LR); the forecast averages v_0..v_{n-1}
        const double w = 0.3, lr = 0.002, x0 = 0.011;
        CovarianceState st(share(kernel_from_weights({1.0})), sym(Eigen::MatrixXd::Constant(1, 1, lr)),
                           Eigen::VectorXd::Zero(1), w);
        st.push_return(Eigen::VectorXd::Constant(1, std::sqrt(x0)));
        for (std::size_t n : {1u, 2u, 5u, 30u, 500u}) {
            const double q = 1.0 - w;
            const double oracle = lr + (x0 - lr) * q * (1.0 - std::pow(q, static_cast<double>(n))) / (w * n);
            CHECK(st.variance_forecast(n)(0) == doctest::Approx(oracle).epsilon(1e-12));
        }
    }
    SUBCASE("converges to the CMA variance for long horizons") {
        CovarianceState st(k, sym(cma), mu, 0.4);
        for (int t = 0; t < 120; ++t) st.push_return(Eigen::Vector2d(0.15, -0.12));
        const double dev0 = std::abs(st.variance_forecast(1)(0) - cma(0, 0));
        double prev = dev0;
        for (std::size_t n : {12u, 60u, 240u, 1000u}) {
            const double dev = std::abs(st.variance_forecast(n)(0) - cma(0, 0));
            CHECK(dev < prev);
            prev = dev;
        }
        // the averaged forecast converges like 1/n; the n-th one-step forecast geometrically
        const auto one_step = [&](std::size_t n) {
            return static_cast<double>(n) * st.variance_forecast(n)(0) -
                   static_cast<double>(n - 1) * st.variance_forecast(n - 1)(0);
        };
        const double d240 = std::abs(one_step(240) - cma(0, 0));
        const double d480 = std::abs(one_step(480) - cma(0, 0));
        CHECK(prev < 0.05 * dev0);
        CHECK(d240 < 0.01 * dev0);
        CHECK(d480 < d240);
    }
}
