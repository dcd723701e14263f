#include <cmath>
#include <vector>

#include "doctest.h"
#include "ltsim/drift_engine.hpp"
#include "ltsim/errors.hpp"

using namespace ltsim;

namespace {

using Horizons = std::vector<std::vector<NrcHorizon>>;

Eigen::VectorXd scalar(double x) { return Eigen::VectorXd::Constant(1, x); }

// Reference NRC for one asset, written directly from the definition.
double nrc_reference(const std::vector<double>& prices, double mu, const std::vector<NrcHorizon>& hs) {
    const std::size_t t = prices.size() - 1;
    double sum = 0.0;
    for (const auto& h : hs) {
        if (h.steps > t) continue;
        const double fwd = prices[t - h.steps] * std::pow(1.0 + mu, static_cast<double>(h.steps));
        sum += h.gamma * (1.0 / static_cast<double>(h.steps)) * (prices[t] / fwd - 1.0);
    }
    return sum;
}

}  // namespace

TEST_CASE("discount factor") {
    CHECK(discount_factor(0.0, 0) == 1.0);
    CHECK(discount_factor(0.0, 37) == 1.0);
    CHECK(discount_factor(0.01, 2) == doctest::Approx(0.980296).epsilon(1e-6));
    CHECK(discount_factor(0.01, 2) == doctest::Approx(1.0 / (1.01 * 1.01)).epsilon(1e-15));
    CHECK(discount_factor(0.03, 0) == 1.0);
    for (std::size_t n : {1u, 6u, 40u, 480u}) {
        const double d = discount_factor(0.007, n);
        CHECK(d > 0.0);
        CHECK(d * std::pow(1.007, static_cast<double>(n)) == doctest::Approx(1.0).epsilon(1e-14));
    }
}

TEST_CASE("drift uncertainty draw") {
    RngStream s(3, 0, StreamPurpose::DriftUncertainty);
    CHECK_THROWS_AS(du_draw(s, scalar(0.16), 0.0, 1.0 / 12), ValidationError);
    CHECK_THROWS_AS(du_draw(s, scalar(0.16), -1.0, 1.0 / 12), ValidationError);

    RngStream far(3, 0, StreamPurpose::DriftUncertainty);
    CHECK(std::abs(du_draw(far, scalar(0.16), 1e18, 1.0 / 12)(0)) < 1e-9);

    // annualized offset std is sigma/sqrt(25) = 0.032, mean is zero
    const int n = 1'000'000;
    const double step = 1.0 / 12.0;
    double sum = 0, sum2 = 0;
    for (int p = 0; p < n; ++p) {
        RngStream st(11, static_cast<std::uint64_t>(p), StreamPurpose::DriftUncertainty);
        const double annual = du_draw(st, scalar(0.16), 25.0, step)(0) / step;
        sum += annual;
        sum2 += annual * annual;
    }
    const double mean = sum / n;
    const double sd = std::sqrt((sum2 - n * mean * mean) / (n - 1));
    CHECK(sd == doctest::Approx(0.032).epsilon(0.005));
    CHECK(std::abs(mean) < 3.0 * 0.032 / std::sqrt(static_cast<double>(n)));

    // one independent draw per asset
    RngStream a(5, 1, StreamPurpose::DriftUncertainty);
    const Eigen::VectorXd two = du_draw(a, Eigen::Vector2d(0.16, 0.16), 25.0, step);
    CHECK(two(0) != two(1));
}

TEST_CASE("NRC term examples") {
    SUBCASE("single horizon arithmetic") {
        DriftState st(scalar(0.0), Eigen::VectorXd(), Horizons{{{6, 0.1}}});
        st.push_prices(scalar(100.0));
        for (int i = 0; i < 5; ++i) st.push_prices(scalar(105.0));
        CHECK(st.nrc_term()(0) == 0.0);  // lag 6 not yet available
        st.push_prices(scalar(110.0));
        CHECK(st.nrc_term()(0) == doctest::Approx(0.0016667).epsilon(1e-4));
        CHECK(st.nrc_term()(0) == doctest::Approx(0.1 / 6 * 0.1).epsilon(1e-13));
    }
    SUBCASE("zero coefficients") {
        DriftState st(scalar(0.01), Eigen::VectorXd(), Horizons{{{6, 0.0}, {40, 0.0}}});
        for (int i = 0; i < 60; ++i) st.push_prices(scalar(100.0 + 7.0 * std::sin(i)));
        CHECK(st.nrc_term()(0) == 0.0);
        CHECK(st.total_drift()(0) == 0.01);
    }
    SUBCASE("drift-consistent history is neutral") {
        const double mu = 0.006;
        DriftState st(scalar(mu), Eigen::VectorXd(), Horizons{{{6, 0.2}, {40, -0.45}}});
        double p = 50.0;
        for (int i = 0; i < 100; ++i) {
            st.push_prices(scalar(p));
            CHECK(std::abs(st.nrc_term()(0)) < 1e-14);
            CHECK(st.total_drift()(0) == doctest::Approx(mu).epsilon(1e-12));
            p *= 1.0 + mu;
        }
    }
    SUBCASE("absorbed lagged or current price contributes nothing") {
        DriftState st(scalar(0.0), Eigen::VectorXd(), Horizons{{{2, 0.3}}});
        st.push_prices(scalar(0.0));
        st.push_prices(scalar(5.0));
        st.push_prices(scalar(7.0));
        CHECK(st.nrc_term()(0) == 0.0);
        st.push_prices(scalar(0.0));
        CHECK(st.nrc_term()(0) == 0.0);
        CHECK(st.total_drift()(0) == 0.0);
    }
}

TEST_CASE("NRC matches the definition on random histories") {
    std::mt19937_64 rng(17);
    std::normal_distribution<double> z(0.0, 0.05);
    const std::vector<NrcHorizon> hs{{6, 0.2}, {40, -0.45}, {13, 0.05}};
    const double mu = 0.005;
    DriftState st(scalar(mu), Eigen::VectorXd(), Horizons{hs});
    CHECK(st.window_depth() == 41);
    std::vector<double> prices;
    double p = 100.0;
    for (int t = 0; t < 300; ++t) {
        prices.push_back(p);
        st.push_prices(scalar(p));
        CHECK(st.nrc_term()(0) == doctest::Approx(nrc_reference(prices, mu, hs)).epsilon(1e-12));
        p *= 1.0 + mu + z(rng);
    }
}

TEST_CASE("total drift composes the three components") {
    const Eigen::Vector2d mu(0.004, 0.002);
    const Eigen::Vector2d du(0.001, -0.0005);
    const Horizons hs{{{6, 0.2}, {40, -0.45}}, {{6, 0.2}, {40, -0.2}}};
    DriftState st(mu, du, hs);
    DriftState nrc_only(mu, Eigen::VectorXd(), hs);
    DriftState plain(mu, Eigen::VectorXd(), Horizons{{}, {}});
    std::mt19937_64 rng(2);
    std::normal_distribution<double> z(0.0, 0.04);
    Eigen::Vector2d p(100.0, 80.0);
    for (int t = 0; t < 120; ++t) {
        st.push_prices(p);
        nrc_only.push_prices(p);
        plain.push_prices(p);
        CHECK(plain.total_drift() == mu);
        CHECK((st.total_drift() - (mu + du + nrc_only.nrc_term())).norm() < 1e-15);
        for (int a = 0; a < 2; ++a) p(a) *= 1.0 + mu(a) + z(rng);
    }
    CHECK(st.du_offset() == du);
}

TEST_CASE("drift is causal") {
    const Horizons hs{{{6, 0.2}, {40, -0.45}}};
    std::mt19937_64 rng(8);
    std::normal_distribution<double> z(0.0, 0.05);
    std::vector<double> path(200);
    path[0] = 100.0;
    for (std::size_t t = 1; t < path.size(); ++t) path[t] = path[t - 1] * (1.0 + z(rng));
    for (std::size_t t : {10u, 45u, 120u}) {
        DriftState a(scalar(0.004), Eigen::VectorXd(), hs);
        for (std::size_t i = 0; i <= t; ++i) a.push_prices(scalar(path[i]));
        const double before = a.total_drift()(0);
        // a second state that saw a perturbed future must agree up to t
        std::vector<double> other = path;
        for (std::size_t i = t + 1; i < other.size(); ++i) other[i] *= 1.5;
        DriftState b(scalar(0.004), Eigen::VectorXd(), hs);
        for (std::size_t i = 0; i <= t; ++i) b.push_prices(scalar(other[i]));
        CHECK(b.total_drift()(0) == before);
    }
}

TEST_CASE("NRC responds monotonically to the current price") {
    auto drift_at = [](double gamma, double now) {
        DriftState st(scalar(0.0), Eigen::VectorXd(), Horizons{{{6, gamma}}});
        for (int i = 0; i < 6; ++i) st.push_prices(scalar(100.0 + i));
        st.push_prices(scalar(now));
        return st.total_drift()(0);
    };
    double prev_pos = -1e9, prev_neg = 1e9;
    for (double now = 50.0; now <= 200.0; now += 5.0) {
        const double pos = drift_at(0.2, now), neg = drift_at(-0.45, now);
        CHECK(pos > prev_pos);
        CHECK(neg < prev_neg);
        prev_pos = pos;
        prev_neg = neg;
    }
}

TEST_CASE("drift state validation") {
    CHECK_THROWS_AS(DriftState(scalar(0.0), Eigen::Vector2d::Zero(), Horizons{{}}), ValidationError);
    CHECK_THROWS_AS(DriftState(scalar(0.0), Eigen::VectorXd(), Horizons{}), ValidationError);
    CHECK_THROWS_AS(DriftState(scalar(0.0), Eigen::VectorXd(), Horizons{{{0, 0.1}}}), ValidationError);
    DriftState st(scalar(0.0), Eigen::VectorXd(), Horizons{{}});
    CHECK_THROWS_AS(st.push_prices(Eigen::Vector2d(1, 1)), ValidationError);
    CHECK(st.window_depth() == 1);
}
