#include <cmath>
#include <vector>

#include "doctest.h"
#include "ltsim/errors.hpp"
#include "ltsim/path_simulator.hpp"
#include "test_support.hpp"

using namespace ltsim;
using ltsim::testing::make_cma;

namespace {

ProcessSpec full_spec() {
    ProcessSpec s;
    s.name = "full";
    s.du = DuConfig{};
    s.nrc = NrcConfig::defaults();
    s.covariance.model = CovarianceModel::AffineLmarch;
    s.innovations.model = InnovationModel::NonCentralStudent;
    return s;
}

CmaParameters three_assets() {
    Eigen::Matrix3d rho;
    rho << 1.0, 0.3, 0.5, 0.3, 1.0, 0.2, 0.5, 0.2, 1.0;
    return make_cma({0.07, 0.03, 0.05}, {0.16, 0.05, 0.12}, rho,
                    {AssetClass::Equity, AssetClass::FixedIncome, AssetClass::Alternative});
}

MarketHistory make_history(const CmaParameters& cma, std::size_t rows, std::uint64_t seed, double vol) {
    MarketHistory h;
    h.grid = TimeGrid::monthly(rows - 1);
    h.asset_ids = cma.asset_ids;
    h.prices.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cma.size()));
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> z(0.005, vol);
    for (Eigen::Index a = 0; a < h.prices.cols(); ++a) {
        double p = 100.0;
        for (Eigen::Index k = 0; k < h.prices.rows(); ++k) {
            h.prices(k, a) = p;
            p *= 1.0 + z(rng);
        }
    }
    return h;
}

// E[ln(1 + r)] for r ~ N(m, s^2), by trapezoid quadrature over +-10 s.
double expected_log_growth(double m, double s) {
    const int n = 200000;
    const double lo = -10.0, hi = 10.0, h = (hi - lo) / n;
    double acc = 0.0;
    for (int i = 0; i <= n; ++i) {
        const double z = lo + i * h;
        const double w = (i == 0 || i == n) ? 0.5 : 1.0;
        acc += w * std::log1p(m + s * z) * std::exp(-0.5 * z * z);
    }
    return acc * h / std::sqrt(2.0 * M_PI);
}

}  // namespace

TEST_CASE("absorbing rule") {
    const Eigen::Vector3d p_min(1.0, 1.0, 1.0);
    std::vector<bool> flags(3, false);
    const Eigen::VectorXd out = apply_absorbing(Eigen::Vector3d(0.9, 1.0, std::nextafter(1.0, 2.0)), p_min, flags);
    CHECK(out(0) == 0.0);
    CHECK(out(1) == 0.0);
    CHECK(out(2) == std::nextafter(1.0, 2.0));
    CHECK(flags == std::vector<bool>{true, true, false});
    // absorbed assets stay at zero whatever the update produced
    const Eigen::VectorXd again = apply_absorbing(Eigen::Vector3d(50.0, 50.0, 50.0), p_min, flags);
    CHECK(again == Eigen::Vector3d(0.0, 0.0, 50.0));
    const Eigen::VectorXd neg = apply_absorbing(Eigen::Vector3d(0.0, 0.0, -3.0), p_min, flags);
    CHECK(neg(2) == 0.0);
    CHECK(flags[2]);
}

TEST_CASE("deterministic limit") {
    const CmaParameters cma = make_cma({0.06, 0.02}, {0.2, 0.1});
    const TimeGrid grid = TimeGrid::monthly(240);
    SimulationOptions opt;
    opt.zero_innovations = true;
    opt.initial_prices = Eigen::Vector2d(100.0, 50.0);
    for (auto model : {CovarianceModel::Constant, CovarianceModel::AffineLmarch}) {
        ProcessSpec spec;
        spec.covariance.model = model;
        const EnsembleResult res = simulate_ensemble(spec, cma, grid, 3, 1, std::nullopt, opt);
        for (std::size_t p = 0; p < 3; ++p)
            for (std::size_t k = 0; k <= 240; ++k)
                for (std::size_t a = 0; a < 2; ++a) {
                    const double mu_step = cma.mu_annual(static_cast<Eigen::Index>(a)) / 12.0;
                    const double expect = opt.initial_prices(static_cast<Eigen::Index>(a)) *
                                          std::pow(1.0 + mu_step, static_cast<double>(k));
                    CHECK(res.price(p, k, a) == doctest::Approx(expect).epsilon(1e-12));
                }
    }
}

TEST_CASE("one path equals a manual step loop") {
    const CmaParameters cma = three_assets();
    const PathSimulator sim(full_spec(), cma, TimeGrid::monthly(120));
    const EnsembleResult res = sim.simulate(1, 99);
    PathState st = sim.start_path(99, 0);
    for (std::size_t k = 0; k <= 120; ++k) {
        for (std::size_t a = 0; a < 3; ++a) CHECK(res.price(0, k, a) == st.prices(static_cast<Eigen::Index>(a)));
        if (k < 120) sim.step(st);
    }
}

TEST_CASE("realized innovations round-trip through the filtration") {
    const CmaParameters cma = three_assets();
    const PathSimulator sim(full_spec(), cma, TimeGrid::monthly(480), make_history(cma, 200, 3, 0.05));
    for (std::size_t path = 0; path < 5; ++path) {
        PathState st = sim.start_path(7, path);
        for (std::size_t k = 0; k < 480; ++k) {
            const Eigen::VectorXd before = st.prices;
            StepRecord rec;
            sim.step(st, &rec);
            if ((st.prices.array() == 0.0).any()) break;
            const Eigen::VectorXd r = (st.prices.array() / before.array() - 1.0).matrix();
            CHECK((r - rec.returns).cwiseAbs().maxCoeff() < 1e-13);
            const Eigen::VectorXd eps = rec.sqrt_sigma.lu().solve(r - rec.drift);
            CHECK((eps - rec.innovation).cwiseAbs().maxCoeff() < 1e-12);
        }
    }
}

TEST_CASE("ensembles do not depend on the worker count") {
    const CmaParameters cma = three_assets();
    const PathSimulator sim(full_spec(), cma, TimeGrid::monthly(120), make_history(cma, 150, 5, 0.04));
    SimulationOptions one, many;
    one.threads = 1;
    many.threads = 8;
    const EnsembleResult a = sim.simulate(200, 2024, one);
    const EnsembleResult b = sim.simulate(200, 2024, many);
    const EnsembleResult c = sim.simulate(200, 2024, many);
    CHECK(a.prices == b.prices);
    CHECK(b.prices == c.prices);
    CHECK(a.steps == b.steps);
    const EnsembleResult d = sim.simulate(200, 2025, many);
    CHECK(a.prices != d.prices);

    SimulationOptions sparse = many;
    sparse.retained_steps = {120, 0, 60, 60};
    const EnsembleResult e = sim.simulate(200, 2024, sparse);
    REQUIRE(e.steps == std::vector<std::size_t>{0, 60, 120});
    for (std::size_t p = 0; p < 200; ++p)
        for (std::size_t i = 0; i < 3; ++i)
            for (std::size_t asset = 0; asset < 3; ++asset)
                CHECK(e.price(p, i, asset) == a.price(p, e.steps[i], asset));
    CHECK(e.point_of_step(60) == std::optional<std::size_t>(1));
    CHECK_FALSE(e.point_of_step(61).has_value());
}

TEST_CASE("mean log wealth matches the discrete walk") {
    const CmaParameters cma = make_cma({0.06}, {0.16});
    const std::size_t n_paths = 100000, steps = 120;
    SimulationOptions opt;
    opt.retained_steps = {steps};
    const EnsembleResult res = simulate_ensemble(ProcessSpec{}, cma, TimeGrid::monthly(steps), n_paths, 11,
                                                 std::nullopt, opt);
    double s = 0, s2 = 0;
    for (std::size_t p = 0; p < n_paths; ++p) {
        const double x = std::log(res.price(p, 0, 0) / 100.0);
        s += x;
        s2 += x * x;
    }
    const double mean = s / n_paths;
    const double se = std::sqrt((s2 / n_paths - mean * mean) / n_paths);
    const double oracle = steps * expected_log_growth(0.06 / 12.0, 0.16 / std::sqrt(12.0));
    CHECK(std::abs(mean - oracle) < 3.0 * se);
}

TEST_CASE("prices stay non-negative and absorption is permanent") {
    // extreme volatility under constant covariance; the LMARCH feedback is
    // not meant for this regime
    const CmaParameters cma = make_cma({-0.1, 0.05}, {1.2, 0.9});
    ProcessSpec spec;
    spec.du = DuConfig{};
    spec.innovations.model = InnovationModel::NonCentralStudent;
    const EnsembleResult res = simulate_ensemble(spec, cma, TimeGrid::monthly(360), 400, 8);
    std::size_t absorbed = 0;
    for (std::size_t p = 0; p < res.n_paths; ++p)
        for (std::size_t a = 0; a < 2; ++a) {
            bool dead = false;
            for (std::size_t k = 0; k < res.n_points(); ++k) {
                const double x = res.price(p, k, a);
                CHECK(x >= 0.0);
                if (dead) CHECK(x == 0.0);
                if (x == 0.0) dead = true;
                if (x > 0.0) CHECK(x > 1.0);  // p_min = 100 / 100
            }
            absorbed += dead;
        }
    CHECK(absorbed > 0);

    spec.p_min_absolute = 40.0;
    const PathSimulator sim(spec, cma, TimeGrid::monthly(12));
    CHECK(sim.start_path(1, 0).p_min == Eigen::Vector2d(40.0, 40.0));
}

TEST_CASE("numerical faults") {
    // with w_inf = 0 and no innovations the demeaned returns vanish and the
    // conditional variance collapses to zero once the kernel window is flushed
    const CmaParameters cma = make_cma({0.05}, {0.15});
    ProcessSpec spec;
    spec.covariance.model = CovarianceModel::AffineLmarch;
    spec.covariance.w_inf = 0.0;
    spec.covariance.kernel.taus = {1.0};
    spec.covariance.kernel.l_max = 3;
    const PathSimulator sim(spec, cma, TimeGrid::monthly(12));
    SimulationOptions opt;
    opt.zero_innovations = true;
    try {
        (void)sim.simulate(4, 1, opt);
        FAIL("expected a numerical fault");
    } catch (const NumericalFault& e) {
        CHECK(e.path() == 0);
        CHECK(e.step() == 3);
    }
    opt.fault_mode = FaultMode::SkipAndReport;
    const EnsembleResult res = sim.simulate(4, 1, opt);
    CHECK(res.partial());
    REQUIRE(res.faults.size() == 4);
    for (std::size_t p = 0; p < 4; ++p) {
        CHECK(res.faults[p].path == p);
        CHECK(res.faults[p].step == 3);
        CHECK_FALSE(res.path_ok(p));
        CHECK(std::isnan(res.price(p, 0, 0)));
    }
}

TEST_CASE("seeded history") {
    const CmaParameters cma = three_assets();
    const MarketHistory hist = make_history(cma, 60, 4, 0.03);
    const PathSimulator sim(full_spec(), cma, TimeGrid::monthly(24), hist);
    const Eigen::VectorXd last = hist.prices.row(59).transpose();
    CHECK(sim.default_initial_prices() == last);
    PathState st = sim.start_path(3, 0);
    CHECK(st.prices == last);
    CHECK(st.drift.observed() == std::min<std::size_t>(60, st.drift.window_depth()));
    CHECK_THROWS_AS(sim.start_path(3, 0, Eigen::Vector3d(1.0, 2.0, 3.0)), ValidationError);
    CHECK_NOTHROW(sim.start_path(3, 0, last));

    MarketHistory wrong = hist;
    wrong.asset_ids[1] = "B";
    CHECK_THROWS_AS(PathSimulator(full_spec(), cma, TimeGrid::monthly(24), wrong), ValidationError);
    MarketHistory bad = hist;
    bad.prices(10, 2) = -1.0;
    CHECK_THROWS_AS(PathSimulator(full_spec(), cma, TimeGrid::monthly(24), bad), ValidationError);

    // a configuration problem surfaces as a validation error, not a path fault
    CHECK_THROWS_AS(sim.simulate(3, 1, SimulationOptions{.initial_prices = Eigen::Vector3d(1, 1, 1)}),
                    ValidationError);
}
