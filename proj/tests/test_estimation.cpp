#include <numeric>
#include <random>

#include <doctest.h>

#include "fixtures.hpp"
#include "sampler/errors.hpp"
#include "sampler/estimation.hpp"

using namespace sampler;

namespace {

std::vector<std::size_t> all_indices(std::size_t n)
{
    std::vector<std::size_t> v(n);
    std::iota(v.begin(), v.end(), std::size_t{0});
    return v;
}

}  // namespace

TEST_SUITE("estimation") {

TEST_CASE("trial seeds are deterministic and distinct")
{
    CHECK(trial_seed(5, 3) == trial_seed(5, 3));
    CHECK(trial_seed(5, 3) != trial_seed(5, 4));
    CHECK(trial_seed(5, 3) != trial_seed(6, 3));
}

TEST_CASE("simulated noise is circular complex Gaussian with variance sigma^2")
{
    const SignalModel m(ModelKind::DampedSinusoid1D, 1);
    const ParamVector theta(m, Eigen::Vector4d(1.0, 0.2, 0.001, 0.5));
    const std::size_t n = 20000;
    const auto grid = CandidateGrid::uniform_1d(n);
    const double s2 = 0.5;
    const auto idx = all_indices(n);
    const Observation obs = simulate(m, theta, grid, idx, NoiseSpec(s2), 77);
    Eigen::VectorXcd e(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) e[static_cast<Eigen::Index>(i)] = obs.values[static_cast<Eigen::Index>(i)] - mean(m, theta, grid.point(i));
    const double dn = static_cast<double>(n);
    const double se = std::sqrt(s2 / dn);
    CHECK(std::abs(e.mean()) < 5.0 * se);
    CHECK(std::abs(e.squaredNorm() / dn - s2) < 5.0 * s2 / std::sqrt(dn));
    CHECK(std::abs(e.real().squaredNorm() / dn - s2 / 2) < 5.0 * s2 / std::sqrt(dn));
    CHECK(std::abs(e.cwiseProduct(e).mean()) < 5.0 * s2 / std::sqrt(dn));

    const Observation again = simulate(m, theta, grid, idx, NoiseSpec(s2), 77);
    CHECK(again.values == obs.values);
    const Observation clean = simulate(m, theta, grid, std::vector<std::size_t>{3, 9}, NoiseSpec(0.0), 1);
    CHECK(clean.values[1] == mean(m, theta, grid.point(9)));
    CHECK(clean.times(1, 0) == 9.0);
    CHECK_THROWS_AS(simulate(m, theta, grid, std::vector<std::size_t>{n}, NoiseSpec(0.1), 1), ConfigError);
}

TEST_CASE("profile cost equals a direct least-squares fit")
{
    const SignalModel m(ModelKind::DampedSinusoid1D, 2);
    std::mt19937_64 rng(41);
    const ParamVector theta = fixtures::random_theta(m, rng);
    const auto grid = CandidateGrid::uniform_1d(30, 1.0);
    const std::vector<std::size_t> idx = {0, 2, 3, 7, 8, 12, 15, 20, 22, 29};
    const Observation obs = simulate(m, theta, grid, idx, NoiseSpec(0.05), 5);
    EstimationGrid g;
    g.values = {{0.1}, {0.05}, {0.3}, {0.02}};
    const NlsEstimator est(m, obs.times, g);
    const Eigen::Vector4d nl(0.21, 0.04, 0.33, 0.03);
    Eigen::VectorXcd amps;
    const double cost = est.profile_cost(obs.values, nl, &amps);

    Eigen::MatrixXcd b(static_cast<Eigen::Index>(idx.size()), 2);
    for (Eigen::Index n = 0; n < b.rows(); ++n) {
        const double t = obs.times(n, 0);
        b(n, 0) = std::exp(Complex(-0.04 * t, 2 * std::numbers::pi * 0.21 * t));
        b(n, 1) = std::exp(Complex(-0.03 * t, 2 * std::numbers::pi * 0.33 * t));
    }
    const Eigen::VectorXcd c = (b.adjoint() * b).ldlt().solve(b.adjoint() * obs.values);
    CHECK(cost == doctest::Approx(0.5 * (obs.values - b * c).squaredNorm()).epsilon(1e-10));
    CHECK((amps - c).norm() <= 1e-9 * c.norm());
}

TEST_CASE("grid search returns the first minimizer of the profile cost")
{
    std::mt19937_64 rng(42);
    for (int k : {1, 2}) {
        const SignalModel m(ModelKind::DampedSinusoid1D, k);
        const ParamVector theta = fixtures::random_theta(m, rng);
        const auto grid = CandidateGrid::uniform_1d(24, 1.0);
        const auto idx = all_indices(24);
        const Observation obs = simulate(m, theta, grid, idx, NoiseSpec(0.3), 9);
        EstimationGrid g;
        for (int p : m.nonlinear_params()) {
            std::vector<double> v;
            for (int i = 0; i < 4; ++i) v.push_back(std::max(0.0, theta[p] + 0.01 * (i - 1.5)));
            g.values.push_back(v);
        }
        const NlsEstimator est(m, obs.times, g);
        std::size_t best = 0;
        double best_cost = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < est.grid_size(); ++i) {
            const double c = est.profile_cost(obs.values, est.grid_point(i));
            if (c < best_cost * (1.0 - 1e-12)) {
                best_cost = c;
                best = i;
            }
        }
        const ParamVector hat = est.estimate(obs.values);
        const Eigen::VectorXd expect = est.grid_point(best);
        const auto nl = m.nonlinear_params();
        for (std::size_t i = 0; i < nl.size(); ++i) CHECK(hat[nl[i]] == expect[static_cast<Eigen::Index>(i)]);
    }
}

TEST_CASE("noiseless data on the grid is recovered exactly")
{
    for (auto kind : {ModelKind::DampedSinusoid1D, ModelKind::DampedSinusoid2D, ModelKind::LinearChirp1D}) {
        const SignalModel m(kind, kind == ModelKind::DampedSinusoid2D ? 1 : 2);
        std::mt19937_64 rng(43);
        const ParamVector theta = fixtures::random_theta(m, rng);
        const auto grid = m.dims() == 1 ? CandidateGrid::uniform_1d(40, 1.0) : CandidateGrid::uniform_2d(8, 8, 1.0);
        const Observation obs = simulate(m, theta, grid, all_indices(grid.size()), NoiseSpec(0.0), 1);
        EstimationGrid g = EstimationGrid::around(m, theta, Eigen::VectorXd::Constant(m.num_params(), 1e-6), 3.0, 5);
        g.polish = true;
        const ParamVector hat = nls_estimate(obs, m, g);
        CHECK((hat.values() - theta.values()).norm() <= 1e-8 * theta.values().norm());
    }
}

TEST_CASE("polishing refines an off-grid estimate")
{
    const SignalModel m(ModelKind::DampedSinusoid1D, 1);
    const ParamVector theta(m, Eigen::Vector4d(1.0, 0.2013, 0.0517, 0.5));
    const auto grid = CandidateGrid::uniform_1d(40, 1.0);
    const Observation obs = simulate(m, theta, grid, all_indices(40), NoiseSpec(0.0), 1);
    EstimationGrid g;
    g.values = {{0.195, 0.2, 0.205}, {0.045, 0.05, 0.055}};
    const ParamVector coarse = nls_estimate(obs, m, g);
    g.polish = true;
    const ParamVector fine = nls_estimate(obs, m, g);
    CHECK(std::abs(fine[1] - 0.2013) < std::abs(coarse[1] - 0.2013));
    CHECK(std::abs(fine[2] - 0.0517) < std::abs(coarse[2] - 0.0517));
}

TEST_CASE("estimation grids are validated")
{
    EstimationGrid g;
    CHECK_THROWS_AS(g.size(), EmptyGrid);
    g.values = {{1.0}, {}};
    CHECK_THROWS_AS(g.size(), EmptyGrid);
    g.values.assign(6, std::vector<double>(11, 0.0));
    CHECK_THROWS_AS(g.size(), TooLarge);
    const SignalModel m(ModelKind::DampedSinusoid1D, 1);
    const ParamVector theta(m, Eigen::Vector4d(1.0, 0.2, 0.01, 0.0));
    const auto a = EstimationGrid::around(m, theta, Eigen::Vector4d(1.0, 1e-4, 1e-4, 1.0), 3.0, 7);
    REQUIRE(a.values.size() == 2);
    CHECK(a.values[0].front() == doctest::Approx(0.2 - 0.03));
    CHECK(a.values[0].back() == doctest::Approx(0.2 + 0.03));
    CHECK(a.values[1].front() == 0.0);
    CHECK(a.values[1].back() == doctest::Approx(0.06));
    CHECK_THROWS_AS(NlsEstimator(m, Eigen::MatrixXd::Ones(3, 1), EstimationGrid{{{0.2}}}), DimensionMismatch);
}

TEST_CASE("rmse sums mean squared errors over the subset")
{
    const SignalModel m(ModelKind::DampedSinusoid1D, 1);
    const ParamVector truth(m, Eigen::Vector4d(1.0, 0.2, 0.1, 0.0));
    const std::vector<ParamVector> est = {ParamVector(m, Eigen::Vector4d(1.0, 0.23, 0.1, 0.0)),
                                          ParamVector(m, Eigen::Vector4d(1.0, 0.2, 0.14, 0.0))};
    const std::vector<int> sub = {1, 2};
    CHECK(rmse(est, truth, sub) == doctest::Approx(std::sqrt(0.03 * 0.03 / 2 + 0.04 * 0.04 / 2)));
    const std::vector<ParamVector> truths = {truth, ParamVector(m, Eigen::Vector4d(1.0, 0.2, 0.14, 0.0))};
    CHECK(rmse(est, truths, sub) == doctest::Approx(std::sqrt(0.03 * 0.03 / 2)));
}

}
