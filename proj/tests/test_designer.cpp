#include <algorithm>
#include <bit>
#include <numeric>
#include <random>

#include <doctest.h>

#include "barrier.hpp"
#include "fixtures.hpp"
#include "sampler/designer.hpp"
#include "sampler/errors.hpp"

using namespace sampler;

namespace {

DesignProblem one_sinusoid(std::size_t n, double budget, std::uint64_t seed = 31)
{
    const SignalModel m(ModelKind::DampedSinusoid1D, 1);
    std::mt19937_64 rng(seed);
    DesignProblem p;
    p.banks = {build_fim_bank(m, fixtures::random_theta(m, rng), CandidateGrid::uniform_1d(n, 1.0), NoiseSpec(0.1))};
    p.budget = budget;
    p.psi = Eigen::VectorXd::Ones(4);
    return p;
}

double group_norm_columns(const Eigen::VectorXd& w, std::size_t n1, std::size_t n2)
{
    double h = 0.0;
    for (std::size_t j = 0; j < n2; ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < n1; ++i) s += w[static_cast<Eigen::Index>(i * n2 + j)] * w[static_cast<Eigen::Index>(i * n2 + j)];
        h += std::sqrt(s);
    }
    return h;
}

}  // namespace

TEST_SUITE("designer") {

TEST_CASE("threshold keeps the M largest weights, ties to the lower index")
{
    const std::vector<double> w = {0.5, 0.9, 0.5, 0.1, 0.5, 1.0};
    CHECK(threshold(w, TopM{3}) == std::vector<std::size_t>{0, 1, 5});
    CHECK(threshold(w, TopM{4}) == std::vector<std::size_t>{0, 1, 2, 5});
    CHECK(threshold(w, TopM{0}).empty());
    CHECK(threshold(w, Cutoff{0.5}) == std::vector<std::size_t>{1, 5});
    CHECK_THROWS_AS(threshold(w, TopM{7}), ConfigError);
    const std::vector<double> bad = {0.2, 1.5};
    CHECK_THROWS_AS(threshold(bad, TopM{1}), ConfigError);
}

TEST_CASE("threshold tie-breaking is deterministic on random tied weights")
{
    std::mt19937_64 rng(32);
    for (int draw = 0; draw < 100; ++draw) {
        const std::size_t n = 5 + rng() % 30;
        std::vector<double> w(n);
        for (double& v : w) v = 0.25 * static_cast<double>(rng() % 5);
        const std::size_t m = rng() % (n + 1);
        // Reference: sort by (-w, index).
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return w[a] != w[b] ? w[a] > w[b] : a < b; });
        std::vector<std::size_t> expect(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(m));
        std::sort(expect.begin(), expect.end());
        const auto first = threshold(w, TopM{m});
        CHECK(first == expect);
        CHECK(threshold(w, TopM{m}) == first);
    }
}

TEST_CASE("exhaustive design enumerates every subset")
{
    DesignProblem p = one_sinusoid(8, 3.0);
    const auto best = exhaustive_design(p.banks.front(), 5, p.psi);
    double brute = std::numeric_limits<double>::infinity();
    std::vector<std::size_t> arg;
    for (unsigned mask = 0; mask < 256; ++mask) {
        if (std::popcount(mask) != 5) continue;
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < 8; ++i)
            if (mask & (1u << i)) idx.push_back(i);
        const double v = subset_objective(idx, p.banks, p.psi);
        if (v < brute) {
            brute = v;
            arg = idx;
        }
    }
    CHECK(best.objective == doctest::Approx(brute).epsilon(1e-14));
    CHECK(best.indices == arg);
    CHECK(binomial(50, 25) == doctest::Approx(126410606437752.0));
    CHECK_THROWS_AS(exhaustive_design(one_sinusoid(60, 3.0).banks.front(), 30, p.psi), TooLarge);
}

TEST_CASE("relaxed design beats the uniform allocation and spends the budget")
{
    const DesignProblem p = one_sinusoid(40, 10.0);
    const DesignResult r = solve_sdp(p);
    CHECK(r.info.status == SolveStatus::Optimal);
    CHECK(r.w.sum() <= 10.0 * (1.0 + 1e-6));
    CHECK(r.w.sum() >= 10.0 * (1.0 - 1e-4));
    CHECK((r.w.array() >= 0.0).all());
    CHECK((r.w.array() <= 1.0).all());
    const Eigen::VectorXd uniform = Eigen::VectorXd::Constant(40, 0.25);
    CHECK(r.objective <= weights_objective(uniform, p.banks, p.psi));
    CHECK(r.selected.size() == 10);
    CHECK(r.objective == doctest::Approx(weights_objective(r.w, p.banks, p.psi)).epsilon(1e-10));
}

TEST_CASE("the epigraph and direct formulations agree")
{
    std::mt19937_64 rng(33);
    for (int draw = 0; draw < 10; ++draw) {
        DesignProblem p = one_sinusoid(16 + rng() % 40, 4.0 + static_cast<double>(rng() % 8), rng());
        p.psi = (Eigen::Vector4d(0.2, 1.0, 1.0, 0.5)).cwiseProduct(Eigen::Vector4d::Constant(1.0 + draw));
        const double sdp = solve_sdp(p).objective;
        const double direct = solve_relaxed(p).objective;
        CHECK(std::abs(sdp - direct) / direct < 1e-4);
    }
}

TEST_CASE("larger budgets never give a worse relaxed objective")
{
    std::mt19937_64 rng(34);
    for (int draw = 0; draw < 100; ++draw) {
        DesignProblem p = one_sinusoid(20, 3.0, rng());
        double previous = std::numeric_limits<double>::infinity();
        for (double g : {3.0, 5.0, 8.0, 12.0, 20.0}) {
            p.budget = g;
            const double v = solve_sdp(p).objective;
            CHECK(v <= previous * (1.0 + 1e-6));
            previous = v;
        }
    }
}

TEST_CASE("a budget at least the candidate count selects everything")
{
    DesignProblem p = one_sinusoid(12, 12.0);
    const DesignResult r = solve_sdp(p);
    CHECK(r.info.budget_vacuous);
    CHECK(r.w.minCoeff() > 0.999);
    CHECK(r.selected.size() == 12);
}

TEST_CASE("CRLB caps are honoured or reported infeasible")
{
    DesignProblem p = one_sinusoid(30, 8.0);
    const DesignResult free = solve_sdp(p);
    p.caps = Eigen::Vector4d::Constant(std::numeric_limits<double>::infinity());
    (*p.caps)[1] = 0.8 * free.mu[1];
    const DesignResult capped = solve_sdp(p);
    CHECK(capped.mu[1] <= (*p.caps)[1] * (1.0 + 1e-5));
    CHECK(capped.objective >= free.objective * (1.0 - 1e-6));

    (*p.caps)[1] = 1e-12;
    try {
        solve_sdp(p);
        FAIL("expected Infeasible");
    } catch (const Infeasible& e) {
        CHECK(e.violation() > 0.0);
        CHECK(e.exit_code() == 2);
    }
}

TEST_CASE("group budgets bound the column norms")
{
    const SignalModel m(ModelKind::DampedSinusoid2D, 1);
    const ParamVector theta(m, (Eigen::VectorXd(6) << 1.0, 0.2, 0.5, 0.05, 0.1, 0.5).finished());
    DesignProblem p;
    p.banks = {build_fim_bank(m, theta, CandidateGrid::uniform_2d(8, 8, 1.0), NoiseSpec(0.1))};
    p.budget = 12.0;
    p.psi = Eigen::VectorXd::Ones(6);
    const DesignResult free = solve_sdp(p);
    const double h = group_norm_columns(free.w, 8, 8);
    p.groups = GroupBudgets{8, 8, 0.6 * h, std::numeric_limits<double>::infinity()};
    const DesignResult g = solve_sdp(p);
    CHECK(group_norm_columns(g.w, 8, 8) <= 0.6 * h * (1.0 + 1e-6));
    CHECK(g.objective >= free.objective * (1.0 - 1e-6));
}

TEST_CASE("reweighting pushes the weights toward zero or one")
{
    const DesignProblem p = one_sinusoid(40, 8.0);
    const DesignResult plain = solve_sdp(p);
    const DesignResult rw = reweight_iterate(p);
    auto fractional = [](const Eigen::VectorXd& w) { return ((w.array() > 0.02) && (w.array() < 0.98)).count(); };
    CHECK(rw.info.reweight_iterations >= 1);
    CHECK(fractional(rw.w) <= fractional(plain.w));
}

TEST_CASE("unidentifiable candidate sets and bad problems are rejected")
{
    DesignProblem p = one_sinusoid(1, 0.5);
    CHECK_THROWS_AS(solve_sdp(p), InfeasibleStart);
    p = one_sinusoid(10, 0.0);
    CHECK_THROWS_AS(solve_sdp(p), ConfigError);
    p = one_sinusoid(10, 3.0);
    p.psi = Eigen::Vector4d(1, -1, 1, 1);
    CHECK_THROWS_AS(solve_sdp(p), ConfigError);
    p.psi = Eigen::Vector3d(1, 1, 1);
    CHECK_THROWS_AS(solve_sdp(p), DimensionMismatch);
}

TEST_CASE("low-rank and dense Newton solves agree")
{
    const SignalModel m(ModelKind::DampedSinusoid1D, 1);
    std::mt19937_64 rng(35);
    for (auto mode : {detail::BarrierMode::Direct, detail::BarrierMode::Epigraph}) {
        for (int draw = 0; draw < 5; ++draw) {
            detail::BarrierSetup s;
            s.mode = mode;
            s.num_params = 4;
            s.num_candidates = 64;
            s.budget = 10.0;
            s.budget_scale = Eigen::VectorXd::Ones(64);
            s.psi = Eigen::Vector4d(1.0, 0.5, 2.0, 1.0);
            const int banks = mode == detail::BarrierMode::Direct ? 1 : 2;
            for (int l = 0; l < banks; ++l) {
                const FimBank b =
                    build_fim_bank(m, fixtures::random_theta(m, rng), CandidateGrid::uniform_1d(64, 1.0), NoiseSpec(1.0));
                s.banks.push_back(detail::factor_bank(b, Eigen::VectorXd::Ones(4)));
            }
            if (mode == detail::BarrierMode::Epigraph) s.active = {0, 1, 2, 3};
            s.caps = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(s.active.size()), std::numeric_limits<double>::infinity());
            s.delta = 1e-12;
            detail::BarrierPoint x;
            x.w = Eigen::VectorXd::NullaryExpr(64, [&](Eigen::Index) { return std::uniform_real_distribution<double>(0.02, 0.14)(rng); });
            const auto lowrank = detail::newton_direction(s, x, 10.0, false);
            const auto dense = detail::newton_direction(s, x, 10.0, true);
            CHECK((lowrank.dw - dense.dw).norm() <= 1e-6 * dense.dw.norm());
            CHECK(lowrank.decrement == doctest::Approx(dense.decrement).epsilon(1e-6));
            CHECK(lowrank.daux.size() == 0);
        }
    }
}

}
