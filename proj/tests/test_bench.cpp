#include <random>
#include <set>
#include <sstream>

#include <doctest.h>

#include "fixtures.hpp"
#include "sampler/bench.hpp"
#include "sampler/errors.hpp"

using namespace sampler;

namespace {

// Maximal runs of consecutive indices.
std::vector<std::vector<std::size_t>> clusters(const std::vector<std::size_t>& sel)
{
    std::vector<std::vector<std::size_t>> out;
    for (std::size_t i : sel) {
        if (out.empty() || i > out.back().back() + 1) out.emplace_back();
        out.back().push_back(i);
    }
    return out;
}

double centroid(const std::vector<std::size_t>& c)
{
    double s = 0.0;
    for (std::size_t i : c) s += static_cast<double>(i);
    return s / static_cast<double>(c.size());
}

std::vector<const ReportRow*> rows_of(const Report& r, const std::string& method)
{
    std::vector<const ReportRow*> out;
    for (const auto& row : r.rows)
        if (row.method == method) out.push_back(&row);
    return out;
}

}  // namespace

TEST_SUITE("bench") {

TEST_CASE("a single random draw is scored by the subset objective")
{
    const SignalModel m(ModelKind::DampedSinusoid1D, 1);
    std::mt19937_64 rng(51);
    const std::vector<FimBank> banks = {build_fim_bank(m, fixtures::random_theta(m, rng), CandidateGrid::uniform_1d(30, 1.0), NoiseSpec(0.1))};
    const Eigen::VectorXd psi = Eigen::Vector4d(1.0, 2.0, 0.5, 1.0);
    const BaselineResult r = random_baseline(banks, 8, 1, psi, 99);
    REQUIRE(r.indices.size() == 8);
    CHECK(std::is_sorted(r.indices.begin(), r.indices.end()));
    CHECK(std::set<std::size_t>(r.indices.begin(), r.indices.end()).size() == 8);
    CHECK(r.objective == subset_objective(r.indices, banks, psi));
    const BaselineResult again = random_baseline(banks, 8, 1, psi, 99);
    CHECK(again.indices == r.indices);
}

TEST_CASE("many random draws find the exhaustive optimum on a tiny grid")
{
    const SignalModel m(ModelKind::DampedSinusoid1D, 1);
    std::mt19937_64 rng(52);
    const std::vector<FimBank> banks = {build_fim_bank(m, fixtures::random_theta(m, rng), CandidateGrid::uniform_1d(8, 1.0), NoiseSpec(0.1))};
    const Eigen::VectorXd psi = Eigen::VectorXd::Ones(4);
    const BaselineResult r = random_baseline(banks, 3, 10'000, psi, 7);
    const SubsetDesign best = exhaustive_design(banks.front(), 3, psi);
    CHECK(r.objective == doctest::Approx(best.objective).epsilon(1e-12));
    CHECK(r.indices == best.indices);
    CHECK(r.trials == 10'000);
}

TEST_CASE("random draws that are all singular are reported")
{
    const SignalModel m(ModelKind::DampedSinusoid1D, 1);
    std::mt19937_64 rng(53);
    const std::vector<FimBank> banks = {build_fim_bank(m, fixtures::random_theta(m, rng), CandidateGrid::uniform_1d(8, 1.0), NoiseSpec(0.1))};
    CHECK_THROWS_AS(random_baseline(banks, 1, 20, Eigen::VectorXd::Ones(4), 1), AllSingular);
}

TEST_CASE("uniform decimation spreads the samples evenly")
{
    CHECK(uniform_decimation(CandidateGrid::uniform_1d(10), 5) == std::vector<std::size_t>{0, 2, 4, 6, 8});
    CHECK(uniform_decimation(CandidateGrid::uniform_1d(7), 7).size() == 7);
    const auto two = uniform_decimation(CandidateGrid::uniform_2d(10, 10), 25);
    REQUIRE(two.size() == 25);
    CHECK(two.front() == 0);
    CHECK(two[1] == 2);
    CHECK(two[5] == 20);
    for (std::size_t m : {1u, 7u, 13u, 40u, 100u}) {
        const auto s = uniform_decimation(CandidateGrid::uniform_2d(10, 10), m);
        CHECK(s.size() == m);
        CHECK(std::set<std::size_t>(s.begin(), s.end()).size() == m);
    }
    CHECK_THROWS_AS(uniform_decimation(CandidateGrid::uniform_1d(4), 5), ConfigError);
}

TEST_CASE("CSV fields and numbers")
{
    CHECK(csv_escape("plain") == "plain");
    CHECK(csv_escape("a,b") == "\"a,b\"");
    CHECK(csv_escape("say \"hi\"") == "\"say \"\"hi\"\"\"");
    CHECK(csv_escape("two\nlines") == "\"two\nlines\"");
    CHECK(format_number(0.1) == "0.1");
    CHECK(format_number(13.0) == "13");
    CHECK(format_number(std::numeric_limits<double>::infinity()) == "inf");
    CHECK(format_number(std::nan("")) == "nan");
    CHECK(std::stod(format_number(1.0 / 3.0)) == 1.0 / 3.0);
}

TEST_CASE("reports are byte-identical for equal inputs")
{
    Scenario s = preset("fig3");
    s.budgets = {6.0, 10.0};
    s.baseline_trials = 300;
    std::ostringstream a, b;
    write_report_csv(run_scenario(s), a);
    write_report_csv(run_scenario(s), b);
    CHECK(a.str() == b.str());
    CHECK(a.str().find("\r\n") != std::string::npos);
    s.seed = 4;
    std::ostringstream c;
    write_report_csv(run_scenario(s), c);
    CHECK(c.str() != a.str());
}

TEST_CASE("design, random and uniform rows per budget")
{
    Scenario s = preset("fig3");
    s.budgets = {8.0};
    s.baseline_trials = 200;
    const Report r = run_scenario(s);
    REQUIRE(r.rows.size() == 3);
    CHECK(r.rows[0].method == "design");
    CHECK(r.rows[1].method == "random");
    CHECK(r.rows[2].method == "uniform");
    for (const auto& row : r.rows) {
        CHECK(row.selected.size() == 8);
        CHECK(row.objective == doctest::Approx(row.crlb_worst.sum()).epsilon(1e-12));
    }
    CHECK(r.rows[0].weights.size() == 50);
    CHECK(r.rows[0].objective <= r.rows[1].objective);
}

TEST_CASE("heavier damping pulls the second cluster earlier")
{
    const Report r = run_scenario(preset("fig1"));
    const auto design = rows_of(r, "design");
    REQUIRE(design.size() == 2);
    const auto c10 = clusters(design[0]->selected);
    const auto c20 = clusters(design[1]->selected);
    CHECK(design[0]->selected.size() == 13);
    CHECK(c10.size() == 2);
    CHECK(c20.size() == 2);
    CHECK(c10.front().front() == 0);
    CHECK(c20.front().front() == 0);
    CHECK(centroid(c20.back()) > centroid(c10.back()));
}

TEST_CASE("larger chirp budgets grow the selected clusters")
{
    const Report r = run_scenario(preset("fig2"));
    const auto design = rows_of(r, "design");
    REQUIRE(design.size() == 3);
    std::size_t previous = 0;
    for (const auto* row : design) {
        CHECK(clusters(row->selected).size() >= 2);
        CHECK(row->selected.size() > previous);
        previous = row->selected.size();
    }
}

TEST_CASE("the design objective improves with the budget")
{
    Scenario s = preset("fig3");
    s.baseline_trials = 0;
    const Report r = run_scenario(s);
    const auto design = rows_of(r, "design");
    REQUIRE(design.size() == s.budgets.size());
    for (std::size_t i = 1; i < design.size(); ++i) CHECK(design[i]->objective <= design[i - 1]->objective * (1.0 + 1e-9));
}

TEST_CASE("scenarios are validated")
{
    Scenario s = preset("fig3");
    s.budgets.clear();
    CHECK_THROWS_AS(s.validate(), ConfigError);
    s = preset("fig3");
    s.variants.front().psi = Eigen::VectorXd::Ones(3);
    CHECK_THROWS_AS(s.validate(), DimensionMismatch);
    CHECK_THROWS_AS(preset("nope"), ConfigError);
    for (const auto& name : preset_names()) CHECK_NOTHROW(preset(name).validate());
}

}
