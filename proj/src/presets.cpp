#include <cmath>
#include <numbers>

#include "sampler/bench.hpp"
#include "sampler/errors.hpp"

namespace sampler {

namespace {

constexpr double kPi = std::numbers::pi;

Eigen::VectorXd all_ones(const SignalModel& m)
{
    return Eigen::VectorXd::Ones(m.num_params());
}

// Weight on frequencies and dampings only.
Eigen::VectorXd shape_only(const SignalModel& m)
{
    Eigen::VectorXd psi = Eigen::VectorXd::Zero(m.num_params());
    for (int p : m.nonlinear_params()) psi[p] = 1.0;
    return psi;
}

Eigen::VectorXd vec(std::initializer_list<double> v)
{
    Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double x : v) out[i++] = x;
    return out;
}

Scenario fig1()
{
    Scenario s;
    s.name = "fig1";
    s.model = SignalModel(ModelKind::DampedSinusoid1D, 1);
    // alpha, f and phi are placeholders.
    s.theta = vec({1.0, 0.2, 0.1, 0.5});
    s.grid = CandidateGrid::uniform_1d(50, 1.0);
    s.noise_variance = 0.1;
    s.budgets = {13.0};
    s.variants = {{"beta=1/10", all_ones(s.model), vec({1.0, 0.2, 1.0 / 10.0, 0.5})},
                  {"beta=1/20", all_ones(s.model), vec({1.0, 0.2, 1.0 / 20.0, 0.5})}};
    s.seed = 1;
    s.notes = "alpha=1, f=0.2, phi=0.5 and sigma^2=0.1 are placeholders; only beta, N and gamma are given";
    return s;
}

Scenario fig2()
{
    Scenario s;
    s.name = "fig2";
    s.model = SignalModel(ModelKind::LinearChirp1D, 2);
    s.theta = vec({5.0, 0.1, 0.01, kPi / 2.0, 5.0, 0.5, -0.003, kPi / 3.0});
    s.grid = CandidateGrid::uniform_1d(50, 1.0);
    s.noise_variance = 0.1;
    s.budgets = {15.0, 20.0, 25.0};
    s.variants = {{"all", all_ones(s.model), std::nullopt}};
    s.seed = 2;
    s.notes = "N=50 and sigma^2=0.1 are placeholders";
    return s;
}

Scenario fig3()
{
    Scenario s;
    s.name = "fig3";
    s.model = SignalModel(ModelKind::DampedSinusoid1D, 1);
    s.theta = vec({1.0, 0.2, 0.1, 0.5});
    s.grid = CandidateGrid::uniform_1d(50, 1.0);
    s.noise_variance = 0.1;
    s.budgets = {5, 6, 7, 8, 10, 12, 15, 18, 20, 22, 25};
    s.variants = {{"all", all_ones(s.model), std::nullopt}};
    s.baseline_trials = 10'000;  // 10^6 with full_scale
    s.seed = 3;
    s.notes = "theta, N and sigma^2 are placeholders; 10^4 random subsets per budget";
    return s;
}

Scenario fig4()
{
    Scenario s;
    s.name = "fig4";
    s.model = SignalModel(ModelKind::DampedSinusoid2D, 1);
    // (alpha, f_1, f_2, beta_1, beta_2, phi)
    s.theta = vec({1.0, 0.2, 0.5, 1.0 / 20.0, 1.0 / 10.0, 0.5});
    s.grid = CandidateGrid::uniform_2d(50, 50, 1.0);
    s.noise_variance = 0.1;
    s.budgets = {10, 20, 30, 40, 50};
    s.variants = {{"all", all_ones(s.model), std::nullopt}};
    s.baseline_trials = 10'000;  // 10^7 with full_scale
    s.seed = 4;
    s.notes = "10^4 random subsets per budget";
    return s;
}

Scenario fig5_6()
{
    Scenario s;
    s.name = "fig5_6";
    s.model = SignalModel(ModelKind::DampedSinusoid1D, 2);
    s.theta = vec({1.0, 0.2, 1.0 / 12.0, 0.5, 1.0, 0.65, 1.0 / 20.0, kPi / 5.0});
    s.grid = CandidateGrid::uniform_1d(50, 1.0);
    s.noise_variance = 0.01;
    s.budgets = {20, 25, 30, 35, 40};
    s.variants = {{"unweighted", all_ones(s.model), std::nullopt}, {"weighted", shape_only(s.model), std::nullopt}};
    s.trials = 500;  // 5000 with full_scale
    s.seed = 5;
    s.estimation = EstimationSpec{};
    s.notes = "500 Monte Carlo trials per design";
    return s;
}

Scenario fig7_8()
{
    Scenario s;
    s.name = "fig7_8";
    s.model = SignalModel(ModelKind::DampedSinusoid1D, 1);
    // f is a placeholder.
    s.theta = vec({1.0, 0.25, 0.1, 0.5});
    s.theta_grid = ThetaGridSpec{"beta1", 0.1, 0.022, 10};
    s.grid = CandidateGrid::uniform_1d(50, 1.0);
    s.noise_variance = 0.1;
    s.budgets = {20, 25, 30, 35, 40};
    s.variants = {{"all", all_ones(s.model), std::nullopt}};
    s.trials = 500;  // 5000 with full_scale
    s.seed = 7;
    s.estimation = EstimationSpec{};
    s.notes = "f=0.25 and N=50 are placeholders; 500 Monte Carlo trials per design; below M=20 NLS is in its low-SNR threshold region";
    return s;
}

Scenario fig9_12()
{
    Scenario s;
    s.name = "fig9_12";
    s.model = SignalModel(ModelKind::DampedSinusoid2D, 2);
    // Component 1 at f=(0.1, 0.1), component 2 at f=(0.2, 0.2), all
    // dampings 0.1.
    s.theta = vec({1.0, 0.1, 0.1, 0.1, 0.1, kPi / 3.0, 1.3, 0.2, 0.2, 0.1, 0.1, kPi / 3.0});
    s.grid = CandidateGrid::uniform_2d(16, 16, 1.0);
    s.noise_variance = 0.01;
    s.budgets = {20, 30, 40};
    s.variants = {{"unweighted", all_ones(s.model), std::nullopt}, {"weighted", shape_only(s.model), std::nullopt}};
    s.trials = 500;
    s.seed = 9;
    s.estimation = EstimationSpec{3.0, 5, true, 200};
    s.notes = "16x16 candidate grid is a placeholder; 5 estimation grid points per nonlinear parameter";
    return s;
}

}  // namespace

std::vector<std::string> preset_names()
{
    return {"fig1", "fig2", "fig3", "fig4", "fig5_6", "fig7_8", "fig9_12"};
}

Scenario preset(const std::string& name, bool full_scale)
{
    Scenario s;
    if (name == "fig1") s = fig1();
    else if (name == "fig2") s = fig2();
    else if (name == "fig3") s = fig3();
    else if (name == "fig4") s = fig4();
    else if (name == "fig5_6") s = fig5_6();
    else if (name == "fig7_8") s = fig7_8();
    else if (name == "fig9_12") s = fig9_12();
    else {
        std::string known;
        for (const auto& n : preset_names()) known += (known.empty() ? "" : ", ") + n;
        throw ConfigError("unknown preset '" + name + "' (known: " + known + ")");
    }
    if (full_scale) {
        if (s.trials > 0) s.trials = 5000;
        if (name == "fig3") s.baseline_trials = 1'000'000;
        if (name == "fig4") s.baseline_trials = 10'000'000;
        s.notes += "; full-scale trial counts";
    }
    return s;
}

}  // namespace sampler
