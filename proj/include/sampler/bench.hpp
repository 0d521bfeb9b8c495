#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sampler/designer.hpp"
#include "sampler/estimation.hpp"
#include "sampler/fisher.hpp"
#include "sampler/models.hpp"

namespace sampler {

struct BaselineResult {
    std::vector<std::size_t> indices;  // sorted
    double objective = 0.0;
    std::size_t trials = 0;
    std::size_t singular_skipped = 0;
};

// Best of `trials` uniformly drawn M-subsets under sum_p psi_p max over banks
// of CRLB_p. Trial i draws from trial_seed(seed, i); ties go to the earlier
// trial. Throws AllSingular when every draw is singular.
BaselineResult random_baseline(std::span<const FimBank> banks, std::size_t m, std::size_t trials,
                               const Eigen::Ref<const Eigen::VectorXd>& psi, std::uint64_t seed);

// M evenly spread candidates: evenly spaced indices in 1-D, a near-square
// sub-lattice in row-major order on a Cartesian 2-D layout.
std::vector<std::size_t> uniform_decimation(const CandidateGrid& grid, std::size_t m);

// Theta_l sets `param` to lower + l * delta / count, l = 0..count-1.
struct ThetaGridSpec {
    std::string param;
    double lower = 0.0;
    double delta = 0.0;
    int count = 1;
};

struct ScenarioVariant {
    std::string label;
    Eigen::VectorXd psi;
    std::optional<Eigen::VectorXd> theta;  // replaces the scenario's true parameters
};

struct ReweightSettings {
    bool enabled = false;
    ReweightOptions options;
};

struct EstimationSpec {
    double width = 3.0;  // half-width in root-CRLB units
    int points = 15;
    bool polish = true;
    int polish_evaluations = 200;
};

struct Scenario {
    std::string name;
    SignalModel model{ModelKind::DampedSinusoid1D, 1};
    Eigen::VectorXd theta;
    std::optional<ThetaGridSpec> theta_grid;
    CandidateGrid grid = CandidateGrid::uniform_1d(1);
    double noise_variance = 1.0;
    std::vector<double> budgets;
    std::vector<ScenarioVariant> variants;
    std::optional<Eigen::VectorXd> caps;             // +inf = uncapped
    std::optional<std::pair<double, double>> group_budgets;  // (columns, rows)
    ReweightSettings reweight;
    std::optional<RoundingRule> rounding;
    int trials = 0;                  // Monte Carlo estimation trials; 0 skips simulation
    std::size_t baseline_trials = 0; // random subsets per budget; 0 skips the comparison
    std::uint64_t seed = 1;
    std::optional<EstimationSpec> estimation;
    std::string notes;

    // Throws ConfigError on inconsistent settings.
    void validate() const;
    ParamGrid thetas(const Eigen::VectorXd& truth) const;

    // Designs do not depend on the noise level. A noiseless scenario is
    // designed at unit variance and its CRLBs are scaled by crlb_scale() = 0.
    double design_variance() const { return noise_variance > 0.0 ? noise_variance : 1.0; }
    double crlb_scale() const { return noise_variance / design_variance(); }

    // FIM banks of one variant at design_variance().
    std::vector<FimBank> banks(const ScenarioVariant& v) const;
    DesignProblem problem(const ScenarioVariant& v, std::vector<FimBank> banks, double budget) const;
    // solve_sdp, or reweight_iterate when reweighting is enabled.
    DesignResult design(const DesignProblem& problem) const;
};

// Named benchmark scenarios at desk scale.
// `full_scale` raises the trial counts.
std::vector<std::string> preset_names();
Scenario preset(const std::string& name, bool full_scale = false);

struct ReportRow {
    std::string variant;
    std::string method;  // design, random or uniform
    double budget = 0.0;
    std::vector<std::size_t> selected;
    Eigen::VectorXd crlb_best;   // per parameter, over Theta
    Eigen::VectorXd crlb_worst;
    double objective = 0.0;      // sum_p psi_p crlb_worst_p; +inf if singular
    std::vector<double> root_crlb_best;   // per subset
    std::vector<double> root_crlb_worst;
    std::vector<double> rmse;             // per subset; NaN without simulation
    std::size_t trials = 0;
    std::size_t singular_skipped = 0;
    std::string status;
    double design_seconds = 0.0;
    double eval_seconds = 0.0;
    // Relaxed weights of design rows, empty otherwise.
    Eigen::VectorXd weights;
    Eigen::VectorXd mu_relaxed;  // worst-case CRLB at the relaxed weights
};

struct Report {
    std::string scenario;
    std::vector<std::string> param_names;
    std::vector<std::string> subset_names;
    std::vector<std::vector<int>> subsets;
    std::vector<ReportRow> rows;
    std::string notes;
};

// Designs every (variant, budget) pair, evaluates the selected sets over
// Theta and, as configured, simulates NLS estimates and runs the baselines.
Report run_scenario(const Scenario& s);

// run_scenario with simulation required (at least 100 trials).
Report crlb_rmse_curve(const Scenario& s);

// Shortest decimal text that reads back to the same double; "inf", "nan".
std::string format_number(double v);
// Quotes a CSV field when it holds a comma, quote or line break.
std::string csv_escape(const std::string& field);

// RFC-4180 CSV, one row per report row. Timings are left out so that equal
// inputs give byte-identical files.
void write_report_csv(const Report& report, std::ostream& out);
void write_report_summary(const Report& report, std::ostream& out);

}  // namespace sampler
