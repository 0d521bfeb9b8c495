#pragma once

#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "sampler/fisher.hpp"

namespace sampler {

// Budgets on the l2,1 norms of the candidate weights reshaped row-major into
// an N1 x N2 matrix W: `columns` bounds sum_j ||W(:, j)||_2 (= ||W^T||_{2,1}),
// `rows` bounds sum_i ||W(i, :)||_2 (= ||W||_{2,1}). Infinity disables a bound.
struct GroupBudgets {
    std::size_t n1 = 0;
    std::size_t n2 = 0;
    double columns = std::numeric_limits<double>::infinity();
    double rows = std::numeric_limits<double>::infinity();
};

struct TopM {
    std::size_t m;
};
struct Cutoff {
    double xi;
};
using RoundingRule = std::variant<TopM, Cutoff>;

struct DesignProblem {
    std::vector<FimBank> banks;  // one per parameter vector in the set
    double budget = 0.0;         // bound on sum_n s_n w_n
    Eigen::VectorXd psi;         // parameter emphasis, >= 0
    // Upper bounds on the worst-case CRLB per parameter; +inf = uncapped.
    std::optional<Eigen::VectorXd> caps;
    std::optional<GroupBudgets> groups;
    // Per-candidate budget scaling s_n (reweighting); empty means all ones.
    Eigen::VectorXd budget_scale;
    // Defaults to TopM(floor(budget)).
    std::optional<RoundingRule> rounding;

    std::size_t num_candidates() const { return banks.empty() ? 0 : banks.front().size(); }
    int num_params() const { return banks.empty() ? 0 : banks.front().dim(); }
    // Budget at least the candidate count: the budget constraint never binds.
    bool budget_vacuous() const;
    RoundingRule effective_rounding() const;
    void validate() const;
};

struct SolverOptions {
    double gap_tol = 1e-7;     // relative duality-gap target m / t <= gap_tol * objective
    double t_factor = 10.0;    // barrier parameter growth per outer iteration
    double newton_tol = 1e-9;  // centering stops when lambda^2 / 2 falls below this
    int max_newton = 4000;
    // Solve Newton systems with dense Cholesky even when the low-rank form applies.
    bool force_dense = false;
};

enum class SolveStatus { Optimal, Stalled };

struct SolverInfo {
    int newton_steps = 0;
    int outer_iterations = 0;
    int reweight_iterations = 0;
    double duality_gap = 0.0;      // relative, m / (t * objective)
    double kkt_residual = 0.0;     // final Newton decrement lambda^2 / 2
    double phase1_violation = 0.0; // relative cap slack reached by phase I (<0 feasible)
    SolveStatus status = SolveStatus::Optimal;
    bool budget_vacuous = false;
};

std::string to_string(SolveStatus s);

struct DesignResult {
    Eigen::VectorXd w;
    // Worst-case CRLB per parameter at w, evaluated without regularization.
    Eigen::VectorXd mu;
    // Solver epigraph values for parameters in the solve (NaN otherwise).
    Eigen::VectorXd mu_bound;
    std::vector<std::size_t> selected;
    double objective = 0.0;  // sum_p psi_p mu_p
    SolverInfo info;
};

// min tr[(sum_n w_n F_n)^-1] over 1^T w <= budget, 0 <= w <= 1, worked
// directly on the trace objective. Needs a single bank; psi other than all
// ones weights the trace terms.
DesignResult solve_relaxed(const DesignProblem& problem, const SolverOptions& options = {});

// Epigraph form: min sum_p psi_p mu_p with one Schur-complement LMI per
// parameter and per bank, plus caps and group budgets when present.
DesignResult solve_sdp(const DesignProblem& problem, const SolverOptions& options = {});

std::vector<std::size_t> threshold(std::span<const double> w, const RoundingRule& rule);
std::vector<std::size_t> threshold(const Eigen::Ref<const Eigen::VectorXd>& w, const RoundingRule& rule);

struct ReweightOptions {
    int max_iter = 10;
    double epsilon = 1e-6;
    double tol = 1e-3;
};

DesignResult reweight_iterate(const DesignProblem& problem, const ReweightOptions& reweight = {},
                              const SolverOptions& options = {});

struct SubsetDesign {
    std::vector<std::size_t> indices;
    double objective = 0.0;
    std::size_t singular_skipped = 0;
};

// sum_p psi_p max over banks of CRLB_p for a fixed index set. Throws
// SingularFim if any bank's FIM is singular.
double subset_objective(std::span<const std::size_t> indices, std::span<const FimBank> banks,
                        const Eigen::Ref<const Eigen::VectorXd>& psi);

// Same for relaxed weights.
double weights_objective(const Eigen::Ref<const Eigen::VectorXd>& w, std::span<const FimBank> banks,
                         const Eigen::Ref<const Eigen::VectorXd>& psi);

// Enumerates all M-subsets in lexicographic order; guarded at C(N, M) <= 1e6.
SubsetDesign exhaustive_design(const FimBank& bank, std::size_t m, const Eigen::Ref<const Eigen::VectorXd>& psi);

double binomial(std::size_t n, std::size_t k);

}  // namespace sampler
