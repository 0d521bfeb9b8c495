#pragma once

// Log-barrier path-following solver over the candidate weights w and a few
// epigraph variables. Internal to the designer.

#include <cstddef>
#include <vector>

#include <Eigen/Dense>

#include "sampler/designer.hpp"

namespace sampler::detail {

// Per-candidate FIMs as symmetric factors: F_n = sum_{k in [start[n], start[n+1])} a_k a_k^T.
struct FactoredBank {
    Eigen::MatrixXd a;
    std::vector<Eigen::Index> start;
    std::vector<Eigen::Index> owner;  // column -> candidate
};

FactoredBank factor_bank(const FimBank& bank, const Eigen::VectorXd& scale);

enum class BarrierMode {
    Direct,    // t * sum_p psi_p c_p(w)
    Epigraph,  // t * sum_p psi_p mu_p, mu_p >= c_p(w) for every bank
    PhaseOne,  // t * s, mu_p <= cap_p (1 + s) for capped parameters
};

struct BarrierSetup {
    BarrierMode mode = BarrierMode::Epigraph;
    std::vector<FactoredBank> banks;
    int num_params = 0;
    std::size_t num_candidates = 0;
    double budget = 0.0;
    Eigen::VectorXd budget_scale;
    Eigen::VectorXd psi;          // scaled, per parameter
    std::vector<int> active;      // parameters carrying an epigraph variable; empty in direct mode
    Eigen::VectorXd caps;         // scaled, per active entry; +inf = none
    std::vector<std::vector<Eigen::Index>> column_groups;
    std::vector<std::vector<Eigen::Index>> row_groups;
    double column_budget = 0.0;
    double row_budget = 0.0;
    double delta = 0.0;           // B = F(w) - delta I must stay PD
    bool force_dense = false;

    // Phase one carries the epigraph variables and its slack; the epigraph
    // mode minimizes them out in closed form.
    Eigen::Index num_aux() const
    {
        return mode == BarrierMode::PhaseOne ? static_cast<Eigen::Index>(active.size()) + 1 : 0;
    }
    double barrier_parameter() const;
};

struct BarrierPoint {
    Eigen::VectorXd w;
    Eigen::VectorXd aux;  // phase-one variables; the epigraph values on output in epigraph mode
};

struct BarrierOutcome {
    BarrierPoint x;
    double objective = 0.0;
    int newton_steps = 0;
    int outer_iterations = 0;
    double gap = 0.0;        // absolute m / t
    double decrement = 0.0;  // last lambda^2 / 2
    bool stalled = false;
    bool phase_one_feasible = false;
    bool phase_one_infeasible = false;
};

// c_p(w) = e_p^T (F(w) - delta I)^-1 e_p for each bank (columns) and each
// parameter (rows); returns false if some B is not PD.
bool epigraph_values(const BarrierSetup& setup, const Eigen::VectorXd& w, Eigen::MatrixXd& values);

BarrierOutcome run_barrier(const BarrierSetup& setup, BarrierPoint start, const SolverOptions& options);

// Newton direction of the barrier objective at x for parameter t, exposed for
// tests comparing the low-rank and dense solves.
struct NewtonDirection {
    Eigen::VectorXd dw;
    Eigen::VectorXd daux;
    double decrement = 0.0;
    double value = 0.0;
};
NewtonDirection newton_direction(const BarrierSetup& setup, const BarrierPoint& x, double t, bool dense);

}  // namespace sampler::detail
