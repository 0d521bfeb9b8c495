#include "sampler/designer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <spdlog/spdlog.h>

#include "barrier.hpp"
#include "sampler/errors.hpp"

namespace sampler {

namespace {

using detail::BarrierMode;
using detail::BarrierPoint;
using detail::BarrierSetup;

// D_pp = 1 / sqrt(median_n F_n[p, p]) over every bank.
Eigen::VectorXd diagonal_scaling(const std::vector<FimBank>& banks)
{
    const int p_dim = banks.front().dim();
    Eigen::VectorXd scale(p_dim);
    std::vector<double> diag;
    for (int p = 0; p < p_dim; ++p) {
        diag.clear();
        for (const auto& b : banks)
            for (const auto& f : b.fims) diag.push_back(f(p, p));
        auto mid = diag.begin() + static_cast<std::ptrdiff_t>(diag.size() / 2);
        std::nth_element(diag.begin(), mid, diag.end());
        double typical = *mid;
        if (!(typical > 0.0)) typical = std::accumulate(diag.begin(), diag.end(), 0.0) / static_cast<double>(diag.size());
        if (!(typical > 0.0)) typical = 1.0;
        scale[p] = 1.0 / std::sqrt(typical);
    }
    return scale;
}

BarrierSetup base_setup(const DesignProblem& problem, const Eigen::VectorXd& scale, const SolverOptions& options)
{
    BarrierSetup s;
    s.num_params = problem.num_params();
    s.num_candidates = problem.num_candidates();
    s.budget = problem.budget;
    s.budget_scale = problem.budget_scale.size() == 0
                         ? Eigen::VectorXd::Ones(static_cast<Eigen::Index>(s.num_candidates))
                         : problem.budget_scale;
    s.psi = problem.psi.cwiseProduct(scale.cwiseAbs2());
    s.force_dense = options.force_dense;
    double trace_sum = 0.0;
    double count = 0.0;
    for (const auto& b : problem.banks) {
        s.banks.push_back(detail::factor_bank(b, scale));
        trace_sum += s.banks.back().a.squaredNorm();
        count += static_cast<double>(b.size());
    }
    s.delta = 1e-9 * trace_sum / count;
    if (problem.groups) {
        const auto& g = *problem.groups;
        const auto n1 = static_cast<Eigen::Index>(g.n1);
        const auto n2 = static_cast<Eigen::Index>(g.n2);
        if (std::isfinite(g.columns)) {
            s.column_budget = g.columns;
            for (Eigen::Index j = 0; j < n2; ++j) {
                s.column_groups.emplace_back();
                for (Eigen::Index i = 0; i < n1; ++i) s.column_groups.back().push_back(i * n2 + j);
            }
        }
        if (std::isfinite(g.rows)) {
            s.row_budget = g.rows;
            for (Eigen::Index i = 0; i < n1; ++i) {
                s.row_groups.emplace_back();
                for (Eigen::Index j = 0; j < n2; ++j) s.row_groups.back().push_back(i * n2 + j);
            }
        }
    }
    return s;
}

double group_norm(const std::vector<std::vector<Eigen::Index>>& groups, const Eigen::VectorXd& w)
{
    double h = 0.0;
    for (const auto& g : groups) {
        double sq = 0.0;
        for (auto n : g) sq += w[n] * w[n];
        h += std::sqrt(sq);
    }
    return h;
}

// Strictly interior start: w_n proportional to 1 / s_n using half the budget,
// shrunk further until the group budgets hold with margin.
Eigen::VectorXd start_weights(const BarrierSetup& s)
{
    const auto n = static_cast<Eigen::Index>(s.num_candidates);
    const double c = 0.5 * s.budget / static_cast<double>(n);
    Eigen::VectorXd w(n);
    for (Eigen::Index i = 0; i < n; ++i) w[i] = std::min(0.5, c / s.budget_scale[i]);
    double shrink = 1.0;
    if (!s.column_groups.empty()) shrink = std::min(shrink, 0.5 * s.column_budget / group_norm(s.column_groups, w));
    if (!s.row_groups.empty()) shrink = std::min(shrink, 0.5 * s.row_budget / group_norm(s.row_groups, w));
    return w * shrink;
}

void check_start(const DesignProblem& problem, const BarrierSetup& setup, const Eigen::VectorXd& w0,
                 Eigen::MatrixXd& values)
{
    for (std::size_t l = 0; l < problem.banks.size(); ++l)
        if (!is_positive_definite(aggregate_fim(w0, problem.banks[l])))
            throw InfeasibleStart("aggregate FIM at the uniform start is singular for parameter grid entry " +
                                  std::to_string(l) + "; the candidates do not identify all parameters");
    if (!detail::epigraph_values(setup, w0, values))
        throw InfeasibleStart("aggregate FIM at the uniform start is too close to singular");
}

DesignResult finish(const DesignProblem& problem, const Eigen::VectorXd& w, SolverInfo info)
{
    DesignResult r;
    r.w = w.cwiseMax(0.0).cwiseMin(1.0);
    const Eigen::MatrixXd table = crlb_table(r.w, problem.banks);
    r.mu = table.rowwise().maxCoeff();
    r.mu_bound = Eigen::VectorXd::Constant(r.mu.size(), std::numeric_limits<double>::quiet_NaN());
    r.objective = problem.psi.dot(r.mu);
    r.selected = threshold(r.w, problem.effective_rounding());
    info.budget_vacuous = problem.budget_vacuous();
    r.info = info;
    return r;
}

template <class Fn>
auto annotate(int iteration, Fn&& fn) -> decltype(fn())
{
    const std::string prefix = "reweight iteration " + std::to_string(iteration) + ": ";
    try {
        return fn();
    } catch (const Infeasible& e) {
        throw Infeasible(prefix + e.what(), e.violation());
    } catch (const SingularFim& e) {
        throw SingularFim(prefix + e.what(), e.theta_index());
    } catch (const InfeasibleStart& e) {
        throw InfeasibleStart(prefix + e.what());
    } catch (const MaxIterations& e) {
        throw MaxIterations(prefix + e.what());
    }
}

}  // namespace

std::string to_string(SolveStatus s) { return s == SolveStatus::Optimal ? "optimal" : "stalled"; }

bool DesignProblem::budget_vacuous() const
{
    const double total = budget_scale.size() == 0 ? static_cast<double>(num_candidates()) : budget_scale.sum();
    return budget >= total;
}

RoundingRule DesignProblem::effective_rounding() const
{
    if (rounding) return *rounding;
    return TopM{std::min(num_candidates(), static_cast<std::size_t>(std::floor(budget + 1e-9)))};
}

void DesignProblem::validate() const
{
    if (banks.empty()) throw ConfigError("design problem has no FIM banks");
    for (const auto& b : banks) {
        validate_bank(b);
        if (b.size() != banks.front().size() || b.dim() != banks.front().dim())
            throw DimensionMismatch("FIM banks differ in candidate count or parameter count");
    }
    if (!(budget > 0.0) || !std::isfinite(budget)) throw ConfigError("budget must be positive and finite");
    if (psi.size() != num_params()) throw DimensionMismatch("psi length differs from parameter count");
    if ((psi.array() < 0.0).any() || !psi.allFinite()) throw ConfigError("psi entries must be finite and >= 0");
    if (!(psi.array() > 0.0).any()) throw ConfigError("at least one psi entry must be positive");
    if (caps) {
        if (caps->size() != num_params()) throw DimensionMismatch("caps length differs from parameter count");
        if (!(caps->array() > 0.0).all()) throw ConfigError("caps must be positive");
    }
    if (budget_scale.size() != 0) {
        if (budget_scale.size() != static_cast<Eigen::Index>(num_candidates()))
            throw DimensionMismatch("budget scaling length differs from candidate count");
        if (!(budget_scale.array() > 0.0).all()) throw ConfigError("budget scaling must be positive");
    }
    if (groups) {
        if (groups->n1 * groups->n2 != num_candidates())
            throw ConfigError("group budgets need a Cartesian grid layout matching the candidates");
        if (!(groups->columns > 0.0) || !(groups->rows > 0.0)) throw ConfigError("group budgets must be positive");
    }
}

DesignResult solve_relaxed(const DesignProblem& problem, const SolverOptions& options)
{
    problem.validate();
    if (problem.banks.size() != 1) throw ConfigError("solve_relaxed takes a single parameter vector");
    if (problem.caps) throw ConfigError("solve_relaxed does not support CRLB caps; use solve_sdp");
    const Eigen::VectorXd scale = diagonal_scaling(problem.banks);
    BarrierSetup setup = base_setup(problem, scale, options);
    setup.mode = BarrierMode::Direct;
    BarrierPoint x{start_weights(setup), Eigen::VectorXd()};
    Eigen::MatrixXd values;
    check_start(problem, setup, x.w, values);
    const auto out = detail::run_barrier(setup, std::move(x), options);
    SolverInfo info;
    info.newton_steps = out.newton_steps;
    info.outer_iterations = out.outer_iterations;
    info.duality_gap = out.gap / std::abs(out.objective);
    info.kkt_residual = out.decrement;
    info.status = out.stalled ? SolveStatus::Stalled : SolveStatus::Optimal;
    return finish(problem, out.x.w, info);
}

DesignResult solve_sdp(const DesignProblem& problem, const SolverOptions& options)
{
    problem.validate();
    const Eigen::VectorXd scale = diagonal_scaling(problem.banks);
    BarrierSetup setup = base_setup(problem, scale, options);
    setup.mode = BarrierMode::Epigraph;
    const int p_dim = problem.num_params();
    std::vector<double> scaled_caps;
    for (int p = 0; p < p_dim; ++p) {
        const double cap = problem.caps ? (*problem.caps)[p] : std::numeric_limits<double>::infinity();
        if (problem.psi[p] > 0.0 || std::isfinite(cap)) {
            setup.active.push_back(p);
            scaled_caps.push_back(cap / (scale[p] * scale[p]));
        }
    }
    setup.caps = Eigen::Map<Eigen::VectorXd>(scaled_caps.data(), static_cast<Eigen::Index>(scaled_caps.size()));

    Eigen::VectorXd w = start_weights(setup);
    Eigen::MatrixXd values;
    check_start(problem, setup, w, values);
    const auto n_active = static_cast<Eigen::Index>(setup.active.size());

    SolverInfo info;
    // values holds c_p per bank at the current w
    auto worst = [&](Eigen::Index j) { return values.row(setup.active[static_cast<std::size_t>(j)]).maxCoeff(); };
    Eigen::VectorXd mu(n_active);
    bool need_phase_one = false;
    for (Eigen::Index j = 0; j < n_active; ++j) {
        const double c = worst(j);
        mu[j] = 1.5 * c;
        if (std::isfinite(setup.caps[j])) {
            if (c < setup.caps[j])
                mu[j] = std::min(mu[j], 0.5 * (c + setup.caps[j]));
            else
                need_phase_one = true;
        }
    }

    if (need_phase_one) {
        BarrierSetup phase = setup;
        phase.mode = BarrierMode::PhaseOne;
        phase.active.clear();
        std::vector<double> pcaps;
        std::vector<Eigen::Index> map;
        for (Eigen::Index j = 0; j < n_active; ++j)
            if (std::isfinite(setup.caps[j])) {
                phase.active.push_back(setup.active[static_cast<std::size_t>(j)]);
                pcaps.push_back(setup.caps[j]);
                map.push_back(j);
            }
        phase.caps = Eigen::Map<Eigen::VectorXd>(pcaps.data(), static_cast<Eigen::Index>(pcaps.size()));
        BarrierPoint x1{w, Eigen::VectorXd(static_cast<Eigen::Index>(map.size()) + 1)};
        double s0 = 0.0;
        for (std::size_t i = 0; i < map.size(); ++i) {
            x1.aux[static_cast<Eigen::Index>(i)] = mu[map[i]];
            s0 = std::max(s0, mu[map[i]] / pcaps[i] - 1.0);
        }
        x1.aux[static_cast<Eigen::Index>(map.size())] = s0 + 1.0;
        const auto out1 = detail::run_barrier(phase, std::move(x1), options);
        info.newton_steps += out1.newton_steps;
        info.phase1_violation = out1.objective;
        spdlog::debug("phase one: relative cap slack {:.3e} after {} Newton steps", out1.objective, out1.newton_steps);
        if (!out1.phase_one_feasible) {
            const double violation = std::max(0.0, out1.objective - out1.gap);
            throw Infeasible("CRLB caps cannot be met within the budget: relative cap excess is at least " +
                                 fmt::format("{:.6g}", violation) + " (best point found: " +
                                 fmt::format("{:.6g}", std::max(out1.objective, 0.0)) + ")",
                             violation);
        }
        w = out1.x.w;
    }

    const auto out = detail::run_barrier(setup, BarrierPoint{w, Eigen::VectorXd()}, options);
    info.newton_steps += out.newton_steps;
    info.outer_iterations = out.outer_iterations;
    info.duality_gap = out.gap / std::abs(out.objective);
    info.kkt_residual = out.decrement;
    info.status = out.stalled ? SolveStatus::Stalled : SolveStatus::Optimal;
    DesignResult r = finish(problem, out.x.w, info);
    for (Eigen::Index j = 0; j < n_active; ++j) {
        const int p = setup.active[static_cast<std::size_t>(j)];
        r.mu_bound[p] = out.x.aux[j] * scale[p] * scale[p];
    }
    return r;
}

std::vector<std::size_t> threshold(std::span<const double> w, const RoundingRule& rule)
{
    for (double v : w)
        if (!(v >= 0.0 && v <= 1.0)) throw ConfigError("weights must lie in [0, 1]");
    std::vector<std::size_t> out;
    if (const auto* top = std::get_if<TopM>(&rule)) {
        if (top->m > w.size())
            throw ConfigError("cannot select " + std::to_string(top->m) + " of " + std::to_string(w.size()) +
                              " candidates");
        std::vector<std::size_t> order(w.size());
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return w[a] > w[b]; });
        out.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(top->m));
        std::sort(out.begin(), out.end());
    } else {
        const double xi = std::get<Cutoff>(rule).xi;
        for (std::size_t n = 0; n < w.size(); ++n)
            if (w[n] > xi) out.push_back(n);
    }
    return out;
}

std::vector<std::size_t> threshold(const Eigen::Ref<const Eigen::VectorXd>& w, const RoundingRule& rule)
{
    return threshold(std::span<const double>(w.data(), static_cast<std::size_t>(w.size())), rule);
}

DesignResult reweight_iterate(const DesignProblem& problem, const ReweightOptions& reweight,
                              const SolverOptions& options)
{
    if (reweight.max_iter < 1) throw ConfigError("reweighting needs max_iter >= 1");
    if (!(reweight.epsilon > 0.0)) throw ConfigError("reweighting epsilon must be positive");
    DesignResult current = annotate(1, [&] { return solve_sdp(problem, options); });
    int steps = current.info.newton_steps;
    int iteration = 1;
    for (int j = 2; j <= reweight.max_iter; ++j) {
        DesignProblem next = problem;
        next.budget_scale = (current.w.array() + reweight.epsilon).inverse().matrix();
        if (problem.budget_scale.size() != 0) next.budget_scale = next.budget_scale.cwiseProduct(problem.budget_scale);
        DesignResult updated = annotate(j, [&] { return solve_sdp(next, options); });
        const double change = (updated.w - current.w).cwiseAbs().maxCoeff();
        steps += updated.info.newton_steps;
        current = std::move(updated);
        iteration = j;
        spdlog::debug("reweight iteration {}: max weight change {:.3e}", j, change);
        if (change < reweight.tol) break;
    }
    current.info.reweight_iterations = iteration;
    current.info.newton_steps = steps;
    current.selected = threshold(current.w, problem.effective_rounding());
    return current;
}

double subset_objective(std::span<const std::size_t> indices, std::span<const FimBank> banks,
                        const Eigen::Ref<const Eigen::VectorXd>& psi)
{
    const Eigen::MatrixXd table = crlb_table(indices, banks);
    return psi.dot(table.rowwise().maxCoeff());
}

double weights_objective(const Eigen::Ref<const Eigen::VectorXd>& w, std::span<const FimBank> banks,
                         const Eigen::Ref<const Eigen::VectorXd>& psi)
{
    const Eigen::MatrixXd table = crlb_table(w, banks);
    return psi.dot(table.rowwise().maxCoeff());
}

double binomial(std::size_t n, std::size_t k)
{
    if (k > n) return 0.0;
    k = std::min(k, n - k);
    double r = 1.0;
    for (std::size_t i = 1; i <= k; ++i) r = r * static_cast<double>(n - k + i) / static_cast<double>(i);
    return std::round(r);
}

SubsetDesign exhaustive_design(const FimBank& bank, std::size_t m, const Eigen::Ref<const Eigen::VectorXd>& psi)
{
    validate_bank(bank);
    const std::size_t n = bank.size();
    if (m == 0 || m > n) throw ConfigError("subset size must be in [1, N]");
    if (psi.size() != bank.dim()) throw DimensionMismatch("psi length differs from parameter count");
    if (binomial(n, m) > 1e6) throw TooLarge("C(" + std::to_string(n) + ", " + std::to_string(m) + ") exceeds 1e6 subsets");

    std::vector<std::size_t> idx(m);
    std::iota(idx.begin(), idx.end(), 0);
    SubsetDesign best;
    best.objective = std::numeric_limits<double>::infinity();
    for (;;) {
        const Eigen::MatrixXd f = subset_fim(idx, bank);
        if (is_positive_definite(f)) {
            const double obj = weighted_crlb_sum(f, psi);
            if (obj < best.objective) {
                best.objective = obj;
                best.indices = idx;
            }
        } else {
            ++best.singular_skipped;
        }
        // next combination in lexicographic order
        std::size_t i = m;
        while (i > 0 && idx[i - 1] == n - m + (i - 1)) --i;
        if (i == 0) break;
        ++idx[i - 1];
        for (std::size_t j = i; j < m; ++j) idx[j] = idx[j - 1] + 1;
    }
    if (best.indices.empty()) throw AllSingular("every " + std::to_string(m) + "-subset has a singular FIM");
    return best;
}

}  // namespace sampler
