#include "sampler/bench.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>

#include <spdlog/spdlog.h>

#include "sampler/errors.hpp"
#include "sampler/parallel.hpp"

namespace sampler {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double seconds_since(std::chrono::steady_clock::time_point start)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

// Rethrows with the scenario position prepended.
template <class F>
auto with_context(const std::string& where, F&& f)
{
    try {
        return f();
    } catch (const Infeasible& e) {
        throw Infeasible(where + ": " + e.what(), e.violation());
    } catch (const SingularFim& e) {
        throw SingularFim(where + ": " + e.what(), e.theta_index());
    } catch (const InfeasibleStart& e) {
        throw InfeasibleStart(where + ": " + e.what());
    } catch (const AllSingular& e) {
        throw AllSingular(where + ": " + e.what());
    } catch (const TooLarge& e) {
        throw TooLarge(where + ": " + e.what());
    } catch (const EmptyGrid& e) {
        throw EmptyGrid(where + ": " + e.what());
    } catch (const ConfigError& e) {
        throw ConfigError(where + ": " + e.what());
    } catch (const MaxIterations& e) {
        throw MaxIterations(where + ": " + e.what());
    }
}

struct SetEvaluation {
    Eigen::VectorXd best;
    Eigen::VectorXd worst;
    double objective = kInf;
    std::vector<double> root_best;
    std::vector<double> root_worst;
    bool singular = false;
};

// CRLBs of a fixed index set over every bank, scaled by `noise_scale`.
SetEvaluation evaluate_set(std::span<const std::size_t> indices, std::span<const FimBank> banks,
                           const Eigen::VectorXd& psi, const std::vector<std::vector<int>>& subsets, double noise_scale)
{
    SetEvaluation ev;
    const int p_dim = banks.front().dim();
    Eigen::MatrixXd table;
    try {
        table = crlb_table(indices, banks) * noise_scale;
    } catch (const SingularFim&) {
        ev.singular = true;
        ev.best = Eigen::VectorXd::Constant(p_dim, kNaN);
        ev.worst = ev.best;
        ev.root_best.assign(subsets.size(), kNaN);
        ev.root_worst.assign(subsets.size(), kNaN);
        return ev;
    }
    ev.best = table.rowwise().minCoeff();
    ev.worst = table.rowwise().maxCoeff();
    ev.objective = psi.dot(ev.worst);
    for (const auto& s : subsets) {
        Eigen::VectorXd sums = Eigen::VectorXd::Zero(table.cols());
        for (int p : s) sums += table.row(p).transpose();
        ev.root_best.push_back(std::sqrt(sums.minCoeff()));
        ev.root_worst.push_back(std::sqrt(sums.maxCoeff()));
    }
    return ev;
}

// Uniform draw on the interval covered by the theta grid, away from its points.
double off_grid_draw(const ThetaGridSpec& g, std::uint64_t seed)
{
    const auto [lo, hi] = grid_interval(g.lower, g.delta, g.count);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(lo, hi);
    for (;;) {
        const double v = u(rng);
        bool near = false;
        for (int l = 0; l < g.count; ++l)
            if (std::abs(v - (g.lower + l * g.delta / g.count)) <= 1e-12) near = true;
        if (!near || !(hi > lo)) return v;
    }
}

Eigen::MatrixXd times_of(const CandidateGrid& grid, std::span<const std::size_t> indices)
{
    Eigen::MatrixXd t(static_cast<Eigen::Index>(indices.size()), grid.dims());
    for (std::size_t i = 0; i < indices.size(); ++i) t.row(static_cast<Eigen::Index>(i)) = grid.point(indices[i]).transpose();
    return t;
}

// CRLBs of the index set at one parameter vector.
Eigen::VectorXd crlb_at(const SignalModel& model, const ParamVector& theta, const Eigen::MatrixXd& times,
                        double variance)
{
    const NoiseSpec unit(1.0);
    Eigen::MatrixXd fim = Eigen::MatrixXd::Zero(model.num_params(), model.num_params());
    for (Eigen::Index i = 0; i < times.rows(); ++i) fim += per_sample_fim(model, theta, times.row(i).transpose(), unit);
    return crlb_diag(fim) * variance;
}

std::vector<double> simulate_rmse(const Scenario& s, const Eigen::VectorXd& truth, std::span<const std::size_t> selected,
                                  const std::vector<std::vector<int>>& subsets)
{
    const auto& model = s.model;
    const EstimationSpec& spec = *s.estimation;
    const NoiseSpec noise(s.noise_variance);
    const Eigen::MatrixXd times = times_of(s.grid, selected);
    const std::size_t trials = static_cast<std::size_t>(s.trials);

    auto grid_at = [&](const ParamVector& theta) {
        EstimationGrid g = EstimationGrid::around(model, theta, crlb_at(model, theta, times, s.noise_variance),
                                                  spec.width, spec.points);
        g.polish = spec.polish;
        g.polish_evaluations = spec.polish_evaluations;
        return g;
    };

    const ParamVector base(model, truth);
    std::optional<NlsEstimator> shared;
    if (!s.theta_grid) shared.emplace(model, times, grid_at(base));
    std::optional<int> grid_param;
    if (s.theta_grid) grid_param = model.param_index(s.theta_grid->param);

    std::vector<std::optional<ParamVector>> estimates(trials);
    std::vector<std::optional<ParamVector>> truths(trials);
    parallel_for(trials, [&](std::size_t i) {
        const std::uint64_t seed = trial_seed(s.seed, i);
        ParamVector theta = base;
        if (grid_param) theta = base.with(model, *grid_param, off_grid_draw(*s.theta_grid, trial_seed(seed, 1)));
        const Observation obs = simulate(model, theta, s.grid, selected, noise, seed);
        if (shared) {
            estimates[i].emplace(shared->estimate(obs.values));
        } else {
            estimates[i].emplace(NlsEstimator(model, times, grid_at(theta)).estimate(obs.values));
        }
        truths[i].emplace(theta);
    });
    std::vector<ParamVector> est;
    std::vector<ParamVector> tru;
    for (std::size_t i = 0; i < trials; ++i) {
        est.push_back(*estimates[i]);
        tru.push_back(*truths[i]);
    }
    std::vector<double> out;
    for (const auto& sub : subsets) out.push_back(rmse(est, tru, sub));
    return out;
}

void fill_row(ReportRow& row, const SetEvaluation& ev)
{
    row.crlb_best = ev.best;
    row.crlb_worst = ev.worst;
    row.objective = ev.objective;
    row.root_crlb_best = ev.root_best;
    row.root_crlb_worst = ev.root_worst;
    if (ev.singular) row.status = "singular";
}

}  // namespace

std::string format_number(double v)
{
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

std::string csv_escape(const std::string& s)
{
    if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

BaselineResult random_baseline(std::span<const FimBank> banks, std::size_t m, std::size_t trials,
                               const Eigen::Ref<const Eigen::VectorXd>& psi, std::uint64_t seed)
{
    if (banks.empty()) throw ConfigError("no FIM banks given");
    const std::size_t n = banks.front().size();
    if (m == 0 || m > n) throw ConfigError("cannot draw " + std::to_string(m) + " of " + std::to_string(n) + " candidates");
    if (trials == 0) throw ConfigError("random baseline needs at least one trial");
    const Eigen::VectorXd weights = psi;

    std::vector<double> objective(trials, kInf);
    std::vector<std::vector<std::size_t>> sets(trials);
    parallel_for(trials, [&](std::size_t i) {
        std::mt19937_64 rng(trial_seed(seed, i));
        std::vector<std::size_t> pool(n);
        std::iota(pool.begin(), pool.end(), std::size_t{0});
        for (std::size_t k = 0; k < m; ++k) {
            std::uniform_int_distribution<std::size_t> pick(k, n - 1);
            std::swap(pool[k], pool[pick(rng)]);
        }
        pool.resize(m);
        std::sort(pool.begin(), pool.end());
        try {
            objective[i] = subset_objective(pool, banks, weights);
        } catch (const SingularFim&) {
            objective[i] = kInf;
        }
        sets[i] = std::move(pool);
    });

    BaselineResult out;
    out.trials = trials;
    std::size_t best = trials;
    for (std::size_t i = 0; i < trials; ++i) {
        if (!std::isfinite(objective[i])) {
            ++out.singular_skipped;
            continue;
        }
        if (best == trials || objective[i] < objective[best]) best = i;
    }
    if (best == trials) throw AllSingular("all " + std::to_string(trials) + " random subsets gave a singular FIM");
    out.indices = sets[best];
    out.objective = objective[best];
    return out;
}

std::vector<std::size_t> uniform_decimation(const CandidateGrid& grid, std::size_t m)
{
    const std::size_t n = grid.size();
    if (m == 0 || m > n) throw ConfigError("cannot pick " + std::to_string(m) + " of " + std::to_string(n) + " candidates");
    std::vector<std::size_t> out;
    if (!grid.layout()) {
        for (std::size_t i = 0; i < m; ++i) out.push_back(i * n / m);
        return out;
    }
    const auto [n1, n2] = *grid.layout();
    auto r = static_cast<std::size_t>(std::lround(std::sqrt(static_cast<double>(m * n1) / static_cast<double>(n2))));
    r = std::clamp<std::size_t>(r, 1, n1);
    std::size_t c = std::min(n2, (m + r - 1) / r);
    while (r * c < m) {
        if (r < n1) ++r;
        c = std::min(n2, (m + r - 1) / r);
    }
    for (std::size_t i = 0; i < r && out.size() < m; ++i)
        for (std::size_t j = 0; j < c && out.size() < m; ++j) out.push_back((i * n1 / r) * n2 + j * n2 / c);
    return out;
}

void Scenario::validate() const
{
    const int p_dim = model.num_params();
    if (theta.size() != p_dim)
        throw DimensionMismatch("scenario " + name + ": theta has " + std::to_string(theta.size()) + " entries, model has " +
                                std::to_string(p_dim));
    (void)ParamVector(model, theta);
    if (grid.dims() != model.dims()) throw DimensionMismatch("scenario " + name + ": grid dimension differs from model");
    if (budgets.empty()) throw ConfigError("scenario " + name + ": no budgets given");
    for (double g : budgets)
        if (!(g > 0.0) || !std::isfinite(g)) throw ConfigError("scenario " + name + ": budgets must be positive");
    if (variants.empty()) throw ConfigError("scenario " + name + ": no design variants given");
    for (const auto& v : variants) {
        if (v.psi.size() != p_dim) throw DimensionMismatch("scenario " + name + ": psi of " + v.label + " has wrong length");
        if ((v.psi.array() < 0.0).any()) throw ConfigError("scenario " + name + ": psi must be non-negative");
        if (v.theta) {
            if (v.theta->size() != p_dim) throw DimensionMismatch("scenario " + name + ": theta of " + v.label + " has wrong length");
            (void)ParamVector(model, *v.theta);
        }
    }
    if (!(noise_variance >= 0.0) || !std::isfinite(noise_variance))
        throw ConfigError("scenario " + name + ": noise variance must be non-negative");
    if (caps && caps->size() != p_dim) throw DimensionMismatch("scenario " + name + ": caps have wrong length");
    if (group_budgets && !grid.layout())
        throw ConfigError("scenario " + name + ": group budgets need a Cartesian grid layout");
    if (theta_grid) {
        if (!model.param_index(theta_grid->param))
            throw ConfigError("scenario " + name + ": unknown theta grid parameter " + theta_grid->param);
        if (theta_grid->count < 1) throw ConfigError("scenario " + name + ": theta grid count must be at least 1");
    }
    if (trials < 0) throw ConfigError("scenario " + name + ": trials must be non-negative");
    if (trials > 0 && !estimation) throw ConfigError("scenario " + name + ": simulation needs an estimation grid");
}

ParamGrid Scenario::thetas(const Eigen::VectorXd& truth) const
{
    const ParamVector base(model, truth);
    if (!theta_grid) return ParamGrid(model, {base});
    return ParamGrid::uniform_over(model, base, *model.param_index(theta_grid->param), theta_grid->lower,
                                   theta_grid->delta, theta_grid->count);
}

std::vector<FimBank> Scenario::banks(const ScenarioVariant& v) const
{
    return build_fim_banks(model, thetas(v.theta.value_or(theta)), grid, NoiseSpec(design_variance()));
}

DesignProblem Scenario::problem(const ScenarioVariant& v, std::vector<FimBank> banks, double budget) const
{
    DesignProblem p;
    p.banks = std::move(banks);
    p.budget = budget;
    p.psi = v.psi;
    // Without noise every CRLB is zero and the caps hold trivially.
    if (caps && crlb_scale() > 0.0) p.caps = *caps;
    if (group_budgets) {
        if (!grid.layout()) throw ConfigError("group budgets need a Cartesian grid layout");
        const auto [n1, n2] = *grid.layout();
        p.groups = GroupBudgets{n1, n2, group_budgets->first, group_budgets->second};
    }
    p.rounding = rounding;
    return p;
}

DesignResult Scenario::design(const DesignProblem& p) const
{
    return reweight.enabled ? reweight_iterate(p, reweight.options) : solve_sdp(p);
}

Report run_scenario(const Scenario& s)
{
    s.validate();
    Report rep;
    rep.scenario = s.name;
    rep.notes = s.notes;
    for (int p = 0; p < s.model.num_params(); ++p) rep.param_names.push_back(s.model.param_name(p));
    for (const auto& [label, idx] : s.model.param_subsets()) {
        rep.subset_names.push_back(label);
        rep.subsets.push_back(idx);
    }
    const std::size_t n_sub = rep.subsets.size();
    const double noise_scale = s.crlb_scale();

    for (const auto& variant : s.variants) {
        const Eigen::VectorXd truth = variant.theta.value_or(s.theta);
        const auto banks = s.banks(variant);
        for (double budget : s.budgets) {
            const std::string where = "scenario " + s.name + ", variant " + variant.label + ", budget " + format_number(budget);
            const DesignProblem problem = s.problem(variant, banks, budget);

            ReportRow row;
            row.variant = variant.label;
            row.method = "design";
            row.budget = budget;
            auto start = std::chrono::steady_clock::now();
            const DesignResult result = with_context(where, [&] { return s.design(problem); });
            row.design_seconds = seconds_since(start);
            row.selected = result.selected;
            row.weights = result.w;
            row.mu_relaxed = result.mu * noise_scale;
            row.status = to_string(result.info.status);
            spdlog::info("{}: {} selected, objective {:.6g}, {} Newton steps", where, row.selected.size(),
                         result.objective * noise_scale, result.info.newton_steps);

            start = std::chrono::steady_clock::now();
            fill_row(row, evaluate_set(row.selected, banks, variant.psi, rep.subsets, noise_scale));
            row.rmse.assign(n_sub, kNaN);
            if (s.trials > 0) {
                row.rmse = with_context(where, [&] { return simulate_rmse(s, truth, row.selected, rep.subsets); });
                row.trials = static_cast<std::size_t>(s.trials);
            }
            row.eval_seconds = seconds_since(start);
            const std::size_t m = row.selected.size();
            rep.rows.push_back(std::move(row));

            if (s.baseline_trials > 0 && m > 0) {
                ReportRow rnd;
                rnd.variant = variant.label;
                rnd.method = "random";
                rnd.budget = budget;
                start = std::chrono::steady_clock::now();
                const auto base = with_context(where, [&] {
                    return random_baseline(banks, m, s.baseline_trials, variant.psi, trial_seed(s.seed, 0x7261ULL));
                });
                rnd.design_seconds = seconds_since(start);
                rnd.selected = base.indices;
                rnd.trials = base.trials;
                rnd.singular_skipped = base.singular_skipped;
                rnd.status = "best_of_trials";
                fill_row(rnd, evaluate_set(rnd.selected, banks, variant.psi, rep.subsets, noise_scale));
                rnd.rmse.assign(n_sub, kNaN);
                rep.rows.push_back(std::move(rnd));

                ReportRow uni;
                uni.variant = variant.label;
                uni.method = "uniform";
                uni.budget = budget;
                uni.selected = uniform_decimation(s.grid, m);
                uni.status = "decimated";
                fill_row(uni, evaluate_set(uni.selected, banks, variant.psi, rep.subsets, noise_scale));
                uni.rmse.assign(n_sub, kNaN);
                rep.rows.push_back(std::move(uni));
            }
        }
    }
    return rep;
}

Report crlb_rmse_curve(const Scenario& s)
{
    if (s.trials < 100) throw ConfigError("scenario " + s.name + ": RMSE curves need at least 100 trials");
    return run_scenario(s);
}

void write_report_csv(const Report& report, std::ostream& out)
{
    std::vector<std::string> header = {"scenario", "variant", "method", "budget", "m", "status", "objective",
                                       "trials", "singular_skipped", "selected"};
    for (const auto& p : report.param_names) header.push_back("crlb_best_" + p);
    for (const auto& p : report.param_names) header.push_back("crlb_worst_" + p);
    for (const auto& s : report.subset_names) header.push_back("root_crlb_best_" + s);
    for (const auto& s : report.subset_names) header.push_back("root_crlb_worst_" + s);
    for (const auto& s : report.subset_names) header.push_back("rmse_" + s);
    auto write_line = [&](const std::vector<std::string>& fields) {
        for (std::size_t i = 0; i < fields.size(); ++i) out << (i ? "," : "") << csv_escape(fields[i]);
        out << "\r\n";
    };
    write_line(header);
    for (const auto& r : report.rows) {
        std::string sel;
        for (std::size_t i = 0; i < r.selected.size(); ++i) sel += (i ? " " : "") + std::to_string(r.selected[i]);
        std::vector<std::string> f = {report.scenario, r.variant, r.method, format_number(r.budget),
                                      std::to_string(r.selected.size()), r.status, format_number(r.objective),
                                      std::to_string(r.trials), std::to_string(r.singular_skipped), sel};
        for (Eigen::Index p = 0; p < r.crlb_best.size(); ++p) f.push_back(format_number(r.crlb_best[p]));
        for (Eigen::Index p = 0; p < r.crlb_worst.size(); ++p) f.push_back(format_number(r.crlb_worst[p]));
        for (double v : r.root_crlb_best) f.push_back(format_number(v));
        for (double v : r.root_crlb_worst) f.push_back(format_number(v));
        for (double v : r.rmse) f.push_back(format_number(v));
        write_line(f);
    }
}

void write_report_summary(const Report& report, std::ostream& out)
{
    out << "scenario " << report.scenario << "\n";
    if (!report.notes.empty()) out << "  " << report.notes << "\n";
    for (const auto& r : report.rows) {
        out << "  " << std::left << std::setw(14) << r.variant << std::setw(8) << r.method << " budget "
            << std::setw(6) << format_number(r.budget) << " M " << std::setw(4) << r.selected.size() << " objective "
            << std::setw(14) << format_number(r.objective);
        for (std::size_t i = 0; i < report.subset_names.size(); ++i) {
            out << " " << report.subset_names[i] << ": crlb^.5 " << format_number(r.root_crlb_worst[i]);
            if (!std::isnan(r.rmse[i])) out << " rmse " << format_number(r.rmse[i]);
        }
        out << std::fixed << std::setprecision(3) << " [" << r.design_seconds + r.eval_seconds << " s]"
            << std::defaultfloat << "\n";
    }
}

}  // namespace sampler
