#include "barrier.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <spdlog/spdlog.h>

#include "sampler/errors.hpp"

namespace sampler::detail {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Evaluation {
    double value = kInf;
    double objective = 0.0;
    Eigen::VectorXd gw;
    Eigen::VectorXd gaux;
    Eigen::VectorXd diag;                  // diagonal part of H_ww
    std::vector<Eigen::MatrixXd> lowrank;  // H_ww += sum of block * block^T
    Eigen::MatrixXd cross;                 // d2/dw daux
    Eigen::MatrixXd haux;
    Eigen::MatrixXd dense;                 // group-norm curvature, empty if unused
    Eigen::VectorXd mu;                    // minimizing epigraph values (Epigraph mode)
    double worst = 0.0;                    // sum_p psi_p max_l c_p
};

double log_det_weight(const BarrierSetup& s)
{
    return s.mode == BarrierMode::Direct ? 1.0 : static_cast<double>(s.active.size()) + 1.0;
}

void add_group_term(const std::vector<std::vector<Eigen::Index>>& groups, double budget, const Eigen::VectorXd& w,
                    bool derivs, Evaluation& ev)
{
    if (groups.empty()) return;
    std::vector<double> norms(groups.size());
    double h = 0.0;
    for (std::size_t g = 0; g < groups.size(); ++g) {
        double sq = 0.0;
        for (auto n : groups[g]) sq += w[n] * w[n];
        norms[g] = std::sqrt(sq);
        h += norms[g];
    }
    const double slack = budget - h;
    if (!(slack > 0.0)) {
        ev.value = kInf;
        return;
    }
    ev.value -= std::log(slack);
    if (!derivs) return;
    const auto n_all = w.size();
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(n_all);
    for (std::size_t g = 0; g < groups.size(); ++g)
        for (auto n : groups[g]) grad[n] = w[n] / norms[g];
    ev.gw += grad / slack;
    if (ev.dense.size() == 0) ev.dense = Eigen::MatrixXd::Zero(n_all, n_all);
    ev.dense.noalias() += grad * grad.transpose() / (slack * slack);
    for (std::size_t g = 0; g < groups.size(); ++g) {
        const auto& idx = groups[g];
        const double c = 1.0 / (norms[g] * slack);
        for (std::size_t i = 0; i < idx.size(); ++i) {
            ev.dense(idx[i], idx[i]) += c;
            const double ui = w[idx[i]] / norms[g];
            for (std::size_t j = 0; j < idx.size(); ++j) ev.dense(idx[i], idx[j]) -= c * ui * w[idx[j]] / norms[g];
        }
    }
}

// Minimizes tpsi * x - sum_l log(x + gaps_l) - log(room - x) over 0 < x < room,
// the epigraph variable measured from the largest c_l. gaps_l >= 0 with a zero
// entry; room may be infinite.
double epigraph_offset(const Eigen::VectorXd& gaps, double tpsi, double room)
{
    auto deriv = [&](double x, double& curv) {
        double d = tpsi;
        curv = 0.0;
        for (Eigen::Index l = 0; l < gaps.size(); ++l) {
            const double inv = 1.0 / (x + gaps[l]);
            d -= inv;
            curv += inv * inv;
        }
        if (std::isfinite(room)) {
            const double inv = 1.0 / (room - x);
            d += inv;
            curv += inv * inv;
        }
        return d;
    };
    double lo = 0.0;
    double hi = room;
    if (tpsi > 0.0) hi = std::min(hi, static_cast<double>(gaps.size()) / tpsi);
    if (gaps.size() == 1 && !std::isfinite(room)) return hi;
    double x = tpsi > 0.0 ? std::min(1.0 / tpsi, 0.5 * hi) : 0.5 * hi;
    for (int it = 0; it < 200; ++it) {
        double curv = 0.0;
        const double d = deriv(x, curv);
        if (d == 0.0) break;
        (d < 0.0 ? lo : hi) = x;
        double next = x - d / curv;
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (std::abs(next - x) <= 1e-15 * x) {
            x = next;
            break;
        }
        x = next;
    }
    return x;
}

// Dual estimates for the box and budget constraints. When present they
// replace the primal barrier curvature 1/s^2 by z/s.
struct BoundDuals {
    Eigen::VectorXd lo;
    Eigen::VectorXd hi;
    double budget = 0.0;
};

Evaluation evaluate(const BarrierSetup& s, const BarrierPoint& x, double t, bool derivs,
                    const BoundDuals* duals = nullptr)
{
    Evaluation ev;
    const auto n_cand = static_cast<Eigen::Index>(s.num_candidates);
    const auto n_aux = s.num_aux();
    const int p_dim = s.num_params;
    const auto& w = x.w;

    if (derivs) {
        ev.gw = Eigen::VectorXd::Zero(n_cand);
        ev.gaux = Eigen::VectorXd::Zero(n_aux);
        ev.diag = Eigen::VectorXd::Zero(n_cand);
        ev.cross = Eigen::MatrixXd::Zero(n_cand, n_aux);
        ev.haux = Eigen::MatrixXd::Zero(n_aux, n_aux);
    }

    // box
    double value = 0.0;
    for (Eigen::Index n = 0; n < n_cand; ++n) {
        const double lo = w[n];
        const double hi = 1.0 - w[n];
        if (!(lo > 0.0) || !(hi > 0.0)) return ev;
        value -= std::log(lo) + std::log(hi);
        if (derivs) {
            ev.gw[n] += -1.0 / lo + 1.0 / hi;
            ev.diag[n] += duals ? duals->lo[n] / lo + duals->hi[n] / hi : 1.0 / (lo * lo) + 1.0 / (hi * hi);
        }
    }

    // budget
    const double budget_slack = s.budget - s.budget_scale.dot(w);
    if (!(budget_slack > 0.0)) return ev;
    value -= std::log(budget_slack);
    if (derivs) {
        ev.gw += s.budget_scale / budget_slack;
        const double curv = duals ? duals->budget / budget_slack : 1.0 / (budget_slack * budget_slack);
        ev.lowrank.push_back(std::sqrt(curv) * s.budget_scale);
    }

    ev.value = value;
    add_group_term(s.column_groups, s.column_budget, w, derivs, ev);
    add_group_term(s.row_groups, s.row_budget, w, derivs, ev);
    if (!std::isfinite(ev.value)) return ev;
    value = ev.value;
    ev.value = kInf;

    const double kappa = log_det_weight(s);
    const auto n_active = static_cast<Eigen::Index>(s.active.size());
    const auto n_banks = static_cast<Eigen::Index>(s.banks.size());
    const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(p_dim, p_dim);
    double objective = 0.0;

    std::vector<Eigen::MatrixXd> lowers(s.banks.size());
    std::vector<Eigen::MatrixXd> linvs(s.banks.size());
    Eigen::MatrixXd c(p_dim, n_banks);
    for (Eigen::Index l = 0; l < n_banks; ++l) {
        const auto& bank = s.banks[static_cast<std::size_t>(l)];
        Eigen::VectorXd wexp(bank.a.cols());
        for (Eigen::Index k = 0; k < bank.a.cols(); ++k) wexp[k] = w[bank.owner[static_cast<std::size_t>(k)]];
        Eigen::MatrixXd b = (bank.a * wexp.asDiagonal()) * bank.a.transpose();
        b.diagonal().array() -= s.delta;
        Eigen::LLT<Eigen::MatrixXd> llt(b);
        if (llt.info() != Eigen::Success) return ev;
        auto& lower = lowers[static_cast<std::size_t>(l)];
        lower = llt.matrixL();
        if ((lower.diagonal().array() <= 0.0).any()) return ev;
        value -= kappa * 2.0 * lower.diagonal().array().log().sum();
        auto& linv = linvs[static_cast<std::size_t>(l)];
        linv = lower.triangularView<Eigen::Lower>().solve(eye);
        c.col(l) = linv.colwise().squaredNorm().transpose();
    }

    // slack(j, l) = mu_j - c_p for bank l
    Eigen::MatrixXd slack(n_active, n_banks);
    Eigen::VectorXd cap_curv = Eigen::VectorXd::Zero(n_active);
    for (int p = 0; p < p_dim; ++p)
        if (s.psi[p] > 0.0) ev.worst += s.psi[p] * c.row(p).maxCoeff();
    if (s.mode == BarrierMode::Direct) {
        for (int p = 0; p < p_dim; ++p)
            if (s.psi[p] > 0.0) objective += s.psi[p] * c.row(p).sum();
    } else if (s.mode == BarrierMode::Epigraph) {
        ev.mu.resize(n_active);
        for (Eigen::Index j = 0; j < n_active; ++j) {
            const int p = s.active[static_cast<std::size_t>(j)];
            const double cmax = c.row(p).maxCoeff();
            const Eigen::VectorXd gaps = (cmax - c.row(p).array()).transpose();
            const double room = s.caps[j] - cmax;
            if (!(room > 0.0)) return ev;
            const double off = epigraph_offset(gaps, t * s.psi[p], room);
            ev.mu[j] = cmax + off;
            slack.row(j) = (off + gaps.array()).transpose();
            objective += s.psi[p] * ev.mu[j];
            if (std::isfinite(room)) {
                value -= std::log(room - off);
                cap_curv[j] = 1.0 / ((room - off) * (room - off));
            }
        }
    } else {
        for (Eigen::Index j = 0; j < n_active; ++j)
            slack.row(j) = x.aux[j] - c.row(s.active[static_cast<std::size_t>(j)]).array();
    }
    if (n_active > 0) {
        if (!(slack.array() > 0.0).all()) return ev;
        value -= slack.array().log().sum();
    }

    std::vector<Eigen::MatrixXd> scaled_grads;
    if (derivs && s.mode == BarrierMode::Epigraph)
        scaled_grads.assign(static_cast<std::size_t>(n_active), Eigen::MatrixXd(n_cand, n_banks));

    for (Eigen::Index l = 0; derivs && l < n_banks; ++l) {
        const auto& bank = s.banks[static_cast<std::size_t>(l)];
        const auto& linv = linvs[static_cast<std::size_t>(l)];
        const Eigen::MatrixXd z = lowers[static_cast<std::size_t>(l)].triangularView<Eigen::Lower>().solve(bank.a);
        const int r = p_dim * (p_dim + 1) / 2;
        Eigen::MatrixXd v = Eigen::MatrixXd::Zero(n_cand, r);
        for (Eigen::Index n = 0; n < n_cand; ++n) {
            double gsum = 0.0;
            for (Eigen::Index k = bank.start[static_cast<std::size_t>(n)]; k < bank.start[static_cast<std::size_t>(n) + 1]; ++k) {
                gsum += z.col(k).squaredNorm();
                int idx = 0;
                for (int i = 0; i < p_dim; ++i)
                    for (int jj = 0; jj <= i; ++jj, ++idx)
                        v(n, idx) += (i == jj ? 1.0 : std::sqrt(2.0)) * z(i, k) * z(jj, k);
            }
            ev.gw[n] -= kappa * gsum;
        }
        ev.lowrank.push_back(std::sqrt(kappa) * v);

        auto trace_terms = [&](int p, Eigen::VectorXd& gc, Eigen::MatrixXd& u) {
            const Eigen::VectorXd y = z.transpose() * linv.col(p);
            gc = Eigen::VectorXd::Zero(n_cand);
            u = Eigen::MatrixXd::Zero(n_cand, p_dim);
            for (Eigen::Index n = 0; n < n_cand; ++n)
                for (Eigen::Index k = bank.start[static_cast<std::size_t>(n)]; k < bank.start[static_cast<std::size_t>(n) + 1]; ++k) {
                    gc[n] -= y[k] * y[k];
                    u.row(n) += y[k] * z.col(k).transpose();
                }
        };

        Eigen::VectorXd gc;
        Eigen::MatrixXd u;
        if (s.mode == BarrierMode::Direct) {
            for (int p = 0; p < p_dim; ++p) {
                if (!(s.psi[p] > 0.0)) continue;
                trace_terms(p, gc, u);
                const double coef = t * s.psi[p];
                ev.gw += coef * gc;
                ev.lowrank.push_back(std::sqrt(2.0 * coef) * u);
            }
            continue;
        }
        for (Eigen::Index j = 0; j < n_active; ++j) {
            trace_terms(s.active[static_cast<std::size_t>(j)], gc, u);
            const double sl = slack(j, l);
            ev.gw += gc / sl;
            ev.lowrank.push_back(std::sqrt(2.0 / sl) * u);
            if (s.mode == BarrierMode::Epigraph) {
                scaled_grads[static_cast<std::size_t>(j)].col(l) = gc / sl;
            } else {
                ev.gaux[j] -= 1.0 / sl;
                ev.lowrank.push_back(gc / sl);
                ev.cross.col(j) -= gc / (sl * sl);
                ev.haux(j, j) += 1.0 / (sl * sl);
            }
        }
    }

    if (derivs && s.mode == BarrierMode::Epigraph) {
        // Curvature left after minimizing over mu_j: with a_l = grad c_l / s_l,
        // b_l = 1 / s_l and h = sum b_l^2 + e, it is
        // sum_l (a_l - b_l g)(a_l - b_l g)^T + e g g^T for g = sum_l b_l a_l / h.
        for (Eigen::Index j = 0; j < n_active; ++j) {
            const double e = cap_curv[j];
            if (n_banks == 1 && e == 0.0) continue;
            const Eigen::VectorXd b = slack.row(j).transpose().cwiseInverse();
            const double h = b.squaredNorm() + e;
            const auto& a = scaled_grads[static_cast<std::size_t>(j)];
            const Eigen::VectorXd g = a * b / h;
            ev.lowrank.push_back(a - g * b.transpose());
            if (e > 0.0) ev.lowrank.push_back(std::sqrt(e) * g);
        }
    }

    if (s.mode == BarrierMode::PhaseOne) {
        const Eigen::Index js = n_active;
        const double slack_var = x.aux[js];
        objective = slack_var;
        if (derivs) ev.gaux[js] += t;
        for (Eigen::Index j = 0; j < n_active; ++j) {
            const double cap = s.caps[j];
            const double sl = cap * (1.0 + slack_var) - x.aux[j];
            if (!(sl > 0.0)) return ev;
            value -= std::log(sl);
            if (derivs) {
                ev.gaux[j] += 1.0 / sl;
                ev.gaux[js] -= cap / sl;
                const double inv2 = 1.0 / (sl * sl);
                ev.haux(j, j) += inv2;
                ev.haux(j, js) -= cap * inv2;
                ev.haux(js, j) -= cap * inv2;
                ev.haux(js, js) += cap * cap * inv2;
            }
        }
    }

    ev.objective = objective;
    ev.value = value + t * objective;
    return ev;
}

NewtonDirection solve_newton(const Evaluation& ev, bool dense)
{
    NewtonDirection dir;
    dir.value = ev.value;
    const auto n = ev.gw.size();
    const auto na = ev.gaux.size();
    Eigen::Index r = 0;
    for (const auto& blk : ev.lowrank) r += blk.cols();
    Eigen::MatrixXd wmat(n, r);
    {
        Eigen::Index c = 0;
        for (const auto& blk : ev.lowrank) {
            wmat.middleCols(c, blk.cols()) = blk;
            c += blk.cols();
        }
    }

    const bool use_dense = dense || ev.dense.size() != 0 || 2 * r >= n;
    if (use_dense) {
        Eigen::MatrixXd h(n + na, n + na);
        h.topLeftCorner(n, n).noalias() = wmat * wmat.transpose();
        h.topLeftCorner(n, n).diagonal() += ev.diag;
        if (ev.dense.size() != 0) h.topLeftCorner(n, n) += ev.dense;
        h.topRightCorner(n, na) = ev.cross;
        h.bottomLeftCorner(na, n) = ev.cross.transpose();
        h.bottomRightCorner(na, na) = ev.haux;
        Eigen::VectorXd g(n + na);
        g << ev.gw, ev.gaux;
        Eigen::LLT<Eigen::MatrixXd> llt(h);
        Eigen::VectorXd d;
        if (llt.info() == Eigen::Success) {
            d = llt.solve(-g);
        } else {
            d = h.ldlt().solve(-g);
        }
        dir.dw = d.head(n);
        dir.daux = d.tail(na);
        dir.decrement = -g.dot(d);
        return dir;
    }

    // Woodbury on H_ww = D + W W^T with a Schur complement for the aux block.
    // It loses accuracy when D spans many decades, so it serves as the
    // preconditioner of a conjugate-gradient solve on the exact system.
    const Eigen::VectorXd dinv = ev.diag.cwiseInverse();
    const Eigen::MatrixXd dinv_w = dinv.asDiagonal() * wmat;
    Eigen::MatrixXd cap = wmat.transpose() * dinv_w;
    cap.diagonal().array() += 1.0;
    const Eigen::LLT<Eigen::MatrixXd> cap_llt(cap);
    auto apply_inverse = [&](const Eigen::MatrixXd& rhs) {
        Eigen::MatrixXd x = dinv.asDiagonal() * rhs;
        x.noalias() -= dinv_w * cap_llt.solve(wmat.transpose() * x);
        return x;
    };
    const Eigen::MatrixXd ainv_e = apply_inverse(ev.cross);
    Eigen::LDLT<Eigen::MatrixXd> schur;
    if (na > 0) schur.compute(ev.haux - ev.cross.transpose() * ainv_e);

    auto precondition = [&](const Eigen::VectorXd& r) {
        const Eigen::VectorXd rw = r.head(n);
        const Eigen::VectorXd ra = r.tail(na);
        const Eigen::VectorXd ainv_r = apply_inverse(rw);
        Eigen::VectorXd out(n + na);
        if (na > 0) {
            const Eigen::VectorXd za = schur.solve(ra - ev.cross.transpose() * ainv_r);
            out.head(n) = ainv_r - ainv_e * za;
            out.tail(na) = za;
        } else {
            out = ainv_r;
        }
        return out;
    };
    auto apply_h = [&](const Eigen::VectorXd& x) {
        const Eigen::VectorXd xw = x.head(n);
        const Eigen::VectorXd xa = x.tail(na);
        Eigen::VectorXd out(n + na);
        out.head(n) = ev.diag.cwiseProduct(xw) + wmat * (wmat.transpose() * xw) + ev.cross * xa;
        out.tail(na) = ev.cross.transpose() * xw + ev.haux * xa;
        return out;
    };

    Eigen::VectorXd b(n + na);
    b << -ev.gw, -ev.gaux;
    const double b_norm = b.norm();
    Eigen::VectorXd x = precondition(b);
    Eigen::VectorXd res = b - apply_h(x);
    Eigen::VectorXd z = precondition(res);
    Eigen::VectorXd p = z;
    double rz = res.dot(z);
    for (int it = 0; it < 100 && res.norm() > 1e-13 * b_norm; ++it) {
        const Eigen::VectorXd hp = apply_h(p);
        const double php = p.dot(hp);
        if (!(php > 0.0)) break;
        const double step = rz / php;
        x += step * p;
        res -= step * hp;
        z = precondition(res);
        const double rz_next = res.dot(z);
        p = z + (rz_next / rz) * p;
        rz = rz_next;
    }
    if (res.norm() > 1e-10 * b_norm)
        spdlog::debug("newton system: conjugate gradient stopped at relative residual {:.3e}", res.norm() / b_norm);
    dir.dw = x.head(n);
    dir.daux = x.tail(na);
    dir.decrement = -(ev.gw.dot(dir.dw) + ev.gaux.dot(dir.daux));
    return dir;
}

}  // namespace

double BarrierSetup::barrier_parameter() const
{
    double m = 2.0 * static_cast<double>(num_candidates) + 1.0;
    if (!column_groups.empty()) m += 1.0;
    if (!row_groups.empty()) m += 1.0;
    const double per_bank = mode == BarrierMode::Direct
                                ? num_params
                                : static_cast<double>(active.size()) * (num_params + 1) + num_params;
    m += per_bank * static_cast<double>(banks.size());
    if (mode != BarrierMode::Direct)
        for (Eigen::Index j = 0; j < caps.size(); ++j)
            if (std::isfinite(caps[j])) m += 1.0;
    return m;
}

FactoredBank factor_bank(const FimBank& bank, const Eigen::VectorXd& scale)
{
    const auto p_dim = static_cast<Eigen::Index>(bank.dim());
    std::vector<Eigen::VectorXd> cols;
    FactoredBank out;
    out.start.reserve(bank.size() + 1);
    for (std::size_t n = 0; n < bank.size(); ++n) {
        out.start.push_back(static_cast<Eigen::Index>(cols.size()));
        const Eigen::MatrixXd f = scale.asDiagonal() * bank.fims[n] * scale.asDiagonal();
        const Eigen::MatrixXd sym = 0.5 * (f + f.transpose());
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sym);
        const double top = eig.eigenvalues().cwiseAbs().maxCoeff();
        for (Eigen::Index i = 0; i < p_dim; ++i) {
            const double lambda = eig.eigenvalues()[i];
            if (lambda > 1e-13 * top && lambda > 0.0) {
                cols.push_back(std::sqrt(lambda) * eig.eigenvectors().col(i));
                out.owner.push_back(static_cast<Eigen::Index>(n));
            }
        }
    }
    out.start.push_back(static_cast<Eigen::Index>(cols.size()));
    out.a.resize(p_dim, static_cast<Eigen::Index>(cols.size()));
    for (std::size_t k = 0; k < cols.size(); ++k) out.a.col(static_cast<Eigen::Index>(k)) = cols[k];
    return out;
}

bool epigraph_values(const BarrierSetup& setup, const Eigen::VectorXd& w, Eigen::MatrixXd& values)
{
    const int p_dim = setup.num_params;
    values.resize(p_dim, static_cast<Eigen::Index>(setup.banks.size()));
    for (std::size_t l = 0; l < setup.banks.size(); ++l) {
        const auto& bank = setup.banks[l];
        Eigen::VectorXd wexp(bank.a.cols());
        for (Eigen::Index k = 0; k < bank.a.cols(); ++k) wexp[k] = w[bank.owner[static_cast<std::size_t>(k)]];
        Eigen::MatrixXd b = (bank.a * wexp.asDiagonal()) * bank.a.transpose();
        b.diagonal().array() -= setup.delta;
        Eigen::LLT<Eigen::MatrixXd> llt(b);
        if (llt.info() != Eigen::Success) return false;
        const Eigen::MatrixXd linv = llt.matrixL().solve(Eigen::MatrixXd::Identity(p_dim, p_dim));
        values.col(static_cast<Eigen::Index>(l)) = linv.colwise().squaredNorm().transpose();
    }
    return true;
}

NewtonDirection newton_direction(const BarrierSetup& setup, const BarrierPoint& x, double t, bool dense)
{
    const Evaluation ev = evaluate(setup, x, t, true);
    if (!std::isfinite(ev.value)) throw std::logic_error("newton_direction at an infeasible point");
    return solve_newton(ev, dense || setup.force_dense);
}

BarrierOutcome run_barrier(const BarrierSetup& setup, BarrierPoint start, const SolverOptions& options)
{
    BarrierOutcome out;
    out.x = std::move(start);
    const double m = setup.barrier_parameter();
    const bool phase_one = setup.mode == BarrierMode::PhaseOne;
    const Eigen::Index slack_index = setup.num_aux() - 1;

    Evaluation ev = evaluate(setup, out.x, 1.0, false);
    if (!std::isfinite(ev.value)) throw std::logic_error("barrier start point is infeasible");
    double t = phase_one ? 1.0 : m / std::max(std::abs(ev.worst), 1e-300);

    BoundDuals duals;
    duals.lo = out.x.w.cwiseInverse();
    duals.hi = (1.0 - out.x.w.array()).inverse().matrix();
    duals.budget = 1.0 / (setup.budget - setup.budget_scale.dot(out.x.w));

    constexpr int kMaxCentering = 300;
    constexpr double kBoundary = 0.995;
    for (;;) {
        ++out.outer_iterations;
        for (int it = 0; it < kMaxCentering; ++it) {
            ev = evaluate(setup, out.x, t, true, &duals);
            const NewtonDirection dir = solve_newton(ev, setup.force_dense || phase_one);
            out.decrement = 0.5 * dir.decrement;
            if (!(dir.decrement >= 0.0) || !std::isfinite(dir.decrement)) {
                out.stalled = true;
                break;
            }
            if (out.decrement <= options.newton_tol) break;

            const Eigen::VectorXd& w = out.x.w;
            const double budget_slack = setup.budget - setup.budget_scale.dot(w);
            const double budget_dir = setup.budget_scale.dot(dir.dw);
            double step = 1.0;
            for (Eigen::Index n = 0; n < w.size(); ++n) {
                if (dir.dw[n] < 0.0) step = std::min(step, -kBoundary * w[n] / dir.dw[n]);
                if (dir.dw[n] > 0.0) step = std::min(step, kBoundary * (1.0 - w[n]) / dir.dw[n]);
            }
            if (budget_dir > 0.0) step = std::min(step, kBoundary * budget_slack / budget_dir);

            const double lambda = std::sqrt(dir.decrement);
            const double slope = -dir.decrement;
            bool accepted = false;
            BarrierPoint trial;
            while (step > 1e-14) {
                trial.w = w + step * dir.dw;
                trial.aux = out.x.aux + step * dir.daux;
                const double v = evaluate(setup, trial, t, false).value;
                if (std::isfinite(v)) {
                    // close to the central path the full step is taken on feasibility alone
                    if ((lambda < 0.25 && step == 1.0) || v <= ev.value + 1e-4 * step * slope) {
                        accepted = true;
                        break;
                    }
                }
                step *= 0.5;
            }
            ++out.newton_steps;
            spdlog::trace("newton {}: lambda^2/2={:.3e} step={:.3e}", out.newton_steps, out.decrement, step);
            if (out.newton_steps > options.max_newton)
                throw MaxIterations("barrier solver exceeded " + std::to_string(options.max_newton) + " Newton steps");
            if (!accepted) {
                out.stalled = true;
                break;
            }

            // dual update, kept within a band around the central-path value 1/s
            auto update = [&](double z, double slack, double dslack) {
                const double target = 1.0 / slack;
                const double dz = target - z - z * dslack / slack;
                const double next = z + step * dz;
                const double s_new = slack + step * dslack;
                return std::clamp(next, 1e-3 / s_new, 1e3 / s_new);
            };
            for (Eigen::Index n = 0; n < w.size(); ++n) {
                duals.lo[n] = update(duals.lo[n], w[n], dir.dw[n]);
                duals.hi[n] = update(duals.hi[n], 1.0 - w[n], -dir.dw[n]);
            }
            duals.budget = update(duals.budget, budget_slack, -budget_dir);

            out.x = std::move(trial);
            if (phase_one && out.x.aux[slack_index] < 0.0) {
                out.phase_one_feasible = true;
                out.objective = out.x.aux[slack_index];
                out.gap = m / t;
                return out;
            }
        }
        ev = evaluate(setup, out.x, t, false);
        out.objective = ev.objective;
        if (setup.mode == BarrierMode::Epigraph) out.x.aux = ev.mu;
        out.gap = m / t;
        spdlog::debug("barrier outer {}: t={:.3e} objective={:.9e} gap={:.3e} newton={}", out.outer_iterations, t,
                      out.objective, out.gap, out.newton_steps);
        if (phase_one) {
            if (out.objective < 0.0) {
                out.phase_one_feasible = true;
                return out;
            }
            if (out.objective - out.gap > 0.0 || out.gap < 1e-12) {
                out.phase_one_infeasible = true;
                return out;
            }
        } else if (out.gap <= options.gap_tol * std::abs(out.objective)) {
            return out;
        }
        if (out.stalled) {
            // numerical floor reached; accept when the gap is already close to target
            return out;
        }
        t *= options.t_factor;
        duals.lo *= options.t_factor;
        duals.hi *= options.t_factor;
        duals.budget *= options.t_factor;
    }
}

}  // namespace sampler::detail
