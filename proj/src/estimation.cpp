#include "sampler/estimation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>

#include "sampler/errors.hpp"
#include "sampler/parallel.hpp"

namespace sampler {

namespace {

std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

}  // namespace

std::uint64_t trial_seed(std::uint64_t base_seed, std::uint64_t trial)
{
    return splitmix64(splitmix64(base_seed) ^ splitmix64(trial + 0x632be59bd9b4e019ULL));
}

Observation simulate(const SignalModel& model, const ParamVector& theta, const CandidateGrid& grid,
                     std::span<const std::size_t> indices, const NoiseSpec& noise, std::uint64_t seed)
{
    if (grid.dims() != model.dims()) throw DimensionMismatch("grid dimension differs from model dimension");
    Observation obs;
    obs.indices.assign(indices.begin(), indices.end());
    obs.times.resize(static_cast<Eigen::Index>(indices.size()), grid.dims());
    obs.values.resize(static_cast<Eigen::Index>(indices.size()));
    obs.noise = noise;
    obs.seed = seed;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, std::sqrt(noise.variance / 2.0));
    for (std::size_t i = 0; i < indices.size(); ++i) {
        if (indices[i] >= grid.size())
            throw DimensionMismatch("sample index " + std::to_string(indices[i]) + " out of range");
        const auto row = static_cast<Eigen::Index>(i);
        obs.times.row(row) = grid.point(indices[i]).transpose();
        Complex y = mean(model, theta, grid.point(indices[i]));
        if (noise.variance > 0.0) {
            const double re = normal(rng);
            const double im = normal(rng);
            y += Complex{re, im};
        }
        obs.values[row] = y;
    }
    return obs;
}

std::size_t EstimationGrid::size() const
{
    if (values.empty()) throw EmptyGrid("estimation grid has no dimensions");
    double total = 1.0;
    for (const auto& v : values) {
        if (v.empty()) throw EmptyGrid("estimation grid has an empty dimension");
        total *= static_cast<double>(v.size());
    }
    if (total > static_cast<double>(kMaxEstimationGridPoints))
        throw TooLarge("estimation grid has " + std::to_string(static_cast<long double>(total)) +
                       " points, above the limit of " + std::to_string(kMaxEstimationGridPoints));
    return static_cast<std::size_t>(total);
}

EstimationGrid EstimationGrid::around(const SignalModel& model, const ParamVector& center,
                                      const Eigen::Ref<const Eigen::VectorXd>& crlb, double width, int points)
{
    if (points < 1) throw ConfigError("estimation grid needs at least one point per dimension");
    if (crlb.size() != model.num_params()) throw DimensionMismatch("CRLB vector length differs from parameter count");
    EstimationGrid g;
    for (int p : model.nonlinear_params()) {
        const double half = width * std::sqrt(std::max(crlb[p], 0.0));
        double lo = center[p] - half;
        double hi = center[p] + half;
        if (model.role(p) == ParamRole::Damping && lo < 0.0) {
            hi -= lo;
            lo = 0.0;
        }
        std::vector<double> v;
        if (points == 1 || !(half > 0.0)) {
            v.push_back(center[p]);
        } else {
            for (int i = 0; i < points; ++i) v.push_back(lo + (hi - lo) * i / (points - 1));
        }
        g.values.push_back(std::move(v));
    }
    return g;
}

NlsEstimator::NlsEstimator(const SignalModel& model, const Eigen::Ref<const Eigen::MatrixXd>& times,
                           EstimationGrid search)
    : model_(model), times_(times), search_(std::move(search)), nonlinear_(model.nonlinear_params())
{
    if (times_.rows() == 0) throw ConfigError("observation is empty");
    if (times_.cols() != model.dims()) throw DimensionMismatch("sampling times differ in dimension from the model");
    if (search_.values.size() != nonlinear_.size())
        throw DimensionMismatch("estimation grid has " + std::to_string(search_.values.size()) +
                                " dimensions, the model has " + std::to_string(nonlinear_.size()) +
                                " nonlinear parameters");
    total_ = search_.size();

    const int k_count = model.components();
    const auto m = times_.rows();
    comps_.resize(static_cast<std::size_t>(k_count));
    for (std::size_t i = 0; i < nonlinear_.size(); ++i)
        comps_[static_cast<std::size_t>(model.component_of(nonlinear_[i]))].coords.push_back(static_cast<int>(i));

    Eigen::VectorXd full = Eigen::VectorXd::Zero(model.num_params());
    for (int k = 0; k < k_count; ++k) {
        auto& c = comps_[static_cast<std::size_t>(k)];
        c.count = 1;
        c.radix.assign(c.coords.size(), 1);
        for (std::size_t j = c.coords.size(); j-- > 0;) {
            c.radix[j] = c.count;
            c.count *= search_.values[static_cast<std::size_t>(c.coords[j])].size();
        }
        c.basis.resize(m, static_cast<Eigen::Index>(c.count));
        for (std::size_t idx = 0; idx < c.count; ++idx) {
            Eigen::VectorXd local = full;
            for (std::size_t j = 0; j < c.coords.size(); ++j) {
                const auto coord = static_cast<std::size_t>(c.coords[j]);
                local[nonlinear_[coord]] = search_.values[coord][(idx / c.radix[j]) % search_.values[coord].size()];
            }
            for (Eigen::Index n = 0; n < m; ++n)
                c.basis(n, static_cast<Eigen::Index>(idx)) = component_basis(model, local, k, times_.row(n).transpose());
        }
        c.norms = c.basis.colwise().squaredNorm().transpose();
    }
    cross_.resize(static_cast<std::size_t>(k_count * k_count));
    for (int k = 0; k < k_count; ++k)
        for (int l = k + 1; l < k_count; ++l)
            cross_[static_cast<std::size_t>(k * k_count + l)] =
                comps_[static_cast<std::size_t>(k)].basis.adjoint() * comps_[static_cast<std::size_t>(l)].basis;
}

Eigen::VectorXd NlsEstimator::grid_point(std::size_t index) const
{
    Eigen::VectorXd v(static_cast<Eigen::Index>(nonlinear_.size()));
    for (std::size_t i = nonlinear_.size(); i-- > 0;) {
        const auto& vals = search_.values[i];
        v[static_cast<Eigen::Index>(i)] = vals[index % vals.size()];
        index /= vals.size();
    }
    return v;
}

double NlsEstimator::profile_cost(const Eigen::Ref<const Eigen::VectorXcd>& y,
                                  const Eigen::Ref<const Eigen::VectorXd>& nonlinear, Eigen::VectorXcd* amplitudes) const
{
    const int k_count = model_.components();
    Eigen::VectorXd full = Eigen::VectorXd::Zero(model_.num_params());
    for (std::size_t i = 0; i < nonlinear_.size(); ++i) full[nonlinear_[i]] = nonlinear[static_cast<Eigen::Index>(i)];
    Eigen::MatrixXcd b(times_.rows(), k_count);
    for (int k = 0; k < k_count; ++k)
        for (Eigen::Index n = 0; n < times_.rows(); ++n)
            b(n, k) = component_basis(model_, full, k, times_.row(n).transpose());
    const Eigen::VectorXcd c = b.colPivHouseholderQr().solve(y);
    if (amplitudes) *amplitudes = c;
    return 0.5 * (y - b * c).squaredNorm();
}

ParamVector NlsEstimator::assemble(const Eigen::VectorXd& nonlinear, const Eigen::VectorXcd& amplitudes) const
{
    const int stride = model_.params_per_component();
    Eigen::VectorXd v = Eigen::VectorXd::Zero(model_.num_params());
    for (std::size_t i = 0; i < nonlinear_.size(); ++i) v[nonlinear_[i]] = nonlinear[static_cast<Eigen::Index>(i)];
    for (int k = 0; k < model_.components(); ++k) {
        const Complex c = amplitudes[k];
        v[k * stride] = std::max(std::abs(c), std::numeric_limits<double>::min());
        v[k * stride + stride - 1] = std::arg(c);
    }
    return ParamVector(model_, v);
}

ParamVector NlsEstimator::estimate(const Eigen::Ref<const Eigen::VectorXcd>& y) const
{
    if (y.size() != times_.rows()) throw DimensionMismatch("observation length differs from sampling times");
    const int k_count = model_.components();

    std::vector<Eigen::VectorXcd> r(static_cast<std::size_t>(k_count));
    for (int k = 0; k < k_count; ++k) r[static_cast<std::size_t>(k)] = comps_[static_cast<std::size_t>(k)].basis.adjoint() * y;

    // Explained energy r^H G^-1 r per grid point; the cost is (yy - explained) / 2.
    auto explained = [&](const std::vector<std::size_t>& idx) {
        if (k_count == 1) {
            const double g = comps_[0].norms[static_cast<Eigen::Index>(idx[0])];
            return g > 0.0 ? std::norm(r[0][static_cast<Eigen::Index>(idx[0])]) / g : 0.0;
        }
        if (k_count == 2) {
            const auto i = static_cast<Eigen::Index>(idx[0]);
            const auto j = static_cast<Eigen::Index>(idx[1]);
            const double g1 = comps_[0].norms[i];
            const double g2 = comps_[1].norms[j];
            const Complex c = cross_[1](i, j);
            const Complex r1 = r[0][i];
            const Complex r2 = r[1][j];
            const double det = g1 * g2 - std::norm(c);
            if (!(det > 1e-12 * g1 * g2)) return std::max(std::norm(r1) / g1, std::norm(r2) / g2);
            return (g2 * std::norm(r1) + g1 * std::norm(r2) - 2.0 * std::real(std::conj(r1) * c * r2)) / det;
        }
        Eigen::MatrixXcd g(k_count, k_count);
        Eigen::VectorXcd rv(k_count);
        for (int k = 0; k < k_count; ++k) {
            const auto ik = static_cast<Eigen::Index>(idx[static_cast<std::size_t>(k)]);
            g(k, k) = comps_[static_cast<std::size_t>(k)].norms[ik];
            rv[k] = r[static_cast<std::size_t>(k)][ik];
            for (int l = k + 1; l < k_count; ++l) {
                const auto il = static_cast<Eigen::Index>(idx[static_cast<std::size_t>(l)]);
                g(k, l) = cross_[static_cast<std::size_t>(k * k_count + l)](ik, il);
                g(l, k) = std::conj(g(k, l));
            }
        }
        const Eigen::VectorXcd sol = g.ldlt().solve(rv);
        return std::real(rv.dot(sol));
    };

    // Lexicographic order: component 0 varies slowest. Chunks over the first
    // component's subgrid keep the reduction in index order.
    const std::size_t outer = comps_[0].count;
    std::size_t inner = 1;
    for (int k = 1; k < k_count; ++k) inner *= comps_[static_cast<std::size_t>(k)].count;
    std::vector<double> best_val(outer, -1.0);
    std::vector<std::size_t> best_idx(outer, 0);
    parallel_for(outer, [&](std::size_t i0) {
        std::vector<std::size_t> idx(static_cast<std::size_t>(k_count), 0);
        idx[0] = i0;
        for (std::size_t rest = 0; rest < inner; ++rest) {
            std::size_t q = rest;
            for (int k = k_count - 1; k >= 1; --k) {
                const auto cnt = comps_[static_cast<std::size_t>(k)].count;
                idx[static_cast<std::size_t>(k)] = q % cnt;
                q /= cnt;
            }
            const double e = explained(idx);
            if (e > best_val[i0]) {
                best_val[i0] = e;
                best_idx[i0] = rest;
            }
        }
    });
    std::size_t b0 = 0;
    for (std::size_t i = 1; i < outer; ++i)
        if (best_val[i] > best_val[b0]) b0 = i;

    // Back from per-component indices to a nonlinear vector.
    Eigen::VectorXd x(static_cast<Eigen::Index>(nonlinear_.size()));
    {
        std::vector<std::size_t> idx(static_cast<std::size_t>(k_count), 0);
        idx[0] = b0;
        std::size_t q = best_idx[b0];
        for (int k = k_count - 1; k >= 1; --k) {
            const auto cnt = comps_[static_cast<std::size_t>(k)].count;
            idx[static_cast<std::size_t>(k)] = q % cnt;
            q /= cnt;
        }
        for (int k = 0; k < k_count; ++k) {
            const auto& c = comps_[static_cast<std::size_t>(k)];
            for (std::size_t j = 0; j < c.coords.size(); ++j) {
                const auto coord = static_cast<std::size_t>(c.coords[j]);
                const auto& vals = search_.values[coord];
                x[c.coords[j]] = vals[(idx[static_cast<std::size_t>(k)] / c.radix[j]) % vals.size()];
            }
        }
    }
    struct Probe {
        Eigen::VectorXd z;
        double f = 0.0;
        Eigen::VectorXcd a;
    };
    int budget = search_.polish_evaluations;
    auto probe = [&](Eigen::VectorXd z) {
        Probe p{std::move(z), 0.0, {}};
        p.f = profile_cost(y, p.z, &p.a);
        --budget;
        return p;
    };
    Probe best{x, 0.0, {}};
    best.f = profile_cost(y, x, &best.a);
    if (search_.polish) {
        // Coordinate-wise parabolic refinement with steps starting at the grid spacing.
        Eigen::VectorXd step(x.size());
        for (Eigen::Index i = 0; i < x.size(); ++i) {
            const auto& vals = search_.values[static_cast<std::size_t>(i)];
            step[i] = vals.size() > 1 ? (vals.back() - vals.front()) / static_cast<double>(vals.size() - 1) : 0.0;
        }
        while (budget >= 3 && step.maxCoeff() > 1e-15) {
            bool moved = false;
            for (Eigen::Index i = 0; i < x.size() && budget >= 3; ++i) {
                const double h = step[i];
                if (!(h > 0.0)) continue;
                const bool damping = model_.role(nonlinear_[static_cast<std::size_t>(i)]) == ParamRole::Damping;
                Eigen::VectorXd lo = best.z;
                Eigen::VectorXd hi = best.z;
                lo[i] -= h;
                hi[i] += h;
                if (damping && lo[i] < 0.0) continue;
                Probe pl = probe(lo);
                Probe ph = probe(hi);
                const double curv = pl.f + ph.f - 2.0 * best.f;
                Eigen::VectorXd v = best.z;
                if (curv > 0.0) v[i] += 0.5 * h * (pl.f - ph.f) / curv;
                Probe pick = pl.f < ph.f ? std::move(pl) : std::move(ph);
                if (curv > 0.0) {
                    if (!(damping && v[i] < 0.0) && v[i] != best.z[i]) {
                        Probe pv = probe(std::move(v));
                        if (pv.f < pick.f) pick = std::move(pv);
                    }
                }
                if (pick.f < best.f) {
                    best = std::move(pick);
                    moved = true;
                }
            }
            if (!moved) step *= 0.5;
        }
    }
    return assemble(best.z, best.a);
}

ParamVector nls_estimate(const Observation& obs, const SignalModel& model, const EstimationGrid& search)
{
    if (obs.values.size() == 0) throw ConfigError("observation is empty");
    return NlsEstimator(model, obs.times, search).estimate(obs.values);
}

double rmse(std::span<const ParamVector> estimates, const ParamVector& truth, std::span<const int> subset)
{
    std::vector<ParamVector> truths(estimates.size(), truth);
    return rmse(estimates, truths, subset);
}

double rmse(std::span<const ParamVector> estimates, std::span<const ParamVector> truths, std::span<const int> subset)
{
    if (estimates.empty()) throw ConfigError("no estimates given");
    if (truths.size() != estimates.size()) throw DimensionMismatch("estimate and truth counts differ");
    double total = 0.0;
    for (int p : subset) {
        double sum = 0.0;
        for (std::size_t i = 0; i < estimates.size(); ++i) {
            if (p < 0 || p >= estimates[i].size() || p >= truths[i].size())
                throw DimensionMismatch("parameter index out of range");
            const double e = estimates[i][p] - truths[i][p];
            sum += e * e;
        }
        total += sum / static_cast<double>(estimates.size());
    }
    return std::sqrt(total);
}

}  // namespace sampler
