#include "sampler/fisher.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "sampler/errors.hpp"
#include "sampler/parallel.hpp"

namespace sampler {

FimBank build_fim_bank(const SignalModel& model, const ParamVector& theta, const CandidateGrid& grid,
                       const NoiseSpec& noise)
{
    FimBank bank;
    bank.theta = theta.values();
    bank.fims.resize(grid.size());
    for (std::size_t n = 0; n < grid.size(); ++n) bank.fims[n] = per_sample_fim(model, theta, grid.point(n), noise);
    return bank;
}

void validate_bank(const FimBank& bank)
{
    if (bank.fims.empty()) throw DimensionMismatch("FIM bank is empty");
    const auto p = bank.fims.front().rows();
    for (const auto& f : bank.fims)
        if (f.rows() != p || f.cols() != p) throw DimensionMismatch("FIM bank entries differ in shape");
}

ParamGrid::ParamGrid(const SignalModel& model, std::vector<ParamVector> thetas) : thetas_(std::move(thetas))
{
    if (thetas_.empty()) throw ConfigError("parameter grid is empty");
    for (const auto& t : thetas_)
        if (t.size() != model.num_params()) throw DimensionMismatch("parameter grid entries differ in length");
}

ParamGrid ParamGrid::uniform_over(const SignalModel& model, const ParamVector& base, int p, double lower,
                                  double delta, int count)
{
    if (count < 1) throw ConfigError("parameter grid count must be at least 1");
    if (p < 0 || p >= model.num_params()) throw ConfigError("parameter grid index out of range");
    std::vector<ParamVector> thetas;
    for (int l = 0; l < count; ++l) thetas.push_back(base.with(model, p, lower + l * delta / count));
    return ParamGrid(model, std::move(thetas));
}

std::pair<double, double> grid_interval(double lower, double delta, int count)
{
    return {lower, lower + (count - 1) * delta / count};
}

std::vector<FimBank> build_fim_banks(const SignalModel& model, const ParamGrid& thetas, const CandidateGrid& grid,
                                     const NoiseSpec& noise)
{
    std::vector<FimBank> banks(thetas.size());
    parallel_for(thetas.size(), [&](std::size_t l) { banks[l] = build_fim_bank(model, thetas.thetas()[l], grid, noise); });
    return banks;
}

Eigen::MatrixXd aggregate_fim(std::span<const double> w, const FimBank& bank)
{
    validate_bank(bank);
    if (w.size() != bank.size())
        throw DimensionMismatch("weight vector has length " + std::to_string(w.size()) + ", bank has " +
                                std::to_string(bank.size()) + " candidates");
    Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(bank.dim(), bank.dim());
    for (std::size_t n = 0; n < w.size(); ++n)
        if (w[n] != 0.0) sum.noalias() += w[n] * bank.fims[n];
    return sum;
}

Eigen::MatrixXd aggregate_fim(const Eigen::Ref<const Eigen::VectorXd>& w, const FimBank& bank)
{
    return aggregate_fim(std::span<const double>(w.data(), static_cast<std::size_t>(w.size())), bank);
}

Eigen::MatrixXd subset_fim(std::span<const std::size_t> indices, const FimBank& bank)
{
    validate_bank(bank);
    Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(bank.dim(), bank.dim());
    for (auto n : indices) {
        if (n >= bank.size()) throw DimensionMismatch("sample index " + std::to_string(n) + " out of range");
        sum += bank.fims[n];
    }
    return sum;
}

bool is_positive_definite(const Eigen::Ref<const Eigen::MatrixXd>& fim)
{
    const double tr = fim.trace();
    if (!(tr > 0.0) || !std::isfinite(tr)) return false;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(fim, Eigen::EigenvaluesOnly);
    return eig.eigenvalues().minCoeff() > 1e-10 * tr;
}

Eigen::VectorXd crlb_diag(const Eigen::Ref<const Eigen::MatrixXd>& fim, double ridge)
{
    if (fim.rows() != fim.cols()) throw DimensionMismatch("FIM is not square");
    if (ridge < 0.0) throw ConfigError("ridge must be non-negative");
    const auto p = fim.rows();
    Eigen::MatrixXd m = fim;
    if (ridge == 0.0) {
        if (!is_positive_definite(m)) throw SingularFim("FIM is not positive definite");
    } else {
        m.diagonal().array() += ridge;
    }
    Eigen::LLT<Eigen::MatrixXd> llt(m);
    if (llt.info() != Eigen::Success) throw SingularFim("FIM Cholesky factorization failed");
    // diag(M^-1)_p = ||L^-1 e_p||^2
    Eigen::MatrixXd linv = llt.matrixL().solve(Eigen::MatrixXd::Identity(p, p));
    return linv.colwise().squaredNorm().transpose();
}

double weighted_crlb_sum(const Eigen::Ref<const Eigen::MatrixXd>& fim, const Eigen::Ref<const Eigen::VectorXd>& psi,
                         double ridge)
{
    if (psi.size() != fim.rows()) throw DimensionMismatch("weight vector length differs from FIM size");
    if ((psi.array() < 0.0).any()) throw ConfigError("parameter weights must be non-negative");
    return psi.dot(crlb_diag(fim, ridge));
}

double default_ridge(const Eigen::Ref<const Eigen::MatrixXd>& fim) { return 1e-9 * fim.trace() / fim.rows(); }

FimBank apply_param_transform(const FimBank& bank, const ParamTransform& transform)
{
    validate_bank(bank);
    if (transform.a.rows() != bank.dim() || transform.a.cols() != bank.dim())
        throw DimensionMismatch("transform size differs from FIM size");
    FimBank out;
    out.theta = bank.theta;
    out.fims.reserve(bank.size());
    for (const auto& f : bank.fims) out.fims.push_back(transform.a * f * transform.a.transpose());
    return out;
}

double worst_case_crlb(const Eigen::Ref<const Eigen::VectorXd>& w, std::span<const FimBank> banks, int p,
                       double ridge)
{
    if (banks.empty()) throw ConfigError("no FIM banks given");
    std::vector<double> values(banks.size());
    std::vector<int> failed(banks.size(), 0);
    for (std::size_t l = 0; l < banks.size(); ++l) {
        if (p < 0 || p >= banks[l].dim()) throw DimensionMismatch("parameter index out of range");
        if (banks[l].size() != banks.front().size()) throw DimensionMismatch("FIM banks differ in candidate count");
    }
    parallel_for(banks.size(), [&](std::size_t l) {
        try {
            values[l] = crlb_diag(aggregate_fim(w, banks[l]), ridge)[p];
        } catch (const SingularFim&) {
            failed[l] = 1;
        }
    });
    for (std::size_t l = 0; l < banks.size(); ++l)
        if (failed[l])
            throw SingularFim("FIM is singular for parameter grid entry " + std::to_string(l), static_cast<long>(l));
    return *std::max_element(values.begin(), values.end());
}

Eigen::MatrixXd crlb_table(const Eigen::Ref<const Eigen::VectorXd>& w, std::span<const FimBank> banks)
{
    if (banks.empty()) throw ConfigError("no FIM banks given");
    Eigen::MatrixXd out(banks.front().dim(), static_cast<Eigen::Index>(banks.size()));
    for (std::size_t l = 0; l < banks.size(); ++l) {
        try {
            out.col(static_cast<Eigen::Index>(l)) = crlb_diag(aggregate_fim(w, banks[l]));
        } catch (const SingularFim&) {
            throw SingularFim("FIM is singular for parameter grid entry " + std::to_string(l), static_cast<long>(l));
        }
    }
    return out;
}

Eigen::MatrixXd crlb_table(std::span<const std::size_t> indices, std::span<const FimBank> banks)
{
    if (banks.empty()) throw ConfigError("no FIM banks given");
    Eigen::MatrixXd out(banks.front().dim(), static_cast<Eigen::Index>(banks.size()));
    for (std::size_t l = 0; l < banks.size(); ++l) {
        try {
            out.col(static_cast<Eigen::Index>(l)) = crlb_diag(subset_fim(indices, banks[l]));
        } catch (const SingularFim&) {
            throw SingularFim("FIM is singular for parameter grid entry " + std::to_string(l), static_cast<long>(l));
        }
    }
    return out;
}

}  // namespace sampler
