#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "sampler/models.hpp"

namespace sampler {

// Per-candidate Fisher information matrices for one parameter vector.
struct FimBank {
    std::vector<Eigen::MatrixXd> fims;
    // Parameter vector the bank was computed at; empty for hand-built banks.
    Eigen::VectorXd theta;

    std::size_t size() const noexcept { return fims.size(); }
    int dim() const noexcept { return fims.empty() ? 0 : static_cast<int>(fims.front().rows()); }
};

FimBank build_fim_bank(const SignalModel& model, const ParamVector& theta, const CandidateGrid& grid,
                       const NoiseSpec& noise);

// Throws DimensionMismatch unless all matrices are square, the same size and
// the bank is nonempty.
void validate_bank(const FimBank& bank);

struct ParamTransform {
    Eigen::MatrixXd a;
};

// A finite set of parameter vectors for one model.
class ParamGrid {
public:
    ParamGrid(const SignalModel& model, std::vector<ParamVector> thetas);

    // theta_l = base with parameter p set to lower + l * delta / count,
    // l = 0..count-1.
    static ParamGrid uniform_over(const SignalModel& model, const ParamVector& base, int p, double lower,
                                  double delta, int count);

    const std::vector<ParamVector>& thetas() const noexcept { return thetas_; }
    std::size_t size() const noexcept { return thetas_.size(); }

private:
    std::vector<ParamVector> thetas_;
};

// Interval covered by a uniform_over grid: [lower, lower + (count-1) * delta / count].
std::pair<double, double> grid_interval(double lower, double delta, int count);

std::vector<FimBank> build_fim_banks(const SignalModel& model, const ParamGrid& thetas, const CandidateGrid& grid,
                                     const NoiseSpec& noise);

Eigen::MatrixXd aggregate_fim(std::span<const double> w, const FimBank& bank);
Eigen::MatrixXd aggregate_fim(const Eigen::Ref<const Eigen::VectorXd>& w, const FimBank& bank);

// Sum of the bank entries at the given indices.
Eigen::MatrixXd subset_fim(std::span<const std::size_t> indices, const FimBank& bank);

// Positive definiteness test used throughout: min eigenvalue > 1e-10 * trace.
bool is_positive_definite(const Eigen::Ref<const Eigen::MatrixXd>& fim);

// Diagonal of (fim + ridge I)^-1. With ridge == 0 the FIM must pass
// is_positive_definite, otherwise SingularFim.
Eigen::VectorXd crlb_diag(const Eigen::Ref<const Eigen::MatrixXd>& fim, double ridge = 0.0);

double weighted_crlb_sum(const Eigen::Ref<const Eigen::MatrixXd>& fim, const Eigen::Ref<const Eigen::VectorXd>& psi,
                         double ridge = 0.0);

// Ridge used inside line searches: 1e-9 * trace / P.
double default_ridge(const Eigen::Ref<const Eigen::MatrixXd>& fim);

FimBank apply_param_transform(const FimBank& bank, const ParamTransform& transform);

// max over banks of e_p^T (sum_n w_n F_n)^-1 e_p. SingularFim carries the
// index of the offending bank.
double worst_case_crlb(const Eigen::Ref<const Eigen::VectorXd>& w, std::span<const FimBank> banks, int p,
                       double ridge = 0.0);

// CRLB diagonals for every bank at w, one column per bank.
Eigen::MatrixXd crlb_table(const Eigen::Ref<const Eigen::VectorXd>& w, std::span<const FimBank> banks);

// Same for a selected index set.
Eigen::MatrixXd crlb_table(std::span<const std::size_t> indices, std::span<const FimBank> banks);

}  // namespace sampler
