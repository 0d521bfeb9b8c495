#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "sampler/models.hpp"

namespace sampler {

struct Observation {
    std::vector<std::size_t> indices;  // candidate indices
    Eigen::MatrixXd times;             // one row per index
    Eigen::VectorXcd values;
    NoiseSpec noise{0.0};
    std::uint64_t seed = 0;
};

// Seed of trial `trial` in a run seeded with `base_seed`.
std::uint64_t trial_seed(std::uint64_t base_seed, std::uint64_t trial);

// y_n = mean(theta, t_n) + e_n, e_n complex Gaussian with real and imaginary
// parts of variance sigma^2 / 2 each.
Observation simulate(const SignalModel& model, const ParamVector& theta, const CandidateGrid& grid,
                     std::span<const std::size_t> indices, const NoiseSpec& noise, std::uint64_t seed);

// Search grid over the nonlinear parameters (frequencies, dampings, chirp
// rates) in SignalModel::nonlinear_params() order. Complex amplitudes are
// solved by linear least squares at every grid point.
struct EstimationGrid {
    std::vector<std::vector<double>> values;
    bool polish = false;
    int polish_evaluations = 200;

    // Number of grid points; throws EmptyGrid or TooLarge.
    std::size_t size() const;

    // `points` values per nonlinear parameter spanning +-width root-CRLB
    // around `center`; damping values are kept non-negative.
    static EstimationGrid around(const SignalModel& model, const ParamVector& center,
                                 const Eigen::Ref<const Eigen::VectorXd>& crlb, double width = 3.0, int points = 15);
};

inline constexpr std::size_t kMaxEstimationGridPoints = 1'000'000;

// Grid-search nonlinear least squares for a fixed set of sampling times. The
// bases and their Gram matrices are shared across calls.
class NlsEstimator {
public:
    NlsEstimator(const SignalModel& model, const Eigen::Ref<const Eigen::MatrixXd>& times, EstimationGrid search);

    // Minimizer of 1/2 ||y - g(theta)||^2 over the grid, ties going to the
    // lexicographically first grid point, optionally polished.
    ParamVector estimate(const Eigen::Ref<const Eigen::VectorXcd>& y) const;

    // 1/2 ||y - g||^2 minimized over the complex amplitudes at the given
    // nonlinear parameters; `amplitudes` receives the minimizer.
    double profile_cost(const Eigen::Ref<const Eigen::VectorXcd>& y, const Eigen::Ref<const Eigen::VectorXd>& nonlinear,
                        Eigen::VectorXcd* amplitudes = nullptr) const;

    // Nonlinear parameter values of grid point `index` (lexicographic order).
    Eigen::VectorXd grid_point(std::size_t index) const;

    std::size_t grid_size() const noexcept { return total_; }

private:
    struct Component {
        std::vector<int> coords;       // positions within the nonlinear vector
        std::vector<std::size_t> radix;
        std::size_t count = 0;
        Eigen::MatrixXcd basis;        // samples x subgrid points
        Eigen::VectorXd norms;         // squared column norms
    };

    ParamVector assemble(const Eigen::VectorXd& nonlinear, const Eigen::VectorXcd& amplitudes) const;

    SignalModel model_;
    Eigen::MatrixXd times_;
    EstimationGrid search_;
    std::vector<int> nonlinear_;
    std::vector<Component> comps_;
    std::vector<Eigen::MatrixXcd> cross_;  // cross_[k * K + l] = B_k^H B_l for k < l
    std::size_t total_ = 0;
};

ParamVector nls_estimate(const Observation& obs, const SignalModel& model, const EstimationGrid& search);

// sqrt(sum_{p in subset} mean over trials of (estimate_p - truth_p)^2).
double rmse(std::span<const ParamVector> estimates, const ParamVector& truth, std::span<const int> subset);
// Same with one truth per trial.
double rmse(std::span<const ParamVector> estimates, std::span<const ParamVector> truths, std::span<const int> subset);

}  // namespace sampler
