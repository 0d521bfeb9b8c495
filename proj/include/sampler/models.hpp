#pragma once

#include <complex>
#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace sampler {

using Complex = std::complex<double>;

enum class ModelKind { DampedSinusoid1D, DampedSinusoid2D, LinearChirp1D };

enum class ParamRole { Amplitude, Frequency, Damping, Phase };

std::string to_string(ModelKind kind);
ModelKind model_kind_from_string(const std::string& name);

// Parameter layout per component, components concatenated:
//   DampedSinusoid1D  (alpha, f, beta, phi)
//   LinearChirp1D     (alpha, f_start, f_slope, phi)
//   DampedSinusoid2D  (alpha, f_1, f_2, beta_1, beta_2, phi)
// Frequencies are in cycles/sample, dampings in 1/sample, phases in radians.
class SignalModel {
public:
    SignalModel(ModelKind kind, int components);

    ModelKind kind() const noexcept { return kind_; }
    int components() const noexcept { return components_; }
    int dims() const noexcept;
    int params_per_component() const noexcept;
    int num_params() const noexcept { return components_ * params_per_component(); }

    ParamRole role(int p) const;
    // Sampling dimension a frequency/damping parameter acts on (0-based);
    // 0 for amplitude and phase.
    int axis(int p) const;
    int component_of(int p) const { return p / params_per_component(); }
    std::string param_name(int p) const;
    std::optional<int> param_index(const std::string& name) const;

    // Parameters that enter the mean nonlinearly (everything except the
    // complex amplitude alpha*exp(i*phi) of each component).
    std::vector<int> nonlinear_params() const;

    // Named parameter groups used in reports, e.g. "f", "beta", "f_d1".
    std::vector<std::pair<std::string, std::vector<int>>> param_subsets() const;

    bool operator==(const SignalModel&) const = default;

private:
    ModelKind kind_;
    int components_;
};

// A validated parameter vector for a given model.
class ParamVector {
public:
    ParamVector(const SignalModel& model, Eigen::VectorXd values);

    const Eigen::VectorXd& values() const noexcept { return values_; }
    double operator[](Eigen::Index p) const { return values_[p]; }
    Eigen::Index size() const noexcept { return values_.size(); }

    // Copy with one entry replaced; revalidated.
    ParamVector with(const SignalModel& model, int p, double value) const;

private:
    Eigen::VectorXd values_;
};

class CandidateGrid {
public:
    // Points as rows of an N x D matrix.
    explicit CandidateGrid(Eigen::MatrixXd points);

    // Integer sampling times origin, origin + 1, ..., origin + n - 1.
    static CandidateGrid uniform_1d(std::size_t n, double origin = 0.0);
    // Row-major N1 x N2 Cartesian grid with coordinates (origin + i1, origin + i2).
    static CandidateGrid uniform_2d(std::size_t n1, std::size_t n2, double origin = 0.0);

    std::size_t size() const noexcept { return static_cast<std::size_t>(points_.rows()); }
    int dims() const noexcept { return static_cast<int>(points_.cols()); }
    Eigen::VectorXd point(std::size_t n) const { return points_.row(static_cast<Eigen::Index>(n)).transpose(); }
    const Eigen::MatrixXd& points() const noexcept { return points_; }
    const std::optional<std::pair<std::size_t, std::size_t>>& layout() const noexcept { return layout_; }

private:
    CandidateGrid(Eigen::MatrixXd points, std::pair<std::size_t, std::size_t> layout);

    Eigen::MatrixXd points_;
    std::optional<std::pair<std::size_t, std::size_t>> layout_;
};

struct NoiseSpec {
    explicit NoiseSpec(double variance);
    double variance;
};

Complex mean(const SignalModel& model, const ParamVector& theta, const Eigen::Ref<const Eigen::VectorXd>& t);

Eigen::VectorXcd grad_mean(const SignalModel& model, const ParamVector& theta,
                           const Eigen::Ref<const Eigen::VectorXd>& t);

// F(t; theta) = (2 / sigma^2) Re(conj(g) g^T), g = grad_mean.
Eigen::MatrixXd per_sample_fim(const SignalModel& model, const ParamVector& theta,
                               const Eigen::Ref<const Eigen::VectorXd>& t, const NoiseSpec& noise);

// Basis function of component k with unit complex amplitude, i.e. the mean
// of that component divided by alpha_k * exp(i phi_k). Reads only the
// nonlinear entries of `values`, which is not validated.
Complex component_basis(const SignalModel& model, const Eigen::Ref<const Eigen::VectorXd>& values, int k,
                        const Eigen::Ref<const Eigen::VectorXd>& t);

}  // namespace sampler
