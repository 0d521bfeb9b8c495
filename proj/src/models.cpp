#include "sampler/models.hpp"

#include <cmath>
#include <numbers>
#include <set>

#include "sampler/errors.hpp"

namespace sampler {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

void check_point(const SignalModel& model, const Eigen::Ref<const Eigen::VectorXd>& t)
{
    if (t.size() != model.dims())
        throw DimensionMismatch("sampling point has dimension " + std::to_string(t.size()) + ", model expects " +
                                std::to_string(model.dims()));
    if (!t.allFinite()) throw ConfigError("sampling point is not finite");
}

void check_theta(const SignalModel& model, const ParamVector& theta)
{
    if (theta.size() != model.num_params())
        throw DimensionMismatch("parameter vector has length " + std::to_string(theta.size()) + ", model expects " +
                                std::to_string(model.num_params()));
}

// Exponent of component k without the phase, i.e. log of the basis.
Complex basis_exponent(const SignalModel& model, const Eigen::Ref<const Eigen::VectorXd>& v, int k,
                       const Eigen::Ref<const Eigen::VectorXd>& t)
{
    const int base = k * model.params_per_component();
    switch (model.kind()) {
    case ModelKind::DampedSinusoid1D:
        return {-v[base + 2] * t[0], kTwoPi * v[base + 1] * t[0]};
    case ModelKind::LinearChirp1D:
        return {0.0, kTwoPi * (v[base + 1] + v[base + 2] * t[0]) * t[0]};
    case ModelKind::DampedSinusoid2D:
        return {-(v[base + 3] * t[0] + v[base + 4] * t[1]), kTwoPi * (v[base + 1] * t[0] + v[base + 2] * t[1])};
    }
    return {};
}

}  // namespace

std::string to_string(ModelKind kind)
{
    switch (kind) {
    case ModelKind::DampedSinusoid1D: return "damped_sinusoid_1d";
    case ModelKind::DampedSinusoid2D: return "damped_sinusoid_2d";
    case ModelKind::LinearChirp1D: return "linear_chirp_1d";
    }
    return "unknown";
}

ModelKind model_kind_from_string(const std::string& name)
{
    for (auto kind : {ModelKind::DampedSinusoid1D, ModelKind::DampedSinusoid2D, ModelKind::LinearChirp1D})
        if (to_string(kind) == name) return kind;
    throw ConfigError("unknown model kind '" + name + "'");
}

SignalModel::SignalModel(ModelKind kind, int components) : kind_(kind), components_(components)
{
    if (components < 1) throw ConfigError("model needs at least one component");
}

int SignalModel::dims() const noexcept { return kind_ == ModelKind::DampedSinusoid2D ? 2 : 1; }

int SignalModel::params_per_component() const noexcept { return kind_ == ModelKind::DampedSinusoid2D ? 6 : 4; }

ParamRole SignalModel::role(int p) const
{
    if (p < 0 || p >= num_params()) throw DimensionMismatch("parameter index out of range");
    const int j = p % params_per_component();
    if (j == 0) return ParamRole::Amplitude;
    if (j == params_per_component() - 1) return ParamRole::Phase;
    switch (kind_) {
    case ModelKind::DampedSinusoid1D: return j == 1 ? ParamRole::Frequency : ParamRole::Damping;
    case ModelKind::LinearChirp1D: return ParamRole::Frequency;
    case ModelKind::DampedSinusoid2D: return j <= 2 ? ParamRole::Frequency : ParamRole::Damping;
    }
    return ParamRole::Amplitude;
}

int SignalModel::axis(int p) const
{
    if (kind_ != ModelKind::DampedSinusoid2D) return 0;
    const int j = p % params_per_component();
    if (j == 1 || j == 3) return 0;
    if (j == 2 || j == 4) return 1;
    return 0;
}

std::string SignalModel::param_name(int p) const
{
    const int k = component_of(p) + 1;
    const std::string suffix = std::to_string(k);
    const int j = p % params_per_component();
    switch (role(p)) {
    case ParamRole::Amplitude: return "alpha" + suffix;
    case ParamRole::Phase: return "phi" + suffix;
    case ParamRole::Frequency:
        if (kind_ == ModelKind::LinearChirp1D) return (j == 1 ? "fstart" : "fslope") + suffix;
        if (kind_ == ModelKind::DampedSinusoid2D) return "f" + suffix + "_d" + std::to_string(axis(p) + 1);
        return "f" + suffix;
    case ParamRole::Damping:
        if (kind_ == ModelKind::DampedSinusoid2D) return "beta" + suffix + "_d" + std::to_string(axis(p) + 1);
        return "beta" + suffix;
    }
    return {};
}

std::optional<int> SignalModel::param_index(const std::string& name) const
{
    for (int p = 0; p < num_params(); ++p)
        if (param_name(p) == name) return p;
    return std::nullopt;
}

std::vector<int> SignalModel::nonlinear_params() const
{
    std::vector<int> out;
    for (int p = 0; p < num_params(); ++p) {
        const auto r = role(p);
        if (r == ParamRole::Frequency || r == ParamRole::Damping) out.push_back(p);
    }
    return out;
}

std::vector<std::pair<std::string, std::vector<int>>> SignalModel::param_subsets() const
{
    std::vector<std::pair<std::string, std::vector<int>>> out = {
        {"alpha", {}}, {"f", {}}, {"beta", {}}, {"phi", {}}};
    for (int p = 0; p < num_params(); ++p) {
        switch (role(p)) {
        case ParamRole::Amplitude: out[0].second.push_back(p); break;
        case ParamRole::Frequency: out[1].second.push_back(p); break;
        case ParamRole::Damping: out[2].second.push_back(p); break;
        case ParamRole::Phase: out[3].second.push_back(p); break;
        }
    }
    if (kind_ == ModelKind::DampedSinusoid1D) {
        out.push_back({"f_beta", {}});
        for (int p : nonlinear_params()) out.back().second.push_back(p);
    }
    if (kind_ == ModelKind::DampedSinusoid2D) {
        for (int d = 0; d < 2; ++d) {
            const std::string tag = "_d" + std::to_string(d + 1);
            std::vector<int> f, b;
            for (int p = 0; p < num_params(); ++p) {
                if (axis(p) != d) continue;
                if (role(p) == ParamRole::Frequency) f.push_back(p);
                if (role(p) == ParamRole::Damping) b.push_back(p);
            }
            out.push_back({"f" + tag, f});
            out.push_back({"beta" + tag, b});
        }
        out.push_back({"f_beta", nonlinear_params()});
    }
    std::erase_if(out, [](const auto& s) { return s.second.empty(); });
    return out;
}

ParamVector::ParamVector(const SignalModel& model, Eigen::VectorXd values) : values_(std::move(values))
{
    if (values_.size() != model.num_params())
        throw DimensionMismatch("parameter vector has length " + std::to_string(values_.size()) + ", model " +
                                to_string(model.kind()) + " with K=" + std::to_string(model.components()) +
                                " expects " + std::to_string(model.num_params()));
    if (!values_.allFinite()) throw ConfigError("parameter vector is not finite");
    for (int p = 0; p < model.num_params(); ++p) {
        const auto r = model.role(p);
        if (r == ParamRole::Amplitude && !(values_[p] > 0.0))
            throw ConfigError("amplitude " + model.param_name(p) + " must be positive");
        if (r == ParamRole::Damping && values_[p] < 0.0)
            throw ConfigError("damping " + model.param_name(p) + " must be non-negative");
    }
}

ParamVector ParamVector::with(const SignalModel& model, int p, double value) const
{
    Eigen::VectorXd v = values_;
    v[p] = value;
    return ParamVector(model, std::move(v));
}

CandidateGrid::CandidateGrid(Eigen::MatrixXd points) : points_(std::move(points))
{
    if (points_.rows() == 0) throw ConfigError("candidate grid is empty");
    if (points_.cols() < 1 || points_.cols() > 2) throw ConfigError("candidate grid must be 1-D or 2-D");
    if (!points_.allFinite()) throw ConfigError("candidate grid has non-finite coordinates");
    std::set<std::vector<double>> seen;
    for (Eigen::Index n = 0; n < points_.rows(); ++n) {
        std::vector<double> key;
        for (Eigen::Index d = 0; d < points_.cols(); ++d) key.push_back(points_(n, d));
        if (!seen.insert(key).second) throw ConfigError("candidate grid has duplicate point " + std::to_string(n));
    }
}

CandidateGrid::CandidateGrid(Eigen::MatrixXd points, std::pair<std::size_t, std::size_t> layout)
    : CandidateGrid(std::move(points))
{
    layout_ = layout;
}

CandidateGrid CandidateGrid::uniform_1d(std::size_t n, double origin)
{
    if (n == 0) throw ConfigError("candidate grid is empty");
    Eigen::MatrixXd pts(static_cast<Eigen::Index>(n), 1);
    for (std::size_t i = 0; i < n; ++i) pts(static_cast<Eigen::Index>(i), 0) = origin + static_cast<double>(i);
    return CandidateGrid(std::move(pts));
}

CandidateGrid CandidateGrid::uniform_2d(std::size_t n1, std::size_t n2, double origin)
{
    if (n1 == 0 || n2 == 0) throw ConfigError("candidate grid is empty");
    Eigen::MatrixXd pts(static_cast<Eigen::Index>(n1 * n2), 2);
    for (std::size_t i = 0; i < n1; ++i)
        for (std::size_t j = 0; j < n2; ++j) {
            const auto row = static_cast<Eigen::Index>(i * n2 + j);
            pts(row, 0) = origin + static_cast<double>(i);
            pts(row, 1) = origin + static_cast<double>(j);
        }
    return CandidateGrid(std::move(pts), {n1, n2});
}

NoiseSpec::NoiseSpec(double v) : variance(v)
{
    if (!(v >= 0.0) || !std::isfinite(v)) throw ConfigError("noise variance must be finite and non-negative");
}

Complex component_basis(const SignalModel& model, const Eigen::Ref<const Eigen::VectorXd>& values, int k,
                        const Eigen::Ref<const Eigen::VectorXd>& t)
{
    return std::exp(basis_exponent(model, values, k, t));
}

Complex mean(const SignalModel& model, const ParamVector& theta, const Eigen::Ref<const Eigen::VectorXd>& t)
{
    check_theta(model, theta);
    check_point(model, t);
    const auto& v = theta.values();
    const int stride = model.params_per_component();
    Complex s{0.0, 0.0};
    for (int k = 0; k < model.components(); ++k) {
        const int base = k * stride;
        s += v[base] * std::exp(basis_exponent(model, v, k, t) + Complex{0.0, v[base + stride - 1]});
    }
    return s;
}

Eigen::VectorXcd grad_mean(const SignalModel& model, const ParamVector& theta,
                           const Eigen::Ref<const Eigen::VectorXd>& t)
{
    check_theta(model, theta);
    check_point(model, t);
    const auto& v = theta.values();
    const int stride = model.params_per_component();
    const Complex i2pi{0.0, kTwoPi};
    Eigen::VectorXcd g(model.num_params());
    for (int k = 0; k < model.components(); ++k) {
        const int base = k * stride;
        const Complex unit = std::exp(basis_exponent(model, v, k, t) + Complex{0.0, v[base + stride - 1]});
        const Complex s = v[base] * unit;
        g[base] = unit;
        switch (model.kind()) {
        case ModelKind::DampedSinusoid1D:
            g[base + 1] = i2pi * t[0] * s;
            g[base + 2] = -t[0] * s;
            break;
        case ModelKind::LinearChirp1D:
            g[base + 1] = i2pi * t[0] * s;
            g[base + 2] = i2pi * t[0] * t[0] * s;
            break;
        case ModelKind::DampedSinusoid2D:
            g[base + 1] = i2pi * t[0] * s;
            g[base + 2] = i2pi * t[1] * s;
            g[base + 3] = -t[0] * s;
            g[base + 4] = -t[1] * s;
            break;
        }
        g[base + stride - 1] = Complex{0.0, 1.0} * s;
    }
    return g;
}

Eigen::MatrixXd per_sample_fim(const SignalModel& model, const ParamVector& theta,
                               const Eigen::Ref<const Eigen::VectorXd>& t, const NoiseSpec& noise)
{
    if (!(noise.variance > 0.0)) throw ConfigError("Fisher information needs a positive noise variance");
    const Eigen::VectorXcd g = grad_mean(model, theta, t);
    const Eigen::VectorXd re = g.real();
    const Eigen::VectorXd im = g.imag();
    return (2.0 / noise.variance) * (re * re.transpose() + im * im.transpose());
}

}  // namespace sampler
