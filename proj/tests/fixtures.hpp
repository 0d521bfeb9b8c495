#pragma once

#include <cstdint>
#include <random>

#include <Eigen/Dense>

#include "sampler/models.hpp"

namespace fixtures {

// Parameter vector with amplitudes in [0.5, 2], frequencies in [0.05, 0.45],
// dampings in [0.01, 0.1] (chirp slopes in [-0.005, 0.005]) and phases in
// [-pi, pi].
inline sampler::ParamVector random_theta(const sampler::SignalModel& m, std::mt19937_64& rng)
{
    std::uniform_real_distribution<double> amp(0.5, 2.0), freq(0.05, 0.45), damp(0.01, 0.1), slope(-0.005, 0.005),
        phase(-3.14159, 3.14159);
    Eigen::VectorXd v(m.num_params());
    for (int p = 0; p < m.num_params(); ++p) {
        switch (m.role(p)) {
        case sampler::ParamRole::Amplitude: v[p] = amp(rng); break;
        case sampler::ParamRole::Phase: v[p] = phase(rng); break;
        case sampler::ParamRole::Damping: v[p] = damp(rng); break;
        case sampler::ParamRole::Frequency:
            v[p] = (m.kind() == sampler::ModelKind::LinearChirp1D && p % 4 == 2) ? slope(rng) : freq(rng);
            break;
        }
    }
    return sampler::ParamVector(m, v);
}

inline sampler::SignalModel random_model(std::mt19937_64& rng)
{
    const int kind = std::uniform_int_distribution<int>(0, 2)(rng);
    const int k = std::uniform_int_distribution<int>(1, 2)(rng);
    const sampler::ModelKind kinds[] = {sampler::ModelKind::DampedSinusoid1D, sampler::ModelKind::DampedSinusoid2D,
                                        sampler::ModelKind::LinearChirp1D};
    return sampler::SignalModel(kinds[kind], k);
}

inline sampler::CandidateGrid grid_for(const sampler::SignalModel& m, std::size_t n1, std::size_t n2 = 0)
{
    if (m.dims() == 1) return sampler::CandidateGrid::uniform_1d(n1, 1.0);
    return sampler::CandidateGrid::uniform_2d(n1, n2 ? n2 : n1, 1.0);
}

}  // namespace fixtures
