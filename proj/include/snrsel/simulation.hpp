#pragma once

#include <utility>

#include "snrsel/rng.hpp"
#include "snrsel/types.hpp"

namespace snrsel {

inline constexpr Index kSignalFeatures = 10;

// Synthetic-data parameterization: 10 signal features with a known SNR profile
// followed by d_noise pure-noise features.
struct SimSpec {
    Index n = 100;
    Index d_noise = 100;
    Index r = 3;
    std::uint64_t seed = 0;
    // Empty resolves to 0.5, 0.6, ..., 1.4. Must have exactly 10 positive
    // entries otherwise.
    std::vector<double> snr_profile;

    Index dim() const { return kSignalFeatures + d_noise; }

    std::vector<double> resolved_profile() const {
        if (snr_profile.empty()) {
            std::vector<double> p(kSignalFeatures);
            for (Index i = 0; i < kSignalFeatures; ++i)
                p[static_cast<std::size_t>(i)] = 0.5 + static_cast<double>(i) / 10.0;
            return p;
        }
        return snr_profile;
    }

    void validate() const {
        if (n < 2) throw PreconditionError("SimSpec: n must be at least 2");
        if (d_noise < 0) throw PreconditionError("SimSpec: d_noise must be non-negative");
        if (r < 1) throw PreconditionError("SimSpec: r must be positive");
        if (!snr_profile.empty()) {
            if (static_cast<Index>(snr_profile.size()) != kSignalFeatures)
                throw PreconditionError("SimSpec: snr_profile must have 10 entries");
            for (double v : snr_profile)
                if (!(v > 0.0)) throw PreconditionError("SimSpec: snr_profile entries must be positive");
        }
    }
};

struct SimTruth {
    Matrix W_true;                    // d x r, zero below the signal block
    Vector psi_true;                  // length d
    Vector snr_true;                  // profile on the signal block, 0 elsewhere
    std::vector<Index> true_indices;  // 0..9
};

// Draws X = Gamma W^T + eps with per-feature noise variances chosen so that
// the signal rows hit the requested SNR profile exactly. One named substream
// per random object keeps runs reproducible and independent of draw order.
inline std::pair<DataMatrix, SimTruth> generate(const SimSpec& spec) {
    spec.validate();
    const Index d = spec.dim();
    const Index r = spec.r;
    const std::vector<double> profile = spec.resolved_profile();

    Rng w_rng(mix_seed(spec.seed, static_cast<std::uint64_t>(Stream::signal_loadings)));
    Rng psi_rng(mix_seed(spec.seed, static_cast<std::uint64_t>(Stream::noise_variances)));
    Rng factor_rng(mix_seed(spec.seed, static_cast<std::uint64_t>(Stream::factors)));
    Rng noise_rng(mix_seed(spec.seed, static_cast<std::uint64_t>(Stream::noise)));

    SimTruth truth;
    truth.W_true = Matrix::Zero(d, r);
    truth.W_true.topRows(kSignalFeatures) = w_rng.normal_matrix(kSignalFeatures, r);

    truth.psi_true.resize(d);
    truth.snr_true = Vector::Zero(d);
    for (Index i = 0; i < kSignalFeatures; ++i) {
        const double sig = truth.W_true.row(i).squaredNorm();
        const double snr = profile[static_cast<std::size_t>(i)];
        truth.psi_true[i] = sig / snr;
        truth.snr_true[i] = snr;
    }
    const double lo = static_cast<double>(r) / 1.4;
    const double hi = static_cast<double>(r) / 0.5;
    for (Index i = kSignalFeatures; i < d; ++i) truth.psi_true[i] = psi_rng.uniform(lo, hi);

    truth.true_indices.resize(kSignalFeatures);
    for (Index i = 0; i < kSignalFeatures; ++i) truth.true_indices[static_cast<std::size_t>(i)] = i;

    const Matrix factors = factor_rng.normal_matrix(spec.n, r);
    const Vector psi_sqrt = truth.psi_true.cwiseSqrt();
    Matrix x = factors * truth.W_true.transpose();
    for (Index i = 0; i < spec.n; ++i)
        for (Index j = 0; j < d; ++j) x(i, j) += noise_rng.normal() * psi_sqrt[j];

    DataMatrix data;
    data.values = std::move(x);
    return {std::move(data), std::move(truth)};
}

// Mean absolute deviation of one estimate against the truth.
inline double mad(const Vector& estimate, const Vector& truth) {
    if (estimate.size() != truth.size())
        throw PreconditionError("mad: length mismatch");
    return (estimate - truth).cwiseAbs().mean();
}

} // namespace snrsel
