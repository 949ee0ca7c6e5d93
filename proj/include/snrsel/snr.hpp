#pragma once

#include <algorithm>
#include <numeric>

#include "snrsel/types.hpp"

namespace snrsel {

// Per-feature SNR ranking together with the chosen index set.
struct SnrRanking {
    Vector snr;
    std::vector<Index> selected;   // ascending feature indices, size m
    Index m = 0;

    Index dim() const { return snr.size(); }

    bool is_selected(Index feature) const {
        return std::binary_search(selected.begin(), selected.end(), feature);
    }
};

// snr_i = ||W_i.||^2 / psi_i.
inline Vector compute_snr(const LowRankModel& model) {
    return (model.loadings.rowwise().squaredNorm().array() / model.noise_variances.array()).matrix();
}

// Indices of the m largest SNRs; ties go to the lower feature index, so
// selections are nested as m grows.
inline SnrRanking select_top_m(const Vector& snr, Index m) {
    const Index d = snr.size();
    if (m < 1 || m > d)
        throw PreconditionError("select_top_m: m must be in [1, d]");
    std::vector<Index> order(static_cast<std::size_t>(d));
    std::iota(order.begin(), order.end(), Index{0});
    std::sort(order.begin(), order.end(), [&](Index a, Index b) {
        if (snr[a] != snr[b]) return snr[a] > snr[b];
        return a < b;
    });
    order.resize(static_cast<std::size_t>(m));
    std::sort(order.begin(), order.end());

    SnrRanking ranking;
    ranking.snr = snr;
    ranking.selected = std::move(order);
    ranking.m = m;
    return ranking;
}

inline SnrRanking select_top_m(const LowRankModel& model, Index m) {
    return select_top_m(compute_snr(model), m);
}

// |true ∩ predicted| / |true| for one run.
inline double recovery_accuracy(const std::vector<Index>& true_set,
                                const std::vector<Index>& predicted_set) {
    if (true_set.empty())
        throw PreconditionError("recovery_accuracy: empty true set");
    std::vector<Index> a = true_set;
    std::vector<Index> b = predicted_set;
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    std::vector<Index> common;
    std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(common));
    return static_cast<double>(common.size()) / static_cast<double>(a.size());
}

} // namespace snrsel
