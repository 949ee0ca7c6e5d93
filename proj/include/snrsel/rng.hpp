#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "snrsel/types.hpp"

namespace snrsel {

namespace detail {

// splitmix64 output scramble (Steele, Lea, Flood 2014).
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

} // namespace detail

// Derives a decorrelated child seed; used both for named substreams inside one
// dataset and for per-run dataset seeds inside an experiment grid.
inline std::uint64_t mix_seed(std::uint64_t base, std::uint64_t tag) {
    std::uint64_t state = base + (tag + 1) * 0x9E3779B97F4A7C15ull;
    return detail::splitmix64(state);
}

// Substream tags of the synthetic generator.
enum class Stream : std::uint64_t {
    signal_loadings = 1,
    noise_variances = 2,
    factors = 3,
    noise = 4,
};

// mt19937_64 with fixed double conversion; avoids std::*_distribution so that
// identical seeds give identical streams on every standard library.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    // [0, 1)
    double uniform01() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    // Box-Muller; u1 shifted into (0, 1] so the log is finite.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = static_cast<double>((eng_() >> 11) + 1) * 0x1.0p-53;
        double u2 = static_cast<double>(eng_() >> 11) * 0x1.0p-53;
        double radius = std::sqrt(-2.0 * std::log(u1));
        double angle = 2.0 * M_PI * u2;
        spare_ = radius * std::sin(angle);
        has_spare_ = true;
        return radius * std::cos(angle);
    }

    Vector normal_vector(Index size) {
        Vector out(size);
        for (Index i = 0; i < size; ++i) out[i] = normal();
        return out;
    }

    // Row-major fill order.
    Matrix normal_matrix(Index rows, Index cols) {
        Matrix out(rows, cols);
        for (Index i = 0; i < rows; ++i)
            for (Index j = 0; j < cols; ++j) out(i, j) = normal();
        return out;
    }

private:
    std::mt19937_64 eng_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

} // namespace snrsel
