#pragma once

// Seedable random draws built directly on mt19937_64 output words.
// std::*_distribution is implementation-defined across standard libraries,
// so the draws here are spelled out to keep runs reproducible per release.

#include <cstdint>
#include <random>

namespace ghazalforge {

/// Uniform in [0, 1) with 53 random bits.
inline double uniform_unit(std::mt19937_64& gen) {
    return static_cast<double>(gen() >> 11) * 0x1.0p-53;
}

inline double uniform_range(std::mt19937_64& gen, double lo, double hi) {
    return lo + (hi - lo) * uniform_unit(gen);
}

/// Uniform integer in [0, n).
inline std::uint64_t uniform_index(std::mt19937_64& gen, std::uint64_t n) {
    // modulo bias is < 2^-32 for the sizes used here (vocab/token counts)
    return gen() % n;
}

}  // namespace ghazalforge
