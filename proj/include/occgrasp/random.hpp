#pragma once

#include <cstdint>
#include <random>

namespace occgrasp {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer; used to derive independent streams from a master seed.
constexpr std::uint64_t mix_seed(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Stream for item `index` under `seed`; independent of evaluation order.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index,
                                    std::uint64_t salt = 0) {
    return mix_seed(mix_seed(seed ^ mix_seed(salt)) + index);
}

inline Rng make_rng(std::uint64_t seed, std::uint64_t index = 0, std::uint64_t salt = 0) {
    return Rng(derive_seed(seed, index, salt));
}

inline double uniform(Rng& rng, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline int uniform_int(Rng& rng, int lo, int hi) {
    return std::uniform_int_distribution<int>(lo, hi)(rng);
}

}  // namespace occgrasp
