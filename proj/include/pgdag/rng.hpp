#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace pgdag {

using Rng = std::mt19937_64;

namespace detail {

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t fnv1a(std::string_view s) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace detail

/// Derives an independent seed for a named sub-stream of a run.
/// Same (seed, label, indices) always yields the same value.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::string_view label,
                                    std::uint64_t i = 0, std::uint64_t j = 0) noexcept {
    std::uint64_t h = detail::splitmix64(seed ^ detail::fnv1a(label));
    h = detail::splitmix64(h ^ (i * 0x9e3779b97f4a7c15ULL));
    h = detail::splitmix64(h ^ (j * 0xc2b2ae3d27d4eb4fULL));
    return h;
}

inline Rng make_rng(std::uint64_t seed, std::string_view label, std::uint64_t i = 0,
                    std::uint64_t j = 0) {
    return Rng{derive_seed(seed, label, i, j)};
}

/// Uniform double in [0,1) from the top 53 bits; independent of the
/// standard library's distribution implementation.
inline double uniform01(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace pgdag
