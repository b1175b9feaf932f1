// Copyright 2026 The fedtext Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace fedtext {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer. Used to mix seeds into independent stream seeds.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Derives a stream seed from a base seed and a tuple of coordinates, e.g.
/// (seed, round, client). Order matters; the mapping is stable across
/// platforms.
inline std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::int64_t> coords) noexcept {
    std::uint64_t h = splitmix64(base);
    for (auto c : coords) h = splitmix64(h ^ static_cast<std::uint64_t>(c));
    return h;
}

/// Uniform double in [0, 1) from 53 random bits; independent of the
/// standard library's distribution implementation.
inline double uniform01(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double uniform(Rng& rng, double lo, double hi) {
    return lo + (hi - lo) * uniform01(rng);
}

/// Unbiased integer in [0, n).
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t r;
    do {
        r = rng();
    } while (r >= limit);
    return r % n;
}

/// Fisher-Yates shuffle with a fixed index draw, so permutations are
/// identical on every standard library.
template <typename Range>
void shuffle(Range& range, Rng& rng) {
    using std::swap;
    const auto n = static_cast<std::uint64_t>(range.size());
    for (std::uint64_t i = n; i > 1; --i) {
        const auto j = uniform_index(rng, i);
        swap(range[i - 1], range[j]);
    }
}

}  // namespace fedtext
