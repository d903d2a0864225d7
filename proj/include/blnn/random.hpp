#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace blnn {

using Rng = std::mt19937_64;

/// Independent generator for a (seed, stream...) tuple. All randomness in
/// the library is derived through this, so a run is a function of its seed.
inline Rng make_rng(std::uint64_t seed, std::initializer_list<std::uint64_t> stream = {}) {
    std::vector<std::uint32_t> words;
    words.push_back(static_cast<std::uint32_t>(seed));
    words.push_back(static_cast<std::uint32_t>(seed >> 32));
    for (auto s : stream) {
        words.push_back(static_cast<std::uint32_t>(s));
        words.push_back(static_cast<std::uint32_t>(s >> 32));
    }
    std::seed_seq seq(words.begin(), words.end());
    return Rng(seq);
}

/// Uniform double in [0, 1).
inline double uniform01(Rng& rng) { return std::generate_canonical<double, 53>(rng); }

}  // namespace blnn
