#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

namespace cmc::rng {

std::uint64_t splitmix64(std::uint64_t x) noexcept;

/// Independent engine for (seed, stream).
std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t stream);

/// Standard normal draws by Box-Muller on 53-bit uniforms, so the sequence
/// depends only on the engine.
std::vector<double> gaussian(std::mt19937_64& rng, std::size_t n);

/// Uniform integer in [0, bound) by multiply-shift.
std::size_t uniform_index(std::mt19937_64& rng, std::size_t bound);

/// Fisher-Yates shuffle driven by uniform_index.
template <typename T>
void shuffle(std::vector<T>& v, std::mt19937_64& rng) {
    for (std::size_t i = v.size(); i > 1; --i) {
        std::swap(v[i - 1], v[uniform_index(rng, i)]);
    }
}

}  // namespace cmc::rng
