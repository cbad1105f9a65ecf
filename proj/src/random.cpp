#include "cmc/random.hpp"

#include <cmath>
#include <numbers>

namespace cmc::rng {

std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t stream) {
    return std::mt19937_64(splitmix64(splitmix64(seed) ^ splitmix64(stream + 0x5851f42d4c957f2dULL)));
}

std::vector<double> gaussian(std::mt19937_64& rng, std::size_t n) {
    constexpr double kScale = 1.0 / 9007199254740992.0;  // 2^-53
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; i += 2) {
        const double u1 = (static_cast<double>(rng() >> 11) + 1.0) * kScale;  // (0, 1]
        const double u2 = static_cast<double>(rng() >> 11) * kScale;          // [0, 1)
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * std::numbers::pi * u2;
        out[i] = r * std::cos(theta);
        if (i + 1 < n) out[i + 1] = r * std::sin(theta);
    }
    return out;
}

std::size_t uniform_index(std::mt19937_64& rng, std::size_t bound) {
    __extension__ using u128 = unsigned __int128;
    const u128 wide = static_cast<u128>(rng()) * bound;
    return static_cast<std::size_t>(wide >> 64);
}

}  // namespace cmc::rng
