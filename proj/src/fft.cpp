#include "cmc/fft.hpp"

#include <bit>
#include <cmath>
#include <numbers>
#include <string>
#include <utility>

#include "cmc/error.hpp"

namespace cmc::fft {

bool is_power_of_two(std::size_t n) noexcept { return std::has_single_bit(n); }

std::size_t next_power_of_two(std::size_t n) noexcept { return n <= 1 ? 1 : std::bit_ceil(n); }

void transform(std::span<std::complex<double>> data) {
    const std::size_t n = data.size();
    if (!is_power_of_two(n)) {
        throw InvalidArgument("fft: size " + std::to_string(n) + " is not a power of two");
    }

    // Bit-reversal permutation.
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(data[i], data[j]);
    }

    for (std::size_t len = 2; len <= n; len <<= 1) {
        const std::size_t half = len / 2;
        const double theta = -2.0 * std::numbers::pi / static_cast<double>(len);
        for (std::size_t k = 0; k < half; ++k) {
            // Twiddles evaluated directly rather than by recurrence to avoid drift.
            const std::complex<double> w = std::polar(1.0, theta * static_cast<double>(k));
            for (std::size_t start = 0; start < n; start += len) {
                const auto u = data[start + k];
                const auto v = data[start + k + half] * w;
                data[start + k] = u + v;
                data[start + k + half] = u - v;
            }
        }
    }
}

std::vector<std::complex<double>> real_forward(std::span<const double> x, std::size_t nfft) {
    if (x.size() > nfft) {
        throw InvalidArgument("fft: input of " + std::to_string(x.size()) +
                              " samples exceeds transform size " + std::to_string(nfft));
    }
    std::vector<std::complex<double>> buf(nfft);
    for (std::size_t i = 0; i < x.size(); ++i) buf[i] = {x[i], 0.0};
    transform(buf);
    buf.resize(nfft / 2 + 1);
    return buf;
}

}  // namespace cmc::fft
