#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace cmc::fft {

bool is_power_of_two(std::size_t n) noexcept;

/// Smallest power of two >= n (n = 0 gives 1).
std::size_t next_power_of_two(std::size_t n) noexcept;

/// In-place iterative radix-2 decimation-in-time transform,
/// X[k] = sum_n x[n] e^{-2 pi i k n / N}. Size must be a power of two.
void transform(std::span<std::complex<double>> data);

/// Transform of a real sequence zero-padded to `nfft`; returns bins 0..nfft/2.
std::vector<std::complex<double>> real_forward(std::span<const double> x, std::size_t nfft);

}  // namespace cmc::fft
