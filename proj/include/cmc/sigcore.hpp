#pragma once

#include <complex>
#include <span>
#include <vector>

#include "cmc/time_series.hpp"

namespace cmc::sigcore {

/// Band-pass design request. `order` is the order of the resulting band-pass
/// filter (twice the low-pass prototype order), so it must be even.
struct BandPassSpec {
    double lo_hz = 3.0;
    double hi_hz = 80.0;
    int order = 4;
};

/// Direct-form II transposed second-order section, a0 normalised to 1.
struct Biquad {
    double b0, b1, b2;
    double a1, a2;
};

/// Cascade of biquads designed from a Butterworth prototype by bilinear
/// transform.
class IirFilter {
public:
    explicit IirFilter(std::vector<Biquad> sections) : sections_(std::move(sections)) {}

    const std::vector<Biquad>& sections() const noexcept { return sections_; }
    int order() const noexcept { return 2 * static_cast<int>(sections_.size()); }

    /// Single-pass complex response H(e^{j 2 pi f / fs}).
    std::complex<double> response(double f_hz, double fs) const;

    /// Causal single pass with zero initial state.
    std::vector<double> filter(std::span<const double> x) const;

    /// Forward-backward application. Pads `pad` samples at each end by odd
    /// reflection, starts each pass from the steady state of its first
    /// sample and trims the padding.
    std::vector<double> filtfilt(std::span<const double> x, std::size_t pad) const;

private:
    std::vector<Biquad> sections_;
};

/// Throws InvalidArgument unless 0 < lo < hi < fs/2 and order is even and positive.
void validate(const BandPassSpec& spec, double fs);

IirFilter design_bandpass(const BandPassSpec& spec, double fs);

/// Padding used by `bandpass` on each side: 3 x order samples.
std::size_t edge_padding(const BandPassSpec& spec);

/// Zero-phase band-pass (forward then backward). Output has the input length.
/// Throws InvalidArgument on bad band edges or when the series is shorter
/// than 3 x order samples.
TimeSeries bandpass(const TimeSeries& ts, const BandPassSpec& spec);

/// Power gain of `bandpass` at f: |H(f)|^4 of the designed single-pass filter.
double zero_phase_power_gain(const BandPassSpec& spec, double fs, double f_hz);

/// Frequency of unit gain of the designed band-pass (the geometric centre of
/// the pre-warped band edges).
double center_frequency(const BandPassSpec& spec, double fs);

/// Full-wave rectification.
TimeSeries rectify(const TimeSeries& ts);

/// Number of samples spanned by a window of `window_s` seconds at `fs`.
std::size_t window_samples(double window_s, double fs);

/// Centered moving average; near the edges the window is truncated to the
/// available samples. Output length equals input length.
TimeSeries moving_average(const TimeSeries& ts, double window_s);

}  // namespace cmc::sigcore
