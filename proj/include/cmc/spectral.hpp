#pragma once

#include <array>
#include <complex>
#include <concepts>
#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "cmc/error.hpp"
#include "cmc/parallel.hpp"
#include "cmc/time_series.hpp"

namespace cmc::spectral {

enum class Taper { hann, rectangular };

/// One-sided auto spectrum on a uniform grid 0..fs/2.
struct Spectrum {
    std::vector<double> freqs;
    std::vector<double> values;
};

struct CrossSpectrum {
    std::vector<double> freqs;
    std::vector<std::complex<double>> values;
};

/// Magnitude-squared coherence per bin, in [0, 1]. Bins with Sx*Sy = 0 are 0.
struct CmcSpectrum {
    std::vector<double> freqs;
    std::vector<double> values;
};

struct WelchConfig {
    double window_s = 0.5;
    double overlap = 0.5;
    Taper taper = Taper::hann;
    bool detrend = true;  ///< subtract each sub-window's mean before tapering
};

struct WelchResult {
    Spectrum sx;
    Spectrum sy;
    CrossSpectrum sxy;
    std::size_t subwindows = 0;  ///< L, the number of averaged sub-windows
    std::size_t window_len = 0;
    std::size_t nfft = 0;
};

/// Per-bin mean and population standard deviation over trials.
struct SpectrumStats {
    std::vector<double> freqs;
    std::vector<double> mean;
    std::vector<double> std;
    std::size_t n = 0;
};

struct BandDef {
    std::string name;
    double lo_hz;
    double hi_hz;  ///< exclusive
};

enum class FeatureStat { mean, max };

inline constexpr std::size_t kBandCount = 8;

/// low-alpha, alpha, low-beta, high-beta, beta, low-gamma, high-gamma, gamma.
const std::array<BandDef, kBandCount>& default_bands();

std::vector<double> taper(Taper kind, std::size_t n);

/// Number of sub-windows of `win` samples stepping by `step` in `n` samples.
std::size_t subwindow_count(std::size_t n, std::size_t win, std::size_t step);

/// One-sided periodogram of a single window, normalised so that the bins sum
/// to the energy of the tapered window. No detrending.
Spectrum periodogram(std::span<const double> x, double fs, Taper kind, std::size_t nfft);

/// Welch auto/cross spectra (one-sided power spectral density). Each
/// sub-window is optionally mean-subtracted, tapered and zero-padded to the
/// next power of two.
WelchResult welch_spectra(std::span<const double> x, std::span<const double> y, double fs,
                          const WelchConfig& cfg = {});
WelchResult welch_spectra(const TimeSeries& x, const TimeSeries& y, const WelchConfig& cfg = {});

/// |Sxy|^2 / (Sx Sy). Requires a shared grid and at least two sub-windows.
CmcSpectrum cmc(const Spectrum& sx, const Spectrum& sy, const CrossSpectrum& sxy,
                std::size_t subwindows);
CmcSpectrum cmc(const WelchResult& w);

template <typename S>
concept RealSpectrum = requires(const S& s) {
    { s.freqs } -> std::convertible_to<const std::vector<double>&>;
    { s.values } -> std::convertible_to<const std::vector<double>&>;
};

SpectrumStats trial_stats_impl(std::span<const std::vector<double>* const> freqs,
                               std::span<const std::vector<double>* const> values);

template <RealSpectrum S>
SpectrumStats trial_stats(std::span<const S> spectra) {
    std::vector<const std::vector<double>*> f;
    std::vector<const std::vector<double>*> v;
    f.reserve(spectra.size());
    v.reserve(spectra.size());
    for (const auto& s : spectra) {
        f.push_back(&s.freqs);
        v.push_back(&s.values);
    }
    return trial_stats_impl(f, v);
}

template <RealSpectrum S>
SpectrumStats trial_stats(const std::vector<S>& spectra) {
    return trial_stats(std::span<const S>(spectra));
}

/// Band summary of one CMC spectrum over bins with lo <= f < hi. Throws
/// InvalidArgument naming the band when it holds no bins.
std::vector<double> band_features(const CmcSpectrum& c, std::span<const BandDef> bands,
                                  FeatureStat stat = FeatureStat::mean);

/// Coherence level exceeded by chance with probability alpha for l sub-windows.
double confidence_level(std::size_t l, double alpha);

struct SegmentPair {
    std::span<const double> x;
    std::span<const double> y;
};

/// Per-pair CMC. Output order matches input order on both execution paths.
std::vector<CmcSpectrum> batch_cmc(std::span<const SegmentPair> pairs, double fs,
                                   const WelchConfig& cfg, Execution exec = Execution::parallel);

/// CSV with header freq_hz,mean,std.
std::string stats_csv(const SpectrumStats& stats);
void write_stats_csv(const std::filesystem::path& path, const SpectrumStats& stats);

}  // namespace cmc::spectral
