#include "cmc/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "cmc/fft.hpp"
#include "cmc/io.hpp"

namespace cmc::spectral {

namespace {

std::vector<double> grid(std::size_t nfft, double fs) {
    std::vector<double> f(nfft / 2 + 1);
    for (std::size_t k = 0; k < f.size(); ++k) {
        f[k] = static_cast<double>(k) * fs / static_cast<double>(nfft);
    }
    return f;
}

// One-sided weight: interior bins carry both positive and negative frequencies.
double side_weight(std::size_t k, std::size_t nfft) {
    return (k == 0 || k == nfft / 2) ? 1.0 : 2.0;
}

void check_same_grid(const std::vector<double>& a, const std::vector<double>& b, const char* what) {
    if (a != b) throw GridMismatch(std::string("cmc: frequency grids differ (") + what + ")");
}

}  // namespace

const std::array<BandDef, kBandCount>& default_bands() {
    static const std::array<BandDef, kBandCount> bands{{
        {"low_alpha", 6.0, 8.0},
        {"alpha", 8.0, 12.0},
        {"low_beta", 13.0, 20.0},
        {"high_beta", 20.0, 30.0},
        {"beta", 13.0, 30.0},
        {"low_gamma", 30.0, 60.0},
        {"high_gamma", 60.0, 80.0},
        {"gamma", 30.0, 80.0},
    }};
    return bands;
}

std::vector<double> taper(Taper kind, std::size_t n) {
    std::vector<double> w(n, 1.0);
    if (kind == Taper::hann) {
        // Periodic Hann, the usual choice for spectral averaging.
        for (std::size_t i = 0; i < n; ++i) {
            w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) /
                                        static_cast<double>(n));
        }
    }
    return w;
}

std::size_t subwindow_count(std::size_t n, std::size_t win, std::size_t step) {
    if (win == 0 || step == 0 || n < win) return 0;
    return (n - win) / step + 1;
}

Spectrum periodogram(std::span<const double> x, double fs, Taper kind, std::size_t nfft) {
    const auto w = taper(kind, x.size());
    std::vector<double> xt(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) xt[i] = x[i] * w[i];
    const auto bins = fft::real_forward(xt, nfft);
    Spectrum s{grid(nfft, fs), std::vector<double>(bins.size())};
    for (std::size_t k = 0; k < bins.size(); ++k) {
        s.values[k] = side_weight(k, nfft) * std::norm(bins[k]) / static_cast<double>(nfft);
    }
    return s;
}

WelchResult welch_spectra(std::span<const double> x, std::span<const double> y, double fs,
                          const WelchConfig& cfg) {
    if (x.size() != y.size()) {
        throw InvalidArgument("welch: segments differ in length (" + std::to_string(x.size()) +
                              " vs " + std::to_string(y.size()) + ")");
    }
    if (!(fs > 0.0)) throw InvalidArgument("welch: sampling rate must be positive");
    if (!(cfg.overlap >= 0.0 && cfg.overlap < 1.0)) {
        throw InvalidArgument("welch: overlap must lie in [0, 1)");
    }
    const double win_samples = std::round(cfg.window_s * fs);
    if (!(win_samples >= 2.0)) {
        throw InvalidArgument("welch: sub-window must span at least 2 samples");
    }
    const auto win = static_cast<std::size_t>(win_samples);
    const auto step =
        std::max<std::size_t>(1, static_cast<std::size_t>(std::round(win_samples * (1.0 - cfg.overlap))));
    const std::size_t l = subwindow_count(x.size(), win, step);
    if (l == 0) {
        throw InvalidArgument("welch: segment of " + std::to_string(x.size()) +
                              " samples is shorter than one sub-window of " + std::to_string(win));
    }
    const std::size_t nfft = fft::next_power_of_two(win);
    const std::size_t nbins = nfft / 2 + 1;
    const auto w = taper(cfg.taper, win);
    double w_energy = 0.0;
    for (double v : w) w_energy += v * v;

    std::vector<double> sxx(nbins, 0.0);
    std::vector<double> syy(nbins, 0.0);
    std::vector<std::complex<double>> sxy(nbins, {0.0, 0.0});
    std::vector<double> bx(win);
    std::vector<double> by(win);

    for (std::size_t j = 0; j < l; ++j) {
        const std::size_t off = j * step;
        double mx = 0.0;
        double my = 0.0;
        if (cfg.detrend) {
            for (std::size_t i = 0; i < win; ++i) {
                mx += x[off + i];
                my += y[off + i];
            }
            mx /= static_cast<double>(win);
            my /= static_cast<double>(win);
        }
        for (std::size_t i = 0; i < win; ++i) {
            bx[i] = (x[off + i] - mx) * w[i];
            by[i] = (y[off + i] - my) * w[i];
        }
        const auto fx = fft::real_forward(bx, nfft);
        const auto fy = fft::real_forward(by, nfft);
        for (std::size_t k = 0; k < nbins; ++k) {
            sxx[k] += std::norm(fx[k]);
            syy[k] += std::norm(fy[k]);
            sxy[k] += fx[k] * std::conj(fy[k]);
        }
    }

    WelchResult r;
    r.subwindows = l;
    r.window_len = win;
    r.nfft = nfft;
    const auto f = grid(nfft, fs);
    r.sx = {f, std::vector<double>(nbins)};
    r.sy = {f, std::vector<double>(nbins)};
    r.sxy = {f, std::vector<std::complex<double>>(nbins)};
    const double norm = static_cast<double>(l) * fs * w_energy;
    for (std::size_t k = 0; k < nbins; ++k) {
        const double scale = side_weight(k, nfft) / norm;
        r.sx.values[k] = sxx[k] * scale;
        r.sy.values[k] = syy[k] * scale;
        r.sxy.values[k] = sxy[k] * scale;
    }
    return r;
}

WelchResult welch_spectra(const TimeSeries& x, const TimeSeries& y, const WelchConfig& cfg) {
    if (x.fs() != y.fs()) {
        throw RateMismatch("welch: sampling rates differ (" + std::to_string(x.fs()) + " vs " +
                           std::to_string(y.fs()) + ")");
    }
    return welch_spectra(x.samples(), y.samples(), x.fs(), cfg);
}

CmcSpectrum cmc(const Spectrum& sx, const Spectrum& sy, const CrossSpectrum& sxy,
                std::size_t subwindows) {
    check_same_grid(sx.freqs, sy.freqs, "Sx vs Sy");
    check_same_grid(sx.freqs, sxy.freqs, "Sx vs Sxy");
    if (sx.values.size() != sx.freqs.size() || sy.values.size() != sx.freqs.size() ||
        sxy.values.size() != sx.freqs.size()) {
        throw GridMismatch("cmc: value arrays do not match the frequency grid");
    }
    if (subwindows < 2) {
        throw InvalidArgument("cmc: need at least 2 averaged sub-windows, got " +
                              std::to_string(subwindows) +
                              " (a single periodogram has coherence 1 everywhere)");
    }
    CmcSpectrum c{sx.freqs, std::vector<double>(sx.freqs.size(), 0.0)};
    for (std::size_t k = 0; k < c.values.size(); ++k) {
        const double den = sx.values[k] * sy.values[k];
        c.values[k] = den > 0.0 ? std::norm(sxy.values[k]) / den : 0.0;
    }
    return c;
}

CmcSpectrum cmc(const WelchResult& w) { return cmc(w.sx, w.sy, w.sxy, w.subwindows); }

SpectrumStats trial_stats_impl(std::span<const std::vector<double>* const> freqs,
                               std::span<const std::vector<double>* const> values) {
    if (values.empty()) throw InvalidArgument("trial_stats: no spectra");
    const auto& f0 = *freqs.front();
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (*freqs[i] != f0 || values[i]->size() != f0.size()) {
            throw GridMismatch("trial_stats: spectrum " + std::to_string(i) +
                               " is on a different frequency grid");
        }
    }
    const std::size_t nb = f0.size();
    const auto n = static_cast<double>(values.size());
    SpectrumStats s{f0, std::vector<double>(nb, 0.0), std::vector<double>(nb, 0.0), values.size()};
    for (const auto* v : values) {
        for (std::size_t k = 0; k < nb; ++k) s.mean[k] += (*v)[k];
    }
    for (double& m : s.mean) m /= n;
    for (const auto* v : values) {
        for (std::size_t k = 0; k < nb; ++k) {
            const double d = (*v)[k] - s.mean[k];
            s.std[k] += d * d;
        }
    }
    for (double& sd : s.std) sd = std::sqrt(sd / n);
    return s;
}

std::vector<double> band_features(const CmcSpectrum& c, std::span<const BandDef> bands,
                                  FeatureStat stat) {
    std::vector<double> out;
    out.reserve(bands.size());
    for (const auto& band : bands) {
        double acc = 0.0;
        double best = 0.0;
        std::size_t count = 0;
        for (std::size_t k = 0; k < c.freqs.size(); ++k) {
            if (c.freqs[k] >= band.lo_hz && c.freqs[k] < band.hi_hz) {
                acc += c.values[k];
                best = count == 0 ? c.values[k] : std::max(best, c.values[k]);
                ++count;
            }
        }
        if (count == 0) {
            throw InvalidArgument("band_features: band '" + band.name + "' [" +
                                  io::format_double(band.lo_hz) + ", " +
                                  io::format_double(band.hi_hz) +
                                  ") Hz contains no frequency bins; use a finer FFT grid");
        }
        out.push_back(stat == FeatureStat::mean ? acc / static_cast<double>(count) : best);
    }
    return out;
}

double confidence_level(std::size_t l, double alpha) {
    if (l < 2) throw InvalidArgument("confidence_level: need l >= 2");
    if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidArgument("confidence_level: need 0 < alpha < 1");
    return 1.0 - std::pow(alpha, 1.0 / static_cast<double>(l - 1));
}

std::vector<CmcSpectrum> batch_cmc(std::span<const SegmentPair> pairs, double fs,
                                   const WelchConfig& cfg, Execution exec) {
    std::vector<CmcSpectrum> out(pairs.size());
    for_each_index(pairs.size(), exec, [&](std::size_t i) {
        out[i] = cmc(welch_spectra(pairs[i].x, pairs[i].y, fs, cfg));
    });
    return out;
}

std::string stats_csv(const SpectrumStats& stats) {
    std::ostringstream os;
    os << "freq_hz,mean,std\n";
    for (std::size_t k = 0; k < stats.freqs.size(); ++k) {
        os << io::format_double(stats.freqs[k]) << ',' << io::format_double(stats.mean[k]) << ','
           << io::format_double(stats.std[k]) << '\n';
    }
    return os.str();
}

void write_stats_csv(const std::filesystem::path& path, const SpectrumStats& stats) {
    io::write_file_atomic(path, stats_csv(stats));
}

}  // namespace cmc::spectral
