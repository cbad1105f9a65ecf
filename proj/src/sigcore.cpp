#include "cmc/sigcore.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "cmc/error.hpp"

namespace cmc::sigcore {

namespace {

using cplx = std::complex<double>;

struct SectionState {
    double z1 = 0.0;
    double z2 = 0.0;
};

// State that makes a section output its DC response for a constant input u.
SectionState steady_state(const Biquad& s, double u) {
    const double den = 1.0 + s.a1 + s.a2;
    const double y = den != 0.0 ? (s.b0 + s.b1 + s.b2) / den * u : 0.0;
    SectionState st;
    st.z2 = s.b2 * u - s.a2 * y;
    st.z1 = s.b1 * u - s.a1 * y + st.z2;
    return st;
}

double dc_gain(const Biquad& s) {
    const double den = 1.0 + s.a1 + s.a2;
    return den != 0.0 ? (s.b0 + s.b1 + s.b2) / den : 0.0;
}

void run_cascade(const std::vector<Biquad>& sections, std::vector<double>& data, bool steady_init) {
    if (data.empty()) return;
    double level = data.front();
    for (const auto& s : sections) {
        SectionState st = steady_init ? steady_state(s, level) : SectionState{};
        level *= dc_gain(s);
        for (double& v : data) {
            const double x = v;
            const double y = s.b0 * x + st.z1;
            st.z1 = s.b1 * x - s.a1 * y + st.z2;
            st.z2 = s.b2 * x - s.a2 * y;
            v = y;
        }
    }
}

}  // namespace

cplx IirFilter::response(double f_hz, double fs) const {
    const double w = 2.0 * std::numbers::pi * f_hz / fs;
    const cplx z1 = std::polar(1.0, -w);
    const cplx z2 = z1 * z1;
    cplx h{1.0, 0.0};
    for (const auto& s : sections_) {
        h *= (s.b0 + s.b1 * z1 + s.b2 * z2) / (1.0 + s.a1 * z1 + s.a2 * z2);
    }
    return h;
}

std::vector<double> IirFilter::filter(std::span<const double> x) const {
    std::vector<double> out(x.begin(), x.end());
    run_cascade(sections_, out, false);
    return out;
}

std::vector<double> IirFilter::filtfilt(std::span<const double> x, std::size_t pad) const {
    const std::size_t n = x.size();
    if (n == 0) return {};
    pad = std::min(pad, n - 1);

    std::vector<double> ext;
    ext.reserve(n + 2 * pad);
    for (std::size_t k = pad; k >= 1; --k) ext.push_back(2.0 * x[0] - x[k]);
    ext.insert(ext.end(), x.begin(), x.end());
    for (std::size_t k = 1; k <= pad; ++k) ext.push_back(2.0 * x[n - 1] - x[n - 1 - k]);

    run_cascade(sections_, ext, true);
    std::reverse(ext.begin(), ext.end());
    run_cascade(sections_, ext, true);
    std::reverse(ext.begin(), ext.end());

    return std::vector<double>(ext.begin() + static_cast<std::ptrdiff_t>(pad),
                               ext.begin() + static_cast<std::ptrdiff_t>(pad + n));
}

void validate(const BandPassSpec& spec, double fs) {
    if (!(fs > 0.0)) throw InvalidArgument("band-pass: sampling rate must be positive");
    if (spec.order <= 0 || spec.order % 2 != 0) {
        throw InvalidArgument("band-pass: order must be a positive even integer, got " +
                              std::to_string(spec.order));
    }
    if (!(spec.lo_hz > 0.0 && spec.lo_hz < spec.hi_hz && spec.hi_hz < fs / 2.0)) {
        throw InvalidArgument("band-pass: need 0 < lo < hi < fs/2, got lo=" +
                              std::to_string(spec.lo_hz) + " hi=" + std::to_string(spec.hi_hz) +
                              " fs=" + std::to_string(fs));
    }
}

IirFilter design_bandpass(const BandPassSpec& spec, double fs) {
    validate(spec, fs);
    const int n = spec.order / 2;  // low-pass prototype order
    const double pi = std::numbers::pi;
    const double fs2 = 2.0 * fs;

    // Pre-warped analog band edges.
    const double w_lo = fs2 * std::tan(pi * spec.lo_hz / fs);
    const double w_hi = fs2 * std::tan(pi * spec.hi_hz / fs);
    const double bw = w_hi - w_lo;
    const double w0_sq = w_lo * w_hi;

    // Butterworth prototype poles, then low-pass to band-pass.
    std::vector<cplx> analog_poles;
    for (int k = 1; k <= n; ++k) {
        const cplx p = std::polar(1.0, pi * (2.0 * k + n - 1.0) / (2.0 * n));
        const cplx half = p * bw / 2.0;
        const cplx root = std::sqrt(half * half - w0_sq);
        analog_poles.push_back(half + root);
        analog_poles.push_back(half - root);
    }

    // Bilinear transform. n zeros at s = 0 map to z = 1, the n at infinity to z = -1.
    std::vector<cplx> poles;
    cplx num{1.0, 0.0};
    cplx den{1.0, 0.0};
    for (const auto& p : analog_poles) {
        poles.push_back((fs2 + p) / (fs2 - p));
        den *= fs2 - p;
    }
    for (int k = 0; k < n; ++k) num *= fs2;
    const double gain = std::pow(bw, n) * (num / den).real();

    // Pair conjugates into sections, each with numerator 1 - z^-2.
    std::vector<cplx> upper;
    std::vector<double> real_poles;
    for (const auto& p : poles) {
        if (std::abs(p.imag()) <= 1e-12 * std::abs(p)) {
            real_poles.push_back(p.real());
        } else if (p.imag() > 0.0) {
            upper.push_back(p);
        }
    }
    std::sort(upper.begin(), upper.end(),
              [](const cplx& a, const cplx& b) { return std::abs(a) < std::abs(b); });
    std::sort(real_poles.begin(), real_poles.end());

    std::vector<Biquad> sections;
    for (const auto& p : upper) {
        sections.push_back({1.0, 0.0, -1.0, -2.0 * p.real(), std::norm(p)});
    }
    for (std::size_t i = 0; i + 1 < real_poles.size(); i += 2) {
        const double p1 = real_poles[i];
        const double p2 = real_poles[i + 1];
        sections.push_back({1.0, 0.0, -1.0, -(p1 + p2), p1 * p2});
    }
    if (static_cast<int>(sections.size()) != n) {
        throw Error("band-pass design: could not pair poles into second-order sections");
    }

    const double per_section = std::pow(std::abs(gain), 1.0 / n);
    for (auto& s : sections) {
        s.b0 *= per_section;
        s.b1 *= per_section;
        s.b2 *= per_section;
    }
    if (gain < 0.0) {
        sections.front().b0 = -sections.front().b0;
        sections.front().b1 = -sections.front().b1;
        sections.front().b2 = -sections.front().b2;
    }
    return IirFilter(std::move(sections));
}

std::size_t edge_padding(const BandPassSpec& spec) {
    return 3 * static_cast<std::size_t>(std::max(spec.order, 0));
}

TimeSeries bandpass(const TimeSeries& ts, const BandPassSpec& spec) {
    const IirFilter filter = design_bandpass(spec, ts.fs());
    const std::size_t pad = edge_padding(spec);
    if (ts.size() < pad) {
        throw InvalidArgument("band-pass: series '" + ts.label() + "' has " +
                              std::to_string(ts.size()) + " samples, need at least " +
                              std::to_string(pad) + " (3 x order)");
    }
    return ts.with_samples(filter.filtfilt(ts.samples(), pad));
}

double zero_phase_power_gain(const BandPassSpec& spec, double fs, double f_hz) {
    const double mag_sq = std::norm(design_bandpass(spec, fs).response(f_hz, fs));
    return mag_sq * mag_sq;
}

double center_frequency(const BandPassSpec& spec, double fs) {
    validate(spec, fs);
    const double pi = std::numbers::pi;
    const double t = std::sqrt(std::tan(pi * spec.lo_hz / fs) * std::tan(pi * spec.hi_hz / fs));
    return fs / pi * std::atan(t);
}

TimeSeries rectify(const TimeSeries& ts) {
    std::vector<double> out(ts.samples().begin(), ts.samples().end());
    for (double& v : out) v = std::fabs(v);
    return ts.with_samples(std::move(out));
}

std::size_t window_samples(double window_s, double fs) {
    if (!(window_s > 0.0) || !std::isfinite(window_s)) {
        throw InvalidArgument("moving average: window must be positive, got " +
                              std::to_string(window_s) + " s");
    }
    const double w = std::round(window_s * fs);
    if (w < 1.0) {
        throw InvalidArgument("moving average: window of " + std::to_string(window_s) +
                              " s is shorter than one sample at fs=" + std::to_string(fs));
    }
    return static_cast<std::size_t>(w);
}

TimeSeries moving_average(const TimeSeries& ts, double window_s) {
    const std::size_t w = window_samples(window_s, ts.fs());
    const auto x = ts.samples();
    const std::size_t n = x.size();
    const std::size_t before = w / 2;
    const std::size_t after = w - 1 - before;
    const auto [lo_it, hi_it] = std::minmax_element(x.begin(), x.end());
    const double lo = *lo_it;
    const double hi = *hi_it;

    // Averages offsets from the first sample of each window, so constant
    // stretches reproduce their value exactly.
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t first = i >= before ? i - before : 0;
        const std::size_t last = std::min(n - 1, i + after);
        const double ref = x[first];
        double acc = 0.0;
        for (std::size_t k = first; k <= last; ++k) acc += x[k] - ref;
        const double mean = ref + acc / static_cast<double>(last - first + 1);
        out[i] = std::clamp(mean, lo, hi);
    }
    return ts.with_samples(std::move(out));
}

}  // namespace cmc::sigcore
