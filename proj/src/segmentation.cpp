#include "cmc/segmentation.hpp"

#include <algorithm>
#include <cmath>

#include "cmc/error.hpp"

namespace cmc::segmentation {

std::string to_string(Surface s) {
    switch (s) {
        case Surface::sandpaper: return "sandpaper";
        case Surface::suede: return "suede";
        case Surface::silk: return "silk";
    }
    return "unknown";
}

Surface parse_surface(const std::string& name) {
    if (name == "sandpaper") return Surface::sandpaper;
    if (name == "suede") return Surface::suede;
    if (name == "silk") return Surface::silk;
    throw InvalidArgument("unknown surface '" + name + "' (expected sandpaper, suede or silk)");
}

bool is_valid_weight(int weight_g) { return weight_g == 165 || weight_g == 330 || weight_g == 660; }

bool is_valid_duration(double dur_s) { return dur_s == 1.0 || dur_s == 2.0 || dur_s == 4.0; }

double compute_threshold(const TimeSeries& envelope) {
    const auto x = envelope.samples();
    const auto [lo, hi] = std::minmax_element(x.begin(), x.end());
    return (*hi - *lo) / 3.0 + *lo;
}

ActivationInterval find_activation(const TimeSeries& envelope, double th) {
    if (!std::isfinite(th)) throw InvalidArgument("find_activation: threshold must be finite");
    const auto x = envelope.samples();
    std::size_t best_first = 0;
    std::size_t best_len = 0;
    std::size_t i = 0;
    while (i < x.size()) {
        if (!(x[i] > th)) {
            ++i;
            continue;
        }
        const std::size_t first = i;
        while (i < x.size() && x[i] > th) ++i;
        if (i - first > best_len) {
            best_len = i - first;
            best_first = first;
        }
    }
    if (best_len == 0) {
        throw NoActivation("no sample of '" + envelope.label() + "' exceeds threshold " +
                           std::to_string(th));
    }
    ActivationInterval a;
    a.first = best_first;
    a.last = best_first + best_len - 1;
    a.threshold = th;
    a.t_start = static_cast<double>(a.first) / envelope.fs();
    a.t_end = static_cast<double>(a.last + 1) / envelope.fs();
    a.t0 = (a.t_start + a.t_end) / 2.0;
    return a;
}

TimeSeries envelope(const TimeSeries& emg, const sigcore::BandPassSpec& band) {
    return sigcore::moving_average(sigcore::rectify(sigcore::bandpass(emg, band)),
                                   kEnvelopeWindowS);
}

std::ptrdiff_t segment_start_index(double t0, double dur_s, double fs) {
    return static_cast<std::ptrdiff_t>(std::llround((t0 - dur_s / 2.0) * fs));
}

std::size_t segment_length(double dur_s, double fs) {
    return static_cast<std::size_t>(std::llround(dur_s * fs));
}

TrialSegment extract_segment(const TimeSeries& eeg, const TimeSeries& emg, double t0, double dur_s,
                             Condition condition, int trial_id) {
    if (eeg.fs() != emg.fs()) {
        throw RateMismatch("extract_segment: EEG at " + std::to_string(eeg.fs()) +
                           " Hz, EMG at " + std::to_string(emg.fs()) + " Hz");
    }
    if (!is_valid_duration(dur_s)) {
        throw InvalidArgument("extract_segment: duration must be 1, 2 or 4 s, got " +
                              std::to_string(dur_s));
    }
    const double fs = eeg.fs();
    const std::ptrdiff_t start = segment_start_index(t0, dur_s, fs);
    const std::size_t len = segment_length(dur_s, fs);
    const std::size_t avail = std::min(eeg.size(), emg.size());
    if (start < 0 || static_cast<std::size_t>(start) + len > avail) {
        throw OutOfBounds("extract_segment: trial " + std::to_string(trial_id) + " window [" +
                          std::to_string(t0 - dur_s / 2.0) + ", " +
                          std::to_string(t0 + dur_s / 2.0) + ") s exceeds recording of " +
                          std::to_string(static_cast<double>(avail) / fs) + " s");
    }
    const auto first = static_cast<std::size_t>(start);
    return TrialSegment{eeg.slice(first, len), emg.slice(first, len), dur_s, condition, trial_id,
                        first};
}

RobustScale robust_scale(std::vector<double> values) {
    if (values.empty()) return {};
    auto median_of = [](std::vector<double>& v) {
        const std::size_t mid = v.size() / 2;
        std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
        double m = v[mid];
        if (v.size() % 2 == 0) {
            m = (m + *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid))) / 2.0;
        }
        return m;
    };
    RobustScale r;
    r.median = median_of(values);
    for (double& v : values) v = std::fabs(v - r.median);
    r.sigma = 1.4826 * median_of(values);
    return r;
}

std::vector<TrialSegment> reject_artifacts(std::vector<TrialSegment> segments, double z_max,
                                           std::vector<int>* rejected_ids) {
    if (segments.empty() || std::isinf(z_max)) return segments;
    std::vector<double> pooled;
    for (const auto& s : segments) {
        pooled.insert(pooled.end(), s.eeg.samples().begin(), s.eeg.samples().end());
    }
    const RobustScale scale = robust_scale(std::move(pooled));
    if (!(scale.sigma > 0.0)) return segments;

    const double limit = z_max * scale.sigma;
    std::vector<TrialSegment> kept;
    kept.reserve(segments.size());
    for (auto& s : segments) {
        double peak = 0.0;
        for (double v : s.eeg.samples()) peak = std::max(peak, std::fabs(v - scale.median));
        if (peak > limit) {
            if (rejected_ids) rejected_ids->push_back(s.trial_id);
        } else {
            kept.push_back(std::move(s));
        }
    }
    return kept;
}

}  // namespace cmc::segmentation
