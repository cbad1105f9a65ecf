#include "cmc/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "cmc/error.hpp"
#include "cmc/ingest.hpp"

namespace cmc::synth {

using rng::gaussian;
using rng::make_stream;

void validate(const CouplingModel& m) {
    if (!(m.noise_var >= 0.0) || !std::isfinite(m.noise_var)) {
        throw InvalidArgument("coupling model: noise variance must be finite and >= 0");
    }
    if (!std::isfinite(m.gain)) throw InvalidArgument("coupling model: gain must be finite");
    sigcore::validate(m.band(), m.fs);
}

std::vector<double> couple(const CouplingModel& m, std::span<const double> x,
                           std::uint64_t noise_stream) {
    validate(m);
    const auto spec = m.band();
    const auto h = sigcore::design_bandpass(spec, m.fs).filtfilt(x, sigcore::edge_padding(spec));
    auto rng = make_stream(m.seed, noise_stream);
    const auto w = gaussian(rng, x.size());
    const double sd = std::sqrt(m.noise_var);
    std::vector<double> y(x.size());
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = m.gain * h[i] + sd * w[i];
    return y;
}

std::pair<TimeSeries, TimeSeries> generate_pair(const CouplingModel& m, std::size_t n) {
    validate(m);
    if (static_cast<double>(n) < m.fs) {
        throw InvalidArgument("generate_pair: need at least one second of samples (" +
                              std::to_string(static_cast<std::size_t>(m.fs)) + "), got " +
                              std::to_string(n));
    }
    auto rng = make_stream(m.seed, 0);
    auto x = gaussian(rng, n);
    auto y = couple(m, x, 1);
    return {TimeSeries(std::move(x), m.fs, "x"), TimeSeries(std::move(y), m.fs, "y")};
}

std::vector<double> theoretical_coherence(const CouplingModel& m, std::span<const double> freqs) {
    validate(m);
    const auto filter = sigcore::design_bandpass(m.band(), m.fs);
    std::vector<double> out(freqs.size());
    for (std::size_t k = 0; k < freqs.size(); ++k) {
        const double mag_sq = std::norm(filter.response(freqs[k], m.fs));
        const double signal = m.gain * m.gain * mag_sq * mag_sq;
        const double total = signal + m.noise_var;
        out[k] = total > 0.0 ? signal / total : 0.0;
    }
    return out;
}

double noise_var_for_coherence(const CouplingModel& m, double f_hz, double target) {
    if (!(target > 0.0 && target <= 1.0)) {
        throw InvalidArgument("noise_var_for_coherence: target must lie in (0, 1]");
    }
    const double g = sigcore::zero_phase_power_gain(m.band(), m.fs, f_hz);
    return m.gain * m.gain * g * (1.0 - target) / target;
}

CouplingModel for_trial(const CouplingModel& m, std::uint64_t trial_id) {
    CouplingModel t = m;
    t.seed = m.seed ^ trial_id;
    return t;
}

std::vector<std::pair<TimeSeries, TimeSeries>> generate_trials(const CouplingModel& m,
                                                               std::size_t n, std::size_t count,
                                                               Execution exec) {
    validate(m);
    std::vector<std::pair<TimeSeries, TimeSeries>> out;
    out.reserve(count);
    // TimeSeries has no empty state, so fill placeholders then overwrite by index.
    for (std::size_t i = 0; i < count; ++i) {
        out.emplace_back(TimeSeries({0.0}, m.fs), TimeSeries({0.0}, m.fs));
    }
    for_each_index(count, exec, [&](std::size_t i) { out[i] = generate_pair(for_trial(m, i), n); });
    return out;
}

namespace {

double trapezoid(double t, double on, double off, double ramp, double base) {
    if (t <= on || t >= off) return base;
    const double up = std::min(1.0, (t - on) / ramp);
    const double down = std::min(1.0, (off - t) / ramp);
    return base + (1.0 - base) * std::min(up, down);
}

}  // namespace

std::size_t write_dataset(const DatasetSpec& spec, const std::filesystem::path& dir) {
    if (spec.trials_per_class == 0) throw InvalidArgument("synthetic dataset: no trials requested");
    if (!(spec.activation_start_s - spec.onset_jitter_s > 0.0 &&
          spec.activation_end_s + spec.onset_jitter_s < spec.trial_s)) {
        throw InvalidArgument("synthetic dataset: activation must lie inside the trial window");
    }
    const auto trial_n = static_cast<std::size_t>(std::llround(spec.trial_s * spec.fs));
    const std::size_t n_trials = 2 * spec.trials_per_class;
    const auto& muscles = spec.muscles;
    if (muscles.empty()) throw InvalidArgument("synthetic dataset: no EMG channels requested");
    const std::size_t n_eeg = 1 + spec.extra_eeg_channels;
    const std::size_t n_ch = n_eeg + muscles.size();

    const sigcore::BandPassSpec band{spec.coupling_lo_hz, spec.coupling_hi_hz, 4};
    sigcore::validate(band, spec.fs);
    for (double g : {spec.coherence_a, spec.coherence_b}) {
        if (!(g > 0.0 && g <= 1.0)) throw InvalidArgument("synthetic dataset: coherence must lie in (0, 1]");
    }
    const auto filter = sigcore::design_bandpass(band, spec.fs);
    const std::size_t pad = sigcore::edge_padding(band);
    // Drive = H x + sqrt(r) H w keeps its coherence with x at g = 1 / (1 + r)
    // over the whole band.
    const double ratio_a = (1.0 - spec.coherence_a) / spec.coherence_a;
    const double ratio_b = (1.0 - spec.coherence_b) / spec.coherence_b;

    std::vector<std::vector<float>> channels(n_ch, std::vector<float>(trial_n * n_trials));
    for_each_index(n_trials, Execution::parallel, [&](std::size_t i) {
        const bool class_b = i % 2 == 1;
        // Mixed first so that neighbouring dataset seeds share no trial seeds.
        const std::uint64_t trial_seed = rng::splitmix64(spec.seed) ^ static_cast<std::uint64_t>(i + 1);
        const double noise_sd = std::sqrt(class_b ? ratio_b : ratio_a);

        const std::size_t off = i * trial_n;
        auto eeg_rng = make_stream(trial_seed, 0);
        const auto x = gaussian(eeg_rng, trial_n);
        for (std::size_t k = 0; k < trial_n; ++k) channels[0][off + k] = static_cast<float>(x[k]);
        for (std::size_t e = 1; e < n_eeg; ++e) {
            auto rng = make_stream(trial_seed, 1000 + e);
            const auto noise = gaussian(rng, trial_n);
            for (std::size_t k = 0; k < trial_n; ++k) channels[e][off + k] = static_cast<float>(noise[k]);
        }
        for (std::size_t mu = 0; mu < muscles.size(); ++mu) {
            const auto hx = filter.filtfilt(x, pad);
            auto w_rng = make_stream(trial_seed, 1 + mu);
            const auto hw = filter.filtfilt(gaussian(w_rng, trial_n), pad);
            std::vector<double> drive(trial_n);
            for (std::size_t k = 0; k < trial_n; ++k) drive[k] = hx[k] + noise_sd * hw[k];
            double ss = 0.0;
            for (double v : drive) ss += v * v;
            const double sd = std::sqrt(ss / static_cast<double>(drive.size()));
            auto jitter_rng = make_stream(trial_seed, 100 + mu);
            const auto j = gaussian(jitter_rng, 2);
            const double on = spec.activation_start_s + spec.onset_jitter_s * std::tanh(j[0]);
            const double off_t = spec.activation_end_s + spec.onset_jitter_s * std::tanh(j[1]);
            auto carrier_rng = make_stream(trial_seed, 10 + mu);
            const auto carrier = gaussian(carrier_rng, trial_n);
            for (std::size_t k = 0; k < trial_n; ++k) {
                const double t = static_cast<double>(k) / spec.fs;
                const double env = trapezoid(t, on, off_t, 0.15, 0.05);
                const double amp = std::max(0.0, 1.0 + spec.modulation_depth * drive[k] / sd);
                channels[n_eeg + mu][off + k] = static_cast<float>(env * amp * carrier[k]);
            }
        }
    });

    ingest::DatasetManifest man;
    man.subject = spec.subject;
    man.fs = spec.fs;
    man.eeg_channels.push_back("C3");
    for (std::size_t e = 1; e < n_eeg; ++e) man.eeg_channels.push_back("EEG" + std::to_string(e));
    man.emg_channels = muscles;
    man.profile = (n_eeg == ingest::kWayEegChannels && muscles.size() == ingest::kWayEmgChannels &&
                   spec.fs == ingest::kWayFs)
                      ? ingest::kWayEegGalProfile
                      : "synthetic";
    man.recordings.push_back({"series1", "series1.bin"});
    for (std::size_t i = 0; i < n_trials; ++i) {
        ingest::TrialInfo t;
        t.trial_id = static_cast<int>(i + 1);
        t.recording = "series1";
        t.start_s = static_cast<double>(i * trial_n) / spec.fs;
        t.end_s = static_cast<double>((i + 1) * trial_n) / spec.fs;
        const bool class_b = i % 2 == 1;
        if (spec.weight_task) {
            t.condition = {class_b ? 660 : 165, segmentation::Surface::suede};
        } else {
            t.condition = {330, class_b ? segmentation::Surface::silk : segmentation::Surface::sandpaper};
        }
        man.trials.push_back(t);
    }
    ingest::write_recording(dir / "series1.bin", channels);
    ingest::write_manifest(dir, man);
    return n_trials;
}

}  // namespace cmc::synth
