#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <span>
#include <utility>
#include <vector>

#include "cmc/parallel.hpp"
#include "cmc/random.hpp"
#include "cmc/sigcore.hpp"
#include "cmc/time_series.hpp"

namespace cmc::synth {

/// y = gain * (H * x) + w with x ~ N(0, 1) white, w ~ N(0, noise_var) white
/// and H the zero-phase band-pass over the coupling band.
struct CouplingModel {
    double gain = 1.0;
    double band_lo_hz = 13.0;
    double band_hi_hz = 30.0;
    double noise_var = 1.0;
    double fs = 500.0;
    std::uint64_t seed = 1;
    int filter_order = 4;

    sigcore::BandPassSpec band() const { return {band_lo_hz, band_hi_hz, filter_order}; }
};

/// Throws InvalidArgument for negative noise variance or an invalid band.
void validate(const CouplingModel& m);

/// x: unit-variance white noise, label "x"; y: coupled output, label "y".
/// Requires n >= fs.
std::pair<TimeSeries, TimeSeries> generate_pair(const CouplingModel& m, std::size_t n);

/// y for a given driver x, drawing the noise from `noise_stream` of m.seed.
std::vector<double> couple(const CouplingModel& m, std::span<const double> x,
                           std::uint64_t noise_stream);

/// gamma^2(f) = g^2 G(f) / (g^2 G(f) + noise_var), G the power gain of the
/// zero-phase coupling filter. 0/0 is 0.
std::vector<double> theoretical_coherence(const CouplingModel& m, std::span<const double> freqs);

/// Noise variance giving theoretical coherence `target` at f_hz.
double noise_var_for_coherence(const CouplingModel& m, double f_hz, double target);

/// Per-trial model: same parameters, seed derived as seed ^ trial_id.
CouplingModel for_trial(const CouplingModel& m, std::uint64_t trial_id);

/// `count` independent pairs of n samples, trial i using for_trial(m, i).
std::vector<std::pair<TimeSeries, TimeSeries>> generate_trials(const CouplingModel& m,
                                                               std::size_t n, std::size_t count,
                                                               Execution exec = Execution::parallel);

/// Two-condition grasp dataset written in the canonical on-disk format.
///
/// Each trial holds a rest / trapezoidal activation / rest envelope per
/// muscle. The EMG is white carrier noise whose amplitude follows
/// envelope * (1 + depth * drive), so that rectification exposes the drive.
/// The drive is H x + sqrt(r) H w with x the C3 channel, w independent
/// noise and H the coupling band-pass; its coherence with C3 is the class
/// value 1 / (1 + r) at every frequency of the band.
struct DatasetSpec {
    std::string subject = "synthetic";
    double fs = 500.0;
    std::size_t trials_per_class = 40;
    double trial_s = 7.0;
    double activation_start_s = 1.8;
    double activation_end_s = 4.8;
    double onset_jitter_s = 0.2;
    double modulation_depth = 0.5;
    double coupling_lo_hz = 13.0;
    double coupling_hi_hz = 30.0;
    double coherence_a = 0.2;  ///< drive-to-EEG coherence inside the band, class A
    double coherence_b = 0.7;  ///< same, class B
    bool weight_task = true;   ///< classes are light/heavy, otherwise sandpaper/silk
    std::size_t extra_eeg_channels = 0;
    std::vector<std::string> muscles{"AD", "BR", "FD", "CED", "FDI"};
    std::uint64_t seed = 7;
};

/// Writes manifest.json and recording binaries under dir. Returns the
/// number of trials written.
std::size_t write_dataset(const DatasetSpec& spec, const std::filesystem::path& dir);

}  // namespace cmc::synth
