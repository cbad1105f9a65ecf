#pragma once

#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "cmc/sigcore.hpp"
#include "cmc/time_series.hpp"

namespace cmc::segmentation {

enum class Surface { sandpaper, suede, silk };

std::string to_string(Surface s);
/// Throws InvalidArgument on unknown names.
Surface parse_surface(const std::string& name);

/// Grasp condition of one trial. Weight is one of 165, 330, 660 g.
struct Condition {
    int weight_g = 165;
    Surface surface = Surface::silk;

    friend bool operator==(const Condition&, const Condition&) = default;
};

bool is_valid_weight(int weight_g);

/// Half-open activation run [t_start, t_end) in seconds from the start of
/// the analysed envelope; t0 is its midpoint.
struct ActivationInterval {
    double t_start = 0.0;
    double t_end = 0.0;
    double t0 = 0.0;
    double threshold = 0.0;
    std::size_t first = 0;  ///< first sample above threshold
    std::size_t last = 0;   ///< last sample above threshold (inclusive)
};

/// Fixed-duration, time-aligned EEG/EMG windows of one trial and one muscle.
struct TrialSegment {
    TimeSeries eeg;
    TimeSeries emg;
    double dur_s;
    Condition condition;
    int trial_id;
    std::size_t start_index;  ///< first sample in the source recording
};

inline constexpr double kEnvelopeWindowS = 0.400;
inline constexpr double kDefaultZMax = 5.0;

bool is_valid_duration(double dur_s);

/// (max - min) / 3 + min over the whole envelope.
double compute_threshold(const TimeSeries& envelope);

/// Longest maximal run of samples strictly above `th` (ties: earliest).
/// Throws NoActivation when no sample exceeds th.
ActivationInterval find_activation(const TimeSeries& envelope, double th);

/// Activation profile: moving_average(rectify(bandpass(emg)), 400 ms).
TimeSeries envelope(const TimeSeries& emg, const sigcore::BandPassSpec& band);

/// Sample index where a window of dur_s centred at t0 starts.
std::ptrdiff_t segment_start_index(double t0, double dur_s, double fs);
std::size_t segment_length(double dur_s, double fs);

/// Cuts round(dur_s fs) samples starting at round((t0 - dur_s/2) fs) from
/// both series. Throws RateMismatch, OutOfBounds, or InvalidArgument for a
/// duration outside {1, 2, 4} s.
TrialSegment extract_segment(const TimeSeries& eeg, const TimeSeries& emg, double t0, double dur_s,
                             Condition condition = {}, int trial_id = 0);

/// Robust scale of a sample population: median absolute deviation x 1.4826.
struct RobustScale {
    double median = 0.0;
    double sigma = 0.0;
};
RobustScale robust_scale(std::vector<double> values);

/// Drops segments whose EEG peak |x - median| exceeds z_max robust standard
/// deviations of the pooled EEG samples. Zero dispersion rejects nothing.
/// Relative order of survivors is preserved.
std::vector<TrialSegment> reject_artifacts(std::vector<TrialSegment> segments, double z_max,
                                           std::vector<int>* rejected_ids = nullptr);

}  // namespace cmc::segmentation
