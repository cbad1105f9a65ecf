#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace cmc {

/// One channel of a uniformly sampled signal.
///
/// Invariants (checked on construction): fs > 0, at least one sample, all
/// samples finite.
class TimeSeries {
public:
    TimeSeries(std::vector<double> samples, double fs, std::string label = {});

    std::span<const double> samples() const noexcept { return samples_; }
    double fs() const noexcept { return fs_; }
    const std::string& label() const noexcept { return label_; }
    std::size_t size() const noexcept { return samples_.size(); }
    double duration_s() const noexcept { return static_cast<double>(samples_.size()) / fs_; }

    double operator[](std::size_t i) const { return samples_[i]; }

    /// Copy of samples [first, first + count).
    TimeSeries slice(std::size_t first, std::size_t count) const;

    /// Same rate and label, new samples.
    TimeSeries with_samples(std::vector<double> samples) const;

    friend bool operator==(const TimeSeries&, const TimeSeries&) = default;

private:
    std::vector<double> samples_;
    double fs_;
    std::string label_;
};

}  // namespace cmc
