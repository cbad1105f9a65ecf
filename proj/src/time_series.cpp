#include "cmc/time_series.hpp"

#include <cmath>

#include "cmc/error.hpp"

namespace cmc {

TimeSeries::TimeSeries(std::vector<double> samples, double fs, std::string label)
    : samples_(std::move(samples)), fs_(fs), label_(std::move(label)) {
    if (!(fs_ > 0.0) || !std::isfinite(fs_)) {
        throw InvalidArgument("TimeSeries '" + label_ + "': sampling rate must be positive");
    }
    if (samples_.empty()) {
        throw InvalidArgument("TimeSeries '" + label_ + "': no samples");
    }
    for (std::size_t i = 0; i < samples_.size(); ++i) {
        if (!std::isfinite(samples_[i])) {
            throw InvalidArgument("TimeSeries '" + label_ + "': non-finite sample at index " +
                                  std::to_string(i));
        }
    }
}

TimeSeries TimeSeries::slice(std::size_t first, std::size_t count) const {
    if (count == 0 || first > samples_.size() || count > samples_.size() - first) {
        throw OutOfBounds("TimeSeries '" + label_ + "': slice [" + std::to_string(first) + ", " +
                          std::to_string(first + count) + ") outside [0, " +
                          std::to_string(samples_.size()) + ")");
    }
    auto begin = samples_.begin() + static_cast<std::ptrdiff_t>(first);
    return TimeSeries(std::vector<double>(begin, begin + static_cast<std::ptrdiff_t>(count)), fs_,
                      label_);
}

TimeSeries TimeSeries::with_samples(std::vector<double> samples) const {
    return TimeSeries(std::move(samples), fs_, label_);
}

}  // namespace cmc
