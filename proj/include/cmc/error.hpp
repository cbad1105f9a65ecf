#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace cmc {

/// Base class for every error raised by the toolkit.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A precondition on an argument was violated.
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// No envelope sample exceeded the activation threshold.
class NoActivation : public Error {
public:
    using Error::Error;
};

/// A requested window extends past the end of a recording.
class OutOfBounds : public Error {
public:
    using Error::Error;
};

/// Two series that must share a sampling rate do not.
class RateMismatch : public Error {
public:
    using Error::Error;
};

/// Two spectra that must share a frequency grid do not.
class GridMismatch : public Error {
public:
    using Error::Error;
};

/// File system or format failure, always carrying the offending path.
class IoError : public Error {
public:
    using Error::Error;
};

/// Dataset validation failed. Carries every problem found, not just the first.
class ValidationError : public Error {
public:
    explicit ValidationError(std::vector<std::string> problems);

    const std::vector<std::string>& problems() const noexcept { return problems_; }

private:
    std::vector<std::string> problems_;
};

/// A cross-validation cell had fewer trials per class than folds.
class InsufficientData : public Error {
public:
    using Error::Error;
};

}  // namespace cmc
