#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

namespace cwhom {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid parameters or configuration. The CLI maps this to exit code 2.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// FM lineshape whose modulation is too fast for the quasi-static g1 formula.
class AdiabaticApproximationError : public ConfigError {
public:
    using ConfigError::ConfigError;
};

/// Operation called with the wrong Lineshape alternative.
class WrongLineshapeError : public ConfigError {
public:
    using ConfigError::ConfigError;
};

class MetricUnavailableError : public Error {
public:
    using Error::Error;
};

class InsufficientSpanError : public Error {
public:
    using Error::Error;
};

class LengthMismatchError : public Error {
public:
    using Error::Error;
};

class SpecMismatchError : public Error {
public:
    using Error::Error;
};

class NormalizationError : public Error {
public:
    using Error::Error;
};

class TooFewSegmentsError : public Error {
public:
    using Error::Error;
};

class AmbiguousWidthError : public Error {
public:
    using Error::Error;
};

class FormatError : public Error {
public:
    using Error::Error;
};

/// Event stream that is not strictly increasing.
class UnsortedInputError : public Error {
public:
    UnsortedInputError(std::string stream, std::size_t index)
        : Error("stream " + stream + " is not strictly increasing at index " +
                std::to_string(index)),
          stream_(std::move(stream)),
          index_(index) {}

    const std::string& stream() const noexcept { return stream_; }
    std::size_t index() const noexcept { return index_; }

private:
    std::string stream_;
    std::size_t index_;
};

/// Fit that failed to converge. The CLI maps this to exit code 3.
class ConvergenceError : public Error {
public:
    using Error::Error;
};

/// Normal matrix is singular: some free parameter is not identifiable.
class RankDeficientError : public ConvergenceError {
public:
    using ConvergenceError::ConvergenceError;
};

}  // namespace cwhom
