#pragma once

#include <stdexcept>
#include <string>

namespace churn {

/// Base class for every error raised by the library. The CLI prints `what()`
/// as a one-line diagnostic.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed or unreadable input data (CSV, JSON documents).
class ParseError : public Error {
public:
    using Error::Error;
};

/// Data does not match what a plan or model expects.
class SchemaError : public Error {
public:
    using Error::Error;
};

/// Invalid arguments or configuration values.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Training produced a non-finite loss.
class DivergenceError : public Error {
public:
    DivergenceError(std::size_t epoch, const std::string& what)
        : Error(what), epoch_(epoch) {}

    std::size_t epoch() const noexcept { return epoch_; }

private:
    std::size_t epoch_;
};

/// Persisted document carries a format version this build cannot read.
class VersionError : public Error {
public:
    using Error::Error;
};

}  // namespace churn
