#pragma once

#include <stdexcept>
#include <string>

namespace pinv {

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid input: mismatched grids, out-of-range parameters, malformed files.
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// A numerical procedure failed to reach its target (solver stall, NaN, censoring).
class NumericalError : public Error {
public:
    NumericalError(const std::string& what, double residual = 0.0)
        : Error(what), residual_(residual) {}

    double residual() const noexcept { return residual_; }

private:
    double residual_;
};

/// Configuration could not be parsed or failed validation.
class ConfigError : public Error {
public:
    ConfigError(std::string field, const std::string& message)
        : Error(field + ": " + message), field_(std::move(field)) {}

    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

}  // namespace pinv
