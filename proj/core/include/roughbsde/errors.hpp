#pragma once

#include <stdexcept>
#include <string>

namespace rbsde {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Path knots are not strictly increasing, too few, or otherwise malformed.
class InvalidPathError : public Error {
public:
    using Error::Error;
};

/// A requested sub-sampling is finer than the source grid.
class ResolutionError : public Error {
public:
    using Error::Error;
};

/// Requested configuration lies outside what the library implements (p >= 3, d != 2, ...).
class UnsupportedError : public Error {
public:
    using Error::Error;
};

/// Fixed-step integration failed its half-step self-consistency check.
class AccuracyError : public Error {
public:
    using Error::Error;
};

/// Argument outside the tabulated or admissible domain.
class DomainError : public Error {
public:
    using Error::Error;
};

/// Iterative method did not converge.
class NumericError : public Error {
public:
    using Error::Error;
};

/// Explicit part of an IMEX step violates its stability bound.
class StabilityError : public Error {
public:
    StabilityError(const std::string& what, double required_dt)
        : Error(what), required_dt_(required_dt) {}

    double required_dt() const noexcept { return required_dt_; }

private:
    double required_dt_;
};

/// Comparison constants overflowed so that no admissible window can be derived.
class DegenerateWindowError : public Error {
public:
    DegenerateWindowError(const std::string& what, std::string constant)
        : Error(what), constant_(std::move(constant)) {}

    const std::string& constant() const noexcept { return constant_; }

private:
    std::string constant_;
};

/// Experiment configuration failed schema validation. `field()` is a dotted path.
class ConfigError : public Error {
public:
    ConfigError(std::string field, const std::string& message)
        : Error(field + ": " + message), field_(std::move(field)) {}

    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

}  // namespace rbsde
