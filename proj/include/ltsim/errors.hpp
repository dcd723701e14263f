#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ltsim {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Structural or configuration problem in user-supplied inputs.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// A matrix that must be positive definite has an eigenvalue below the floor.
class NotPositiveDefiniteError : public ValidationError {
public:
    NotPositiveDefiniteError(const std::string& what, double eigenvalue)
        : ValidationError(what), eigenvalue_(eigenvalue) {}

    double eigenvalue() const noexcept { return eigenvalue_; }

private:
    double eigenvalue_;
};

/// Not enough observations to evaluate a statistic.
class InsufficientDataError : public Error {
public:
    using Error::Error;
};

/// Non-finite or degenerate intermediate value during simulation or estimation.
class NumericalFault : public Error {
public:
    NumericalFault(const std::string& what, std::size_t path, std::size_t step)
        : Error(what + " (path " + std::to_string(path) + ", step " + std::to_string(step) + ")"),
          reason_(what), path_(path), step_(step) {}
    explicit NumericalFault(const std::string& what) : Error(what), reason_(what) {}

    /// Message without the path/step annotation.
    const std::string& reason() const noexcept { return reason_; }
    std::size_t path() const noexcept { return path_; }
    std::size_t step() const noexcept { return step_; }

private:
    std::string reason_;
    std::size_t path_ = 0;
    std::size_t step_ = 0;
};

/// File could not be read or written.
class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace ltsim
