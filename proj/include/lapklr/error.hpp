#pragma once

#include <stdexcept>
#include <string>
#include <utility>

#include <Eigen/Dense>

namespace lapklr {

/// Base class for every error raised by the library. The CLI maps the
/// concrete subclasses onto process exit codes.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
    virtual int exit_code() const noexcept { return 1; }
};

/// Invalid configuration or argument (exit code 1).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Malformed or inconsistent input data (exit code 2).
class DataError : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return 2; }
};

/// Non-finite values or optimizer divergence (exit code 3).
class NumericalError : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return 3; }
};

/// Raised when the objective becomes non-finite during optimization.
/// Carries the last iterate at which the objective was still finite.
class DivergenceError : public NumericalError {
public:
    DivergenceError(const std::string& what, Eigen::VectorXd last_finite)
        : NumericalError(what), last_finite_(std::move(last_finite)) {}

    const Eigen::VectorXd& last_finite_iterate() const noexcept { return last_finite_; }

private:
    Eigen::VectorXd last_finite_;
};

}  // namespace lapklr
