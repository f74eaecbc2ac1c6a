#pragma once

#include <stdexcept>
#include <string>

namespace survproc {

/// Bad model configuration, parameter file, or run options.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Malformed or inconsistent input data (CSV rows, record tables).
struct DataError : std::runtime_error {
    explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

/// Numerical failure: quadrature non-convergence, non-PD covariance, NaN.
/// `achieved` carries the tolerance actually reached when that is meaningful.
struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& what, double achieved_tol = -1.0)
        : std::runtime_error(what), achieved(achieved_tol) {}
    double achieved;
};

/// An optimizer failed to converge within its iteration budget.
struct ConvergenceError : std::runtime_error {
    explicit ConvergenceError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace survproc
