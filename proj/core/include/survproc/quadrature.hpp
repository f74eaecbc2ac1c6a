#pragma once

#include <functional>

#include "survproc/errors.hpp"

namespace survproc {

struct QuadratureConfig {
    double rel_tol = 1e-8;
    double abs_tol = 1e-12;
    int max_subdivisions = 200;
    /// Scale of the tail substitution t = t0 + tail_scale * u / (1 - u).
    double tail_scale = 1.0;

    void check() const {
        if (!(rel_tol > 0.0) || !(abs_tol > 0.0)) {
            throw ConfigError("quadrature tolerances must be positive");
        }
        if (max_subdivisions < 1) throw ConfigError("max_subdivisions must be >= 1");
        if (!(tail_scale > 0.0)) throw ConfigError("tail_scale must be positive");
    }
};

struct IntegralResult {
    double value = 0.0;
    double abs_error = 0.0;
    int subdivisions = 0;
    bool converged = false;
};

struct LogIntegralResult {
    double log_value = 0.0;  ///< log of the (nonnegative) integral
    double rel_error = 0.0;
    int subdivisions = 0;
    bool converged = false;

    double value() const;
};

/// Adaptive 15-point Gauss-Kronrod subdivision on a finite interval.
IntegralResult integrate_adaptive(const std::function<double(double)>& f, double a, double b,
                                  const QuadratureConfig& qc);

/// Integral of exp(log_f) over a finite interval, carried out with an
/// internal shift so that integrands spanning hundreds of log units do not
/// underflow.
LogIntegralResult log_integrate(const std::function<double(double)>& log_f, double a, double b,
                                const QuadratureConfig& qc);

/// Integral of exp(log_f) over (t0, inf) after the substitution
/// t = t0 + tail_scale * u / (1 - u), u in (0, 1).
LogIntegralResult log_integrate_tail(const std::function<double(double)>& log_f, double t0,
                                     const QuadratureConfig& qc);

/// Throws NumericError carrying the achieved tolerance when `res` did not
/// converge within the subdivision budget.
void require_converged(const IntegralResult& res, const char* what);
void require_converged(const LogIntegralResult& res, const char* what);

} // namespace survproc
