#pragma once

#include <string>

#include "survproc/revival.hpp"
#include "survproc/survival.hpp"

namespace survproc {

/// Full parameter set theta = (lambda, psi): the survival-family parameters
/// and the conditional-Gaussian parameters (mean curve, treatment offsets,
/// covariance components).
struct ModelParams {
    SurvivalFamily survival;
    MeanModel mean;
    CovarianceModel cov;

    void check() const {
        survival.check();
        mean.check();
        cov.check();
    }

    friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

/// JSON layout mirrors the field names:
/// {
///   "lambda": {"family": "weibull", "params": [1.5, 10.0]},
///   "psi": {
///     "alpha": [0.1],
///     "mean_curve": {"type": "loglinear", "coefficients": [2.0, 0.0]},
///     "beta": [0.0, 1.0],
///     "covariance": {"kernel": "ou", "sigma_b2": 1.0, "sigma_g2": 2.0,
///                    "rho": 1.0, "sigma_e2": 0.25}
///   }
/// }
/// Spline curves use {"type": "spline", "knots": [...], "values": [...]}.
ModelParams model_params_from_json_text(const std::string& text);
ModelParams read_model_params(const std::string& path);
std::string model_params_to_json_text(const ModelParams& mp);
void write_model_params(const ModelParams& mp, const std::string& path);

} // namespace survproc
