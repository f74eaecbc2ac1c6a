#pragma once

#include <string>
#include <vector>

#include "survproc/rng.hpp"

namespace survproc {

/// Parametric survival-time family used as the marginal law of the survival
/// time. All families put probability one on (0, inf).
enum class Family { exponential, weibull, gamma };

Family family_from_string(const std::string& name);
std::string family_to_string(Family f);

struct SurvivalFamily {
    Family family = Family::weibull;
    /// exponential: [rate]; weibull: [shape, scale]; gamma: [shape, rate].
    std::vector<double> lambda;

    /// Throws ConfigError unless every parameter is strictly positive and
    /// the count matches the family.
    void check() const;

    std::size_t n_params() const;
    std::vector<std::string> param_names() const;

    double density(double t) const;
    double log_density(double t) const;
    double survivor(double t) const;
    double log_survivor(double t) const;
    double hazard(double t) const;

    /// Inverse CDF; quantile(0) == 0.
    double quantile(double p) const;

    /// One draw. Exponential and Weibull invert the CDF from a single
    /// uniform; gamma uses Marsaglia-Tsang rejection.
    double sample(Philox& rng) const;

    friend bool operator==(const SurvivalFamily& a, const SurvivalFamily& b) {
        return a.family == b.family && a.lambda == b.lambda;
    }
};

} // namespace survproc
