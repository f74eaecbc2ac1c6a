#pragma once

#include <Eigen/Dense>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "survproc/rng.hpp"

namespace survproc {

/// Characteristic mean curve in revival time z = t - s, the population mean
/// health trajectory measured backwards from death.
///
/// Two parameterizations: a two-coefficient log-linear form
/// c_log * log(1 + z) + c_lin * z, and a natural cubic spline interpolating
/// (knot, value) pairs with linear extrapolation outside the knot range.
struct LogLinearCurve {
    double c_log = 0.0;
    double c_lin = 0.0;
    friend bool operator==(const LogLinearCurve&, const LogLinearCurve&) = default;
};

class NaturalSplineCurve {
  public:
    NaturalSplineCurve(std::vector<double> knots, std::vector<double> values);
    double operator()(double z) const;
    const std::vector<double>& knots() const { return knots_; }
    const std::vector<double>& values() const { return values_; }
    friend bool operator==(const NaturalSplineCurve& a, const NaturalSplineCurve& b) {
        return a.knots_ == b.knots_ && a.values_ == b.values_;
    }

  private:
    std::vector<double> knots_;
    std::vector<double> values_;
    std::vector<double> second_deriv_;
};

using MeanCurve = std::variant<LogLinearCurve, NaturalSplineCurve>;

double evaluate_curve(const MeanCurve& m, double z);

/// Free coefficients of a curve: (c_log, c_lin) for the log-linear form,
/// the knot values for a spline (knot locations are structure, not
/// parameters).
std::vector<double> curve_coefficients(const MeanCurve& m);
MeanCurve curve_with_coefficients(const MeanCurve& structure, std::span<const double> coeffs);

/// Both curve forms are linear in their coefficients; this evaluates the
/// corresponding basis functions at a revival time.
class CurveBasis {
  public:
    explicit CurveBasis(const MeanCurve& structure);
    std::size_t size() const { return basis_.size() + (loglinear_ ? 2 : 0); }
    Eigen::VectorXd operator()(double z) const;

  private:
    bool loglinear_ = true;
    std::vector<NaturalSplineCurve> basis_;
};

/// Conditional mean of the health process given survival time t:
/// mu_t(s) = alpha(t) + m0(t - s) + beta_arm, defined for 0 <= s < t.
/// alpha is a low-order polynomial without constant term; beta[0] == 0 is
/// the null treatment level.
struct MeanModel {
    std::vector<double> alpha;  ///< alpha(t) = alpha[0] t + alpha[1] t^2 + ...
    MeanCurve m0 = LogLinearCurve{};
    std::vector<double> beta = {0.0};

    void check() const;
    double alpha_at(double t) const;
    double beta_for(int arm) const;

    /// Throws std::domain_error when s >= t; the conditional mean is not
    /// defined at or after the survival time.
    double operator()(double s, double t, int arm) const;

    friend bool operator==(const MeanModel&, const MeanModel&) = default;
};

enum class KernelType { exponential, matern32 };

KernelType kernel_from_string(const std::string& name);
std::string kernel_to_string(KernelType k);

/// Conditional covariance K(s, s') = sigma_b2 + k(s, s') + sigma_e2 * 1[s = s']:
/// a patient random intercept, a stationary temporal kernel, and white noise.
/// The white-noise term applies on the diagonal of any grid evaluation.
struct CovarianceModel {
    double sigma_b2 = 0.0;  ///< random-intercept variance
    KernelType kernel = KernelType::exponential;
    double sigma_g2 = 1.0;  ///< kernel variance
    double rho = 1.0;       ///< kernel range
    double sigma_e2 = 1e-2; ///< white-noise variance, must stay positive

    void check() const;
    /// Stationary kernel value at lag |s - s'| (no intercept, no noise).
    double kernel_at(double s, double sp) const;

    /// Grid covariance matrix; diagonal gets the white-noise term.
    Eigen::MatrixXd matrix(std::span<const double> ts) const;

    friend bool operator==(const CovarianceModel&, const CovarianceModel&) = default;
};

struct ConditionalMoments {
    Eigen::VectorXd mean;
    Eigen::MatrixXd cov;
};

/// Mean vector and covariance matrix of the health values on a strictly
/// increasing grid, conditional on survival time t. Every grid point must
/// lie strictly below t.
ConditionalMoments conditional_moments(std::span<const double> ts, double t, int arm,
                                       const MeanModel& mm, const CovarianceModel& cm);

/// Multivariate Gaussian draw with the moments above, via Cholesky.
Eigen::VectorXd sample_conditional(std::span<const double> ts, double t, int arm,
                                   const MeanModel& mm, const CovarianceModel& cm, Philox& rng);

} // namespace survproc
