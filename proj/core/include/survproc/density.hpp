#pragma once

#include <Eigen/Dense>
#include <span>
#include <vector>

#include "survproc/model.hpp"
#include "survproc/quadrature.hpp"
#include "survproc/types.hpp"

namespace survproc {

/// log q(y, t) on a fixed grid of sampling times with fixed observed values:
/// the survival density times the conditional Gaussian density, zero (log
/// -inf) unless t exceeds every sampling time. The covariance factor is
/// computed once, so repeated evaluation over t (quadrature, predictive
/// curves) costs one triangular solve per call.
class JointDensityEvaluator {
  public:
    JointDensityEvaluator(std::span<const double> ts, std::span<const double> y, int arm,
                          const ModelParams& mp);

    double log_at(double t) const;
    double max_ts() const { return max_ts_; }
    std::size_t grid_size() const { return ts_.size(); }

  private:
    std::vector<double> ts_;
    Eigen::VectorXd y_;
    int arm_;
    ModelParams mp_;
    Eigen::MatrixXd chol_;
    double log_norm_const_;
    double max_ts_;
};

/// Joint density q_ts(y, t); exactly zero for t <= max(ts).
double log_joint_density(std::span<const double> ts, std::span<const double> y, double t,
                         int arm, const ModelParams& mp);
double joint_density(std::span<const double> ts, std::span<const double> y, double t, int arm,
                     const ModelParams& mp);

/// Marginal density p_ts(y) = integral of q over t above `lower`; `lower`
/// defaults to max(ts) (0 for an empty grid) and is raised to max(ts) when a
/// larger censoring bound is supplied. Throws NumericError with the achieved
/// tolerance if the quadrature fails to converge.
double log_marginal_density(std::span<const double> ts, std::span<const double> y, int arm,
                            const ModelParams& mp, const QuadratureConfig& qc,
                            double lower = -1.0);
double marginal_density(std::span<const double> ts, std::span<const double> y, int arm,
                        const ModelParams& mp, const QuadratureConfig& qc, double lower = -1.0);

/// Mass of a record whose death time is bracketed: integral of the
/// prefix-grid joint density over t in (t_lo, t_hi). t_hi may be +inf.
double log_interval_mass(std::span<const double> ts_prefix, std::span<const double> y_prefix,
                         double t_lo, double t_hi, int arm, const ModelParams& mp,
                         const QuadratureConfig& qc);

/// Record-level wrapper: the death interval runs from the last real-valued
/// sampling time (recruitment if none) to the first absorbing observation.
/// The values must carry a nonempty trailing absorbing block.
double log_interval_censored_mass(const PatientRecord& rec, const ModelParams& mp,
                                  const QuadratureConfig& qc);

/// Conditional law of the survival time given finitely many appointment
/// values, supported on (max(ts), inf).
class ClinicalPredictive {
  public:
    ClinicalPredictive(std::span<const double> ts, std::span<const double> y, int arm,
                       const ModelParams& mp, const QuadratureConfig& qc);

    double support_start() const { return lower_; }
    double log_marginal() const { return log_p_; }

    double density(double t) const;
    double log_density(double t) const;
    /// pr(T > t | y); equals 1 at the support start, nonincreasing.
    double survivor(double t) const;
    /// Smallest t with pr(T <= t | y) >= p.
    double quantile(double p) const;

  private:
    JointDensityEvaluator q_;
    QuadratureConfig qc_;
    double lower_;
    double log_p_;
};

} // namespace survproc
