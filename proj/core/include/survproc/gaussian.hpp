#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "survproc/rng.hpp"

namespace survproc {

/// Lower Cholesky factor of a symmetric positive-definite matrix.
/// On factorization failure a diagonal jitter of 1e-10 * trace / n is added
/// and the factorization retried once; a second failure throws NumericError.
Eigen::MatrixXd cholesky_psd(const Eigen::MatrixXd& sigma);

/// log N(y; mean, L L') given the lower factor L.
double log_mvn_density(const Eigen::VectorXd& y, const Eigen::VectorXd& mean,
                       const Eigen::MatrixXd& chol_lower);

/// mean + L z with z standard normal.
Eigen::VectorXd sample_mvn(const Eigen::VectorXd& mean, const Eigen::MatrixXd& chol_lower,
                           Philox& rng);

/// Standard normal CDF and its inverse.
double normal_cdf(double z);
double normal_quantile(double p);

} // namespace survproc
