#include "survproc/gaussian.hpp"

#include <boost/math/special_functions/erf.hpp>
#include <cmath>

#include "survproc/errors.hpp"

namespace survproc {

Eigen::MatrixXd cholesky_psd(const Eigen::MatrixXd& sigma) {
    Eigen::LLT<Eigen::MatrixXd> llt(sigma);
    if (llt.info() == Eigen::Success) return llt.matrixL();
    const double jitter = 1e-10 * sigma.trace() / static_cast<double>(sigma.rows());
    Eigen::MatrixXd bumped = sigma;
    bumped.diagonal().array() += jitter;
    llt.compute(bumped);
    if (llt.info() == Eigen::Success) return llt.matrixL();
    throw NumericError("covariance matrix is not positive definite (jittered retry failed)");
}

double log_mvn_density(const Eigen::VectorXd& y, const Eigen::VectorXd& mean,
                       const Eigen::MatrixXd& chol_lower) {
    const auto k = y.size();
    if (k == 0) return 0.0;
    const Eigen::VectorXd resid = chol_lower.triangularView<Eigen::Lower>().solve(y - mean);
    const double log_det_half = chol_lower.diagonal().array().log().sum();
    return -0.5 * static_cast<double>(k) * std::log(2.0 * M_PI) - log_det_half -
           0.5 * resid.squaredNorm();
}

Eigen::VectorXd sample_mvn(const Eigen::VectorXd& mean, const Eigen::MatrixXd& chol_lower,
                           Philox& rng) {
    Eigen::VectorXd z(mean.size());
    for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = rng.normal();
    return mean + chol_lower.triangularView<Eigen::Lower>() * z;
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z * M_SQRT1_2); }

double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) throw NumericError("normal quantile requires p in (0, 1)");
    return -M_SQRT2 * boost::math::erfc_inv(2.0 * p);
}

} // namespace survproc
