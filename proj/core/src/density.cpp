#include "survproc/density.hpp"

#include <cmath>
#include <limits>

#include "survproc/gaussian.hpp"

namespace survproc {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

JointDensityEvaluator::JointDensityEvaluator(std::span<const double> ts,
                                             std::span<const double> y, int arm,
                                             const ModelParams& mp)
    : ts_(ts.begin(), ts.end()), y_(Eigen::Map<const Eigen::VectorXd>(y.data(),
                                    static_cast<Eigen::Index>(y.size()))),
      arm_(arm), mp_(mp) {
    if (ts.size() != y.size()) {
        throw DataError("joint density needs one value per sampling time");
    }
    mp_.check();
    for (std::size_t i = 1; i < ts_.size(); ++i) {
        if (!(ts_[i] > ts_[i - 1])) {
            throw DataError("joint density grid must be strictly increasing");
        }
    }
    max_ts_ = ts_.empty() ? 0.0 : ts_.back();
    if (!ts_.empty()) {
        chol_ = cholesky_psd(mp_.cov.matrix(ts_));
        log_norm_const_ = -0.5 * static_cast<double>(ts_.size()) * std::log(2.0 * M_PI) -
                          chol_.diagonal().array().log().sum();
    } else {
        log_norm_const_ = 0.0;
    }
}

double JointDensityEvaluator::log_at(double t) const {
    if (!ts_.empty() && !(t > max_ts_)) return -kInf;
    if (!(t > 0.0)) return -kInf;
    double log_gauss = 0.0;
    if (!ts_.empty()) {
        const double alpha_t = mp_.mean.alpha_at(t);
        const double beta = mp_.mean.beta_for(arm_);
        Eigen::VectorXd resid(y_.size());
        for (Eigen::Index i = 0; i < resid.size(); ++i) {
            const double z = t - ts_[static_cast<std::size_t>(i)];
            resid[i] = y_[i] - (alpha_t + evaluate_curve(mp_.mean.m0, z) + beta);
        }
        chol_.triangularView<Eigen::Lower>().solveInPlace(resid);
        log_gauss = log_norm_const_ - 0.5 * resid.squaredNorm();
    }
    return mp_.survival.log_density(t) + log_gauss;
}

double log_joint_density(std::span<const double> ts, std::span<const double> y, double t,
                         int arm, const ModelParams& mp) {
    return JointDensityEvaluator(ts, y, arm, mp).log_at(t);
}

double joint_density(std::span<const double> ts, std::span<const double> y, double t, int arm,
                     const ModelParams& mp) {
    return std::exp(log_joint_density(ts, y, t, arm, mp));
}

double log_marginal_density(std::span<const double> ts, std::span<const double> y, int arm,
                            const ModelParams& mp, const QuadratureConfig& qc, double lower) {
    const JointDensityEvaluator q(ts, y, arm, mp);
    const double t0 = std::max(q.max_ts(), lower);
    const auto res =
        log_integrate_tail([&](double t) { return q.log_at(t); }, t0, qc);
    require_converged(res, "marginal density");
    return res.log_value;
}

double marginal_density(std::span<const double> ts, std::span<const double> y, int arm,
                        const ModelParams& mp, const QuadratureConfig& qc, double lower) {
    return std::exp(log_marginal_density(ts, y, arm, mp, qc, lower));
}

double log_interval_mass(std::span<const double> ts_prefix, std::span<const double> y_prefix,
                         double t_lo, double t_hi, int arm, const ModelParams& mp,
                         const QuadratureConfig& qc) {
    if (!(t_hi > t_lo)) throw DataError("death interval must have positive width");
    const JointDensityEvaluator q(ts_prefix, y_prefix, arm, mp);
    const double a = std::max(t_lo, q.max_ts());
    auto log_f = [&](double t) { return q.log_at(t); };
    if (std::isinf(t_hi)) {
        const auto res = log_integrate_tail(log_f, a, qc);
        require_converged(res, "interval-censored mass");
        return res.log_value;
    }
    const auto res = log_integrate(log_f, a, t_hi, qc);
    require_converged(res, "interval-censored mass");
    return res.log_value;
}

double log_interval_censored_mass(const PatientRecord& rec, const ModelParams& mp,
                                  const QuadratureConfig& qc) {
    if (!rec.has_trailing_flat()) {
        throw DataError("record '" + rec.patient_id + "' carries no absorbing observations");
    }
    const std::size_t j = rec.n_real();
    const auto ts = rec.real_times();
    const auto y = rec.real_values();
    const double t_lo = j > 0 ? rec.times[j - 1] : 0.0;
    const double t_hi = rec.times[j];
    return log_interval_mass(ts, y, t_lo, t_hi, rec.arm, mp, qc);
}

ClinicalPredictive::ClinicalPredictive(std::span<const double> ts, std::span<const double> y,
                                       int arm, const ModelParams& mp,
                                       const QuadratureConfig& qc)
    : q_(ts, y, arm, mp), qc_(qc), lower_(q_.max_ts()) {
    const auto res = log_integrate_tail([&](double t) { return q_.log_at(t); }, lower_, qc_);
    require_converged(res, "clinical predictive normalizer");
    log_p_ = res.log_value;
    if (log_p_ == -kInf) {
        throw NumericError("clinical predictive is undefined: marginal density is zero");
    }
}

double ClinicalPredictive::log_density(double t) const { return q_.log_at(t) - log_p_; }

double ClinicalPredictive::density(double t) const { return std::exp(log_density(t)); }

double ClinicalPredictive::survivor(double t) const {
    if (t <= lower_) return 1.0;
    const auto res = log_integrate_tail([&](double u) { return q_.log_at(u); }, t, qc_);
    require_converged(res, "predictive survivor");
    return std::min(1.0, std::exp(res.log_value - log_p_));
}

double ClinicalPredictive::quantile(double p) const {
    if (!(p >= 0.0 && p < 1.0)) throw NumericError("predictive quantile requires p in [0, 1)");
    if (p == 0.0) return lower_;
    const double target = 1.0 - p;
    double hi = std::max(lower_ + 1.0, 2.0 * std::abs(lower_));
    int guard = 0;
    while (survivor(hi) > target) {
        hi = lower_ + 2.0 * (hi - lower_);
        if (++guard > 200) throw NumericError("predictive quantile bracket failure");
    }
    double lo = lower_;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (survivor(mid) > target) {
            lo = mid;
        } else {
            hi = mid;
        }
        if (hi - lo < 1e-10 * std::max(1.0, std::abs(hi))) break;
    }
    return 0.5 * (lo + hi);
}

} // namespace survproc
