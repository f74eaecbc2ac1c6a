#include "survproc/revival.hpp"

#include <cmath>
#include <stdexcept>

#include "survproc/errors.hpp"
#include "survproc/gaussian.hpp"

namespace survproc {

NaturalSplineCurve::NaturalSplineCurve(std::vector<double> knots, std::vector<double> values)
    : knots_(std::move(knots)), values_(std::move(values)) {
    const std::size_t n = knots_.size();
    if (n < 2) throw ConfigError("spline mean curve needs at least 2 knots");
    if (values_.size() != n) throw ConfigError("spline knot/value count mismatch");
    for (std::size_t i = 1; i < n; ++i) {
        if (!(knots_[i] > knots_[i - 1])) {
            throw ConfigError("spline knots must be strictly increasing");
        }
    }
    // Natural boundary conditions: tridiagonal solve for second derivatives.
    second_deriv_.assign(n, 0.0);
    std::vector<double> u(n, 0.0);
    for (std::size_t i = 1; i + 1 < n; ++i) {
        const double sig = (knots_[i] - knots_[i - 1]) / (knots_[i + 1] - knots_[i - 1]);
        const double p = sig * second_deriv_[i - 1] + 2.0;
        second_deriv_[i] = (sig - 1.0) / p;
        const double slope_r = (values_[i + 1] - values_[i]) / (knots_[i + 1] - knots_[i]);
        const double slope_l = (values_[i] - values_[i - 1]) / (knots_[i] - knots_[i - 1]);
        u[i] = (6.0 * (slope_r - slope_l) / (knots_[i + 1] - knots_[i - 1]) - sig * u[i - 1]) / p;
    }
    second_deriv_[n - 1] = 0.0;
    for (std::size_t i = n - 1; i-- > 0;) {
        second_deriv_[i] = second_deriv_[i] * second_deriv_[i + 1] + u[i];
    }
}

double NaturalSplineCurve::operator()(double z) const {
    const std::size_t n = knots_.size();
    // Linear extrapolation: second derivative vanishes at the boundary.
    if (z <= knots_.front()) {
        const double h = knots_[1] - knots_[0];
        const double d = (values_[1] - values_[0]) / h - h / 6.0 * second_deriv_[1];
        return values_[0] + d * (z - knots_[0]);
    }
    if (z >= knots_.back()) {
        const double h = knots_[n - 1] - knots_[n - 2];
        const double d = (values_[n - 1] - values_[n - 2]) / h + h / 6.0 * second_deriv_[n - 2];
        return values_[n - 1] + d * (z - knots_[n - 1]);
    }
    std::size_t lo = 0;
    std::size_t hi = n - 1;
    while (hi - lo > 1) {
        const std::size_t mid = (lo + hi) / 2;
        if (knots_[mid] > z) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    const double h = knots_[hi] - knots_[lo];
    const double a = (knots_[hi] - z) / h;
    const double b = (z - knots_[lo]) / h;
    return a * values_[lo] + b * values_[hi] +
           ((a * a * a - a) * second_deriv_[lo] + (b * b * b - b) * second_deriv_[hi]) *
               (h * h) / 6.0;
}

double evaluate_curve(const MeanCurve& m, double z) {
    if (const auto* ll = std::get_if<LogLinearCurve>(&m)) {
        return ll->c_log * std::log1p(z) + ll->c_lin * z;
    }
    return std::get<NaturalSplineCurve>(m)(z);
}

std::vector<double> curve_coefficients(const MeanCurve& m) {
    if (const auto* ll = std::get_if<LogLinearCurve>(&m)) return {ll->c_log, ll->c_lin};
    return std::get<NaturalSplineCurve>(m).values();
}

MeanCurve curve_with_coefficients(const MeanCurve& structure, std::span<const double> coeffs) {
    if (std::holds_alternative<LogLinearCurve>(structure)) {
        if (coeffs.size() != 2) throw ConfigError("loglinear curve needs 2 coefficients");
        return LogLinearCurve{coeffs[0], coeffs[1]};
    }
    const auto& sp = std::get<NaturalSplineCurve>(structure);
    if (coeffs.size() != sp.knots().size()) {
        throw ConfigError("spline coefficient count must match knot count");
    }
    return NaturalSplineCurve(sp.knots(), {coeffs.begin(), coeffs.end()});
}

CurveBasis::CurveBasis(const MeanCurve& structure) {
    if (std::holds_alternative<LogLinearCurve>(structure)) {
        loglinear_ = true;
        return;
    }
    loglinear_ = false;
    const auto& sp = std::get<NaturalSplineCurve>(structure);
    const std::size_t m = sp.knots().size();
    basis_.reserve(m);
    for (std::size_t j = 0; j < m; ++j) {
        std::vector<double> unit(m, 0.0);
        unit[j] = 1.0;
        basis_.emplace_back(sp.knots(), unit);
    }
}

Eigen::VectorXd CurveBasis::operator()(double z) const {
    if (loglinear_) {
        Eigen::VectorXd out(2);
        out << std::log1p(z), z;
        return out;
    }
    Eigen::VectorXd out(static_cast<Eigen::Index>(basis_.size()));
    for (std::size_t j = 0; j < basis_.size(); ++j) {
        out[static_cast<Eigen::Index>(j)] = basis_[j](z);
    }
    return out;
}

void MeanModel::check() const {
    if (beta.empty() || beta[0] != 0.0) {
        throw ConfigError("treatment offsets must start with the null level beta[0] == 0");
    }
}

double MeanModel::alpha_at(double t) const {
    double acc = 0.0;
    double power = t;
    for (const double a : alpha) {
        acc += a * power;
        power *= t;
    }
    return acc;
}

double MeanModel::beta_for(int arm) const {
    if (arm < 0 || static_cast<std::size_t>(arm) >= beta.size()) {
        throw ConfigError("treatment arm " + std::to_string(arm) + " has no offset");
    }
    return beta[static_cast<std::size_t>(arm)];
}

double MeanModel::operator()(double s, double t, int arm) const {
    if (!(s < t)) {
        throw std::domain_error("conditional mean requested at s = " + std::to_string(s) +
                                " >= survival time t = " + std::to_string(t));
    }
    if (s < 0.0) throw std::domain_error("conditional mean requested at negative time");
    return alpha_at(t) + evaluate_curve(m0, t - s) + beta_for(arm);
}

KernelType kernel_from_string(const std::string& name) {
    if (name == "ou" || name == "exponential") return KernelType::exponential;
    if (name == "matern32") return KernelType::matern32;
    throw ConfigError("unknown kernel '" + name + "'");
}

std::string kernel_to_string(KernelType k) {
    return k == KernelType::exponential ? "ou" : "matern32";
}

void CovarianceModel::check() const {
    if (!(sigma_b2 >= 0.0 && sigma_g2 >= 0.0)) {
        throw ConfigError("variance components must be nonnegative");
    }
    if (!(sigma_e2 > 0.0)) {
        throw ConfigError("white-noise variance must be strictly positive");
    }
    if (!(rho > 0.0)) throw ConfigError("kernel range must be strictly positive");
}

double CovarianceModel::kernel_at(double s, double sp) const {
    const double d = std::abs(s - sp) / rho;
    switch (kernel) {
        case KernelType::exponential: return sigma_g2 * std::exp(-d);
        case KernelType::matern32: {
            const double a = std::sqrt(3.0) * d;
            return sigma_g2 * (1.0 + a) * std::exp(-a);
        }
    }
    throw ConfigError("corrupt kernel tag");
}

Eigen::MatrixXd CovarianceModel::matrix(std::span<const double> ts) const {
    const auto k = static_cast<Eigen::Index>(ts.size());
    Eigen::MatrixXd sigma(k, k);
    for (Eigen::Index i = 0; i < k; ++i) {
        for (Eigen::Index j = 0; j <= i; ++j) {
            double v = sigma_b2 + kernel_at(ts[static_cast<std::size_t>(i)],
                                            ts[static_cast<std::size_t>(j)]);
            if (i == j) v += sigma_e2;
            sigma(i, j) = v;
            sigma(j, i) = v;
        }
    }
    return sigma;
}

ConditionalMoments conditional_moments(std::span<const double> ts, double t, int arm,
                                       const MeanModel& mm, const CovarianceModel& cm) {
    mm.check();
    cm.check();
    const auto k = static_cast<Eigen::Index>(ts.size());
    for (std::size_t i = 0; i < ts.size(); ++i) {
        if (!(ts[i] < t)) {
            throw std::domain_error("grid point " + std::to_string(ts[i]) +
                                    " is not below the survival time " + std::to_string(t));
        }
        if (i > 0 && !(ts[i] > ts[i - 1])) {
            throw std::domain_error("moment grid must be strictly increasing");
        }
    }
    ConditionalMoments out;
    out.mean.resize(k);
    for (Eigen::Index i = 0; i < k; ++i) {
        out.mean[i] = mm(ts[static_cast<std::size_t>(i)], t, arm);
    }
    out.cov = cm.matrix(ts);
    return out;
}

Eigen::VectorXd sample_conditional(std::span<const double> ts, double t, int arm,
                                   const MeanModel& mm, const CovarianceModel& cm,
                                   Philox& rng) {
    const auto mom = conditional_moments(ts, t, arm, mm, cm);
    return sample_mvn(mom.mean, cholesky_psd(mom.cov), rng);
}

} // namespace survproc
