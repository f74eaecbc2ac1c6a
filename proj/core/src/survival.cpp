#include "survproc/survival.hpp"

#include <boost/math/special_functions/gamma.hpp>
#include <cmath>
#include <limits>

#include "survproc/errors.hpp"

namespace survproc {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

Family family_from_string(const std::string& name) {
    if (name == "exponential") return Family::exponential;
    if (name == "weibull") return Family::weibull;
    if (name == "gamma") return Family::gamma;
    throw ConfigError("unknown survival family '" + name + "'");
}

std::string family_to_string(Family f) {
    switch (f) {
        case Family::exponential: return "exponential";
        case Family::weibull: return "weibull";
        case Family::gamma: return "gamma";
    }
    throw ConfigError("corrupt family tag");
}

std::size_t SurvivalFamily::n_params() const {
    return family == Family::exponential ? 1 : 2;
}

std::vector<std::string> SurvivalFamily::param_names() const {
    switch (family) {
        case Family::exponential: return {"rate"};
        case Family::weibull: return {"shape", "scale"};
        case Family::gamma: return {"shape", "rate"};
    }
    throw ConfigError("corrupt family tag");
}

void SurvivalFamily::check() const {
    if (lambda.size() != n_params()) {
        throw ConfigError("survival family " + family_to_string(family) + " needs " +
                          std::to_string(n_params()) + " parameters, got " +
                          std::to_string(lambda.size()));
    }
    for (const double v : lambda) {
        if (!(v > 0.0) || !std::isfinite(v)) {
            throw ConfigError("survival parameters must be strictly positive and finite");
        }
    }
}

double SurvivalFamily::log_density(double t) const {
    check();
    if (t < 0.0) return -kInf;
    switch (family) {
        case Family::exponential: {
            const double rate = lambda[0];
            return std::log(rate) - rate * t;
        }
        case Family::weibull: {
            const double k = lambda[0];
            const double theta = lambda[1];
            if (t == 0.0) {
                if (k > 1.0) return -kInf;
                if (k == 1.0) return -std::log(theta);
                return kInf;
            }
            const double z = t / theta;
            return std::log(k / theta) + (k - 1.0) * std::log(z) - std::pow(z, k);
        }
        case Family::gamma: {
            const double a = lambda[0];
            const double r = lambda[1];
            if (t == 0.0) {
                if (a > 1.0) return -kInf;
                if (a == 1.0) return std::log(r);
                return kInf;
            }
            return a * std::log(r) + (a - 1.0) * std::log(t) - r * t - std::lgamma(a);
        }
    }
    throw ConfigError("corrupt family tag");
}

double SurvivalFamily::density(double t) const { return std::exp(log_density(t)); }

double SurvivalFamily::survivor(double t) const {
    check();
    if (t <= 0.0) return 1.0;
    switch (family) {
        case Family::exponential: return std::exp(-lambda[0] * t);
        case Family::weibull: return std::exp(-std::pow(t / lambda[1], lambda[0]));
        case Family::gamma: return boost::math::gamma_q(lambda[0], lambda[1] * t);
    }
    throw ConfigError("corrupt family tag");
}

double SurvivalFamily::log_survivor(double t) const {
    check();
    if (t <= 0.0) return 0.0;
    switch (family) {
        case Family::exponential: return -lambda[0] * t;
        case Family::weibull: return -std::pow(t / lambda[1], lambda[0]);
        case Family::gamma: {
            const double q = boost::math::gamma_q(lambda[0], lambda[1] * t);
            if (q > 0.0) return std::log(q);
            // Far tail: q underflows; use the asymptotic upper-gamma expansion
            // Q(a, x) ~ x^(a-1) e^(-x) / Gamma(a).
            const double x = lambda[1] * t;
            return (lambda[0] - 1.0) * std::log(x) - x - std::lgamma(lambda[0]);
        }
    }
    throw ConfigError("corrupt family tag");
}

double SurvivalFamily::hazard(double t) const {
    return std::exp(log_density(t) - log_survivor(t));
}

double SurvivalFamily::quantile(double p) const {
    check();
    if (!(p >= 0.0 && p < 1.0)) throw ConfigError("quantile requires p in [0, 1)");
    if (p == 0.0) return 0.0;
    switch (family) {
        case Family::exponential: return -std::log1p(-p) / lambda[0];
        case Family::weibull: return lambda[1] * std::pow(-std::log1p(-p), 1.0 / lambda[0]);
        case Family::gamma: return boost::math::gamma_p_inv(lambda[0], p) / lambda[1];
    }
    throw ConfigError("corrupt family tag");
}

double SurvivalFamily::sample(Philox& rng) const {
    check();
    switch (family) {
        case Family::exponential: return rng.exponential(lambda[0]);
        case Family::weibull:
            return lambda[1] * std::pow(-std::log(rng.uniform_pos()), 1.0 / lambda[0]);
        case Family::gamma: return rng.gamma(lambda[0]) / lambda[1];
    }
    throw ConfigError("corrupt family tag");
}

} // namespace survproc
