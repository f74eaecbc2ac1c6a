#include "survproc/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace survproc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// 15-point Kronrod extension of the 7-point Gauss rule on [-1, 1].
constexpr double kNodes[8] = {
    0.991455371120813, 0.949107912342759, 0.864864423359769, 0.741531185599394,
    0.586087235467691, 0.405845151377397, 0.207784955007898, 0.000000000000000,
};
constexpr double kKronrodW[8] = {
    0.022935322010529, 0.063092092629979, 0.104790010322250, 0.140653259715525,
    0.169004726639267, 0.190350578064785, 0.204432940075298, 0.209482141084728,
};
constexpr double kGaussW[4] = {
    0.129484966168870, 0.279705391489277, 0.381830050505119, 0.417959183673469,
};

struct Segment {
    double a;
    double b;
    double value;
    double error;
};

Segment gk15(const std::function<double(double)>& f, double a, double b) {
    const double half = 0.5 * (b - a);
    const double center = 0.5 * (a + b);
    double kronrod = kKronrodW[7] * f(center);
    double gauss = kGaussW[3] * f(center);
    for (int i = 0; i < 7; ++i) {
        const double dx = half * kNodes[i];
        const double fsum = f(center - dx) + f(center + dx);
        kronrod += kKronrodW[i] * fsum;
        if (i % 2 == 1) gauss += kGaussW[i / 2] * fsum;
    }
    kronrod *= half;
    gauss *= half;
    return {a, b, kronrod, std::abs(kronrod - gauss)};
}

IntegralResult adapt(const std::function<double(double)>& f, double a, double b,
                     const QuadratureConfig& qc, int initial_segments) {
    qc.check();
    std::vector<Segment> segs;
    segs.reserve(static_cast<std::size_t>(qc.max_subdivisions) + 8);
    const double step = (b - a) / initial_segments;
    for (int i = 0; i < initial_segments; ++i) {
        segs.push_back(gk15(f, a + i * step, a + (i + 1) * step));
    }

    IntegralResult res;
    for (res.subdivisions = 0; res.subdivisions < qc.max_subdivisions; ++res.subdivisions) {
        double total = 0.0;
        double err = 0.0;
        std::size_t worst = 0;
        for (std::size_t i = 0; i < segs.size(); ++i) {
            total += segs[i].value;
            err += segs[i].error;
            if (segs[i].error > segs[worst].error) worst = i;
        }
        res.value = total;
        res.abs_error = err;
        if (err <= qc.abs_tol + qc.rel_tol * std::abs(total)) {
            res.converged = true;
            return res;
        }
        const Segment w = segs[worst];
        const double mid = 0.5 * (w.a + w.b);
        segs[worst] = gk15(f, w.a, mid);
        segs.push_back(gk15(f, mid, w.b));
    }
    return res;
}

// Integrates exp(log_g) over (0, 1). A coarse scan picks the shift; if the
// adaptive pass discovers nodes above the shift by more than one log unit,
// the pass is repeated with the larger shift.
LogIntegralResult log_adapt_unit(const std::function<double(double)>& log_g,
                                 const QuadratureConfig& qc) {
    double shift = -kInf;
    constexpr int kScan = 33;
    for (int i = 1; i < kScan; ++i) {
        shift = std::max(shift, log_g(static_cast<double>(i) / kScan));
    }
    LogIntegralResult out;
    if (shift == -kInf) {
        out.log_value = -kInf;
        out.rel_error = 0.0;
        out.converged = true;
        return out;
    }

    for (int attempt = 0; attempt < 4; ++attempt) {
        double observed_max = -kInf;
        auto g = [&](double u) {
            const double lg = log_g(u);
            observed_max = std::max(observed_max, lg);
            return std::exp(std::min(lg - shift, 700.0));
        };
        const IntegralResult lin = adapt(g, 0.0, 1.0, qc, 4);
        if (observed_max > shift + 1.0) {
            shift = observed_max;
            continue;
        }
        out.log_value = lin.value > 0.0 ? shift + std::log(lin.value) : -kInf;
        out.rel_error = lin.value > 0.0 ? lin.abs_error / lin.value : 0.0;
        out.subdivisions = lin.subdivisions;
        out.converged = lin.converged;
        return out;
    }
    out.converged = false;
    out.rel_error = kInf;
    return out;
}

} // namespace

double LogIntegralResult::value() const { return std::exp(log_value); }

IntegralResult integrate_adaptive(const std::function<double(double)>& f, double a, double b,
                                  const QuadratureConfig& qc) {
    return adapt(f, a, b, qc, 2);
}

LogIntegralResult log_integrate(const std::function<double(double)>& log_f, double a, double b,
                                const QuadratureConfig& qc) {
    qc.check();
    if (!(b > a)) {
        LogIntegralResult out;
        out.log_value = -kInf;
        out.converged = true;
        return out;
    }
    const double width = b - a;
    auto log_g = [&](double u) { return log_f(a + u * width) + std::log(width); };
    return log_adapt_unit(log_g, qc);
}

LogIntegralResult log_integrate_tail(const std::function<double(double)>& log_f, double t0,
                                     const QuadratureConfig& qc) {
    qc.check();
    const double c = qc.tail_scale;
    auto log_g = [&](double u) {
        const double om = 1.0 - u;
        const double t = t0 + c * u / om;
        return log_f(t) + std::log(c) - 2.0 * std::log(om);
    };
    return log_adapt_unit(log_g, qc);
}

void require_converged(const IntegralResult& res, const char* what) {
    if (!res.converged) {
        throw NumericError(std::string(what) + ": quadrature did not converge (achieved " +
                               std::to_string(res.abs_error) + " absolute)",
                           res.abs_error);
    }
}

void require_converged(const LogIntegralResult& res, const char* what) {
    if (!res.converged) {
        throw NumericError(std::string(what) + ": quadrature did not converge (achieved " +
                               std::to_string(res.rel_error) + " relative)",
                           res.rel_error);
    }
}

} // namespace survproc
