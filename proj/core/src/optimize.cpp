#include "survproc/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "survproc/errors.hpp"

namespace survproc {

OptimResult nelder_mead(const ObjectiveFn& f, const Eigen::VectorXd& x0,
                        const NelderMeadOptions& opts) {
    const int n = static_cast<int>(x0.size());
    std::vector<Eigen::VectorXd> pts(static_cast<std::size_t>(n) + 1, x0);
    std::vector<double> vals(static_cast<std::size_t>(n) + 1);
    for (int i = 0; i < n; ++i) {
        const double step = opts.init_step * std::max(1.0, std::abs(x0[i]));
        pts[static_cast<std::size_t>(i) + 1][i] += step;
    }
    for (std::size_t i = 0; i < pts.size(); ++i) vals[i] = f(pts[i]);

    auto order = [&] {
        std::vector<std::size_t> idx(pts.size());
        for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
        std::sort(idx.begin(), idx.end(),
                  [&](std::size_t a, std::size_t b) { return vals[a] < vals[b]; });
        std::vector<Eigen::VectorXd> p2;
        std::vector<double> v2;
        for (const auto i : idx) {
            p2.push_back(pts[i]);
            v2.push_back(vals[i]);
        }
        pts.swap(p2);
        vals.swap(v2);
    };

    OptimResult res;
    int iter = 0;
    for (; iter < opts.max_iter; ++iter) {
        order();
        const double spread = vals.back() - vals.front();
        double xspread = 0.0;
        for (std::size_t i = 1; i < pts.size(); ++i) {
            xspread = std::max(xspread, (pts[i] - pts[0]).cwiseAbs().maxCoeff());
        }
        if (spread < opts.f_tol * (1.0 + std::abs(vals.front())) && xspread < opts.x_tol) {
            res.converged = true;
            break;
        }

        Eigen::VectorXd centroid = Eigen::VectorXd::Zero(n);
        for (std::size_t i = 0; i + 1 < pts.size(); ++i) centroid += pts[i];
        centroid /= static_cast<double>(n);

        const Eigen::VectorXd reflected = centroid + (centroid - pts.back());
        const double f_r = f(reflected);
        if (f_r < vals.front()) {
            const Eigen::VectorXd expanded = centroid + 2.0 * (centroid - pts.back());
            const double f_e = f(expanded);
            if (f_e < f_r) {
                pts.back() = expanded;
                vals.back() = f_e;
            } else {
                pts.back() = reflected;
                vals.back() = f_r;
            }
            continue;
        }
        if (f_r < vals[vals.size() - 2]) {
            pts.back() = reflected;
            vals.back() = f_r;
            continue;
        }
        const Eigen::VectorXd contracted = centroid + 0.5 * (pts.back() - centroid);
        const double f_c = f(contracted);
        if (f_c < vals.back()) {
            pts.back() = contracted;
            vals.back() = f_c;
            continue;
        }
        // Shrink toward the best vertex.
        for (std::size_t i = 1; i < pts.size(); ++i) {
            pts[i] = pts[0] + 0.5 * (pts[i] - pts[0]);
            vals[i] = f(pts[i]);
        }
    }
    order();
    res.x = pts[0];
    res.f = vals[0];
    res.iterations = iter;
    if (!res.converged) res.message = "simplex iteration budget exhausted";
    return res;
}

Eigen::VectorXd fd_gradient(const ObjectiveFn& f, const Eigen::VectorXd& x, double step_rel) {
    Eigen::VectorXd g(x.size());
    Eigen::VectorXd xp = x;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        const double h = step_rel * std::max(std::abs(x[i]), 1.0);
        xp[i] = x[i] + h;
        const double fp = f(xp);
        xp[i] = x[i] - h;
        const double fm = f(xp);
        xp[i] = x[i];
        g[i] = (fp - fm) / (2.0 * h);
    }
    return g;
}

namespace {

Eigen::VectorXd forward_gradient(const ObjectiveFn& f, const Eigen::VectorXd& x, double f_x,
                                 double step_rel) {
    Eigen::VectorXd g(x.size());
    Eigen::VectorXd xp = x;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        const double h = step_rel * std::max(std::abs(x[i]), 1.0);
        xp[i] = x[i] + h;
        g[i] = (f(xp) - f_x) / h;
        xp[i] = x[i];
    }
    return g;
}

} // namespace

OptimResult bfgs_fd(const ObjectiveFn& f, const Eigen::VectorXd& x0, const BfgsOptions& opts) {
    const Eigen::Index n = x0.size();
    Eigen::VectorXd x = x0;
    double fx = f(x);
    if (!std::isfinite(fx)) {
        throw ConvergenceError("objective is not finite at the initial point");
    }
    Eigen::VectorXd g = opts.central ? fd_gradient(f, x, opts.fd_step)
                                     : forward_gradient(f, x, fx, opts.fd_step);
    Eigen::MatrixXd h_inv = Eigen::MatrixXd::Identity(n, n);

    OptimResult res;
    int iter = 0;
    for (; iter < opts.max_iter; ++iter) {
        if (g.cwiseAbs().maxCoeff() < opts.grad_tol * (1.0 + std::abs(fx))) {
            res.converged = true;
            break;
        }
        Eigen::VectorXd dir = -h_inv * g;
        double slope = g.dot(dir);
        if (!(slope < 0.0)) {
            h_inv.setIdentity();
            dir = -g;
            slope = g.dot(dir);
        }

        // Backtracking Armijo search.
        double step = 1.0;
        double f_new = 0.0;
        Eigen::VectorXd x_new;
        bool accepted = false;
        for (int ls = 0; ls < 40; ++ls) {
            x_new = x + step * dir;
            f_new = f(x_new);
            if (std::isfinite(f_new) && f_new <= fx + 1e-4 * step * slope) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) {
            res.message = "line search stalled";
            break;
        }

        Eigen::VectorXd g_new = opts.central ? fd_gradient(f, x_new, opts.fd_step)
                                             : forward_gradient(f, x_new, f_new, opts.fd_step);
        const Eigen::VectorXd s = x_new - x;
        const Eigen::VectorXd yv = g_new - g;
        const double sy = s.dot(yv);
        if (sy > 1e-12 * s.norm() * yv.norm()) {
            const double rho = 1.0 / sy;
            const Eigen::MatrixXd ident = Eigen::MatrixXd::Identity(n, n);
            h_inv = (ident - rho * s * yv.transpose()) * h_inv *
                        (ident - rho * yv * s.transpose()) +
                    rho * s * s.transpose();
        }
        const double f_drop = fx - f_new;
        x = x_new;
        fx = f_new;
        g = g_new;
        if (f_drop < opts.f_tol * (1.0 + std::abs(fx))) {
            res.converged = true;
            ++iter;
            break;
        }
    }
    res.x = x;
    res.f = fx;
    res.iterations = iter;
    if (!res.converged && res.message.empty()) {
        res.message = "quasi-Newton iteration budget exhausted";
    }
    return res;
}

Eigen::MatrixXd fd_hessian(const ObjectiveFn& f, const Eigen::VectorXd& x, double step_rel,
                           const Eigen::VectorXd& max_step) {
    const Eigen::Index n = x.size();
    Eigen::VectorXd h(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        h[i] = step_rel * std::max(std::abs(x[i]), 1e-3);
        if (max_step.size() == n && max_step[i] > 0.0) h[i] = std::min(h[i], max_step[i]);
    }
    Eigen::MatrixXd hess(n, n);
    Eigen::VectorXd xp = x;
    const double f0 = f(x);
    for (Eigen::Index i = 0; i < n; ++i) {
        xp[i] = x[i] + h[i];
        const double fp = f(xp);
        xp[i] = x[i] - h[i];
        const double fm = f(xp);
        xp[i] = x[i];
        hess(i, i) = (fp - 2.0 * f0 + fm) / (h[i] * h[i]);
    }
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = i + 1; j < n; ++j) {
            xp[i] = x[i] + h[i];
            xp[j] = x[j] + h[j];
            const double fpp = f(xp);
            xp[j] = x[j] - h[j];
            const double fpm = f(xp);
            xp[i] = x[i] - h[i];
            const double fmm = f(xp);
            xp[j] = x[j] + h[j];
            const double fmp = f(xp);
            xp[i] = x[i];
            xp[j] = x[j];
            hess(i, j) = (fpp - fpm - fmp + fmm) / (4.0 * h[i] * h[j]);
            hess(j, i) = hess(i, j);
        }
    }
    return hess;
}

} // namespace survproc
