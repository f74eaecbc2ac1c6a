#pragma once

#include <Eigen/Dense>
#include <functional>
#include <string>

namespace survproc {

using ObjectiveFn = std::function<double(const Eigen::VectorXd&)>;

struct OptimResult {
    Eigen::VectorXd x;
    double f = 0.0;
    int iterations = 0;
    bool converged = false;
    std::string message;
};

struct NelderMeadOptions {
    int max_iter = 4000;
    double f_tol = 1e-10;
    double x_tol = 1e-9;
    double init_step = 0.25;
};

/// Downhill simplex minimizer. Suited to a handful of parameters.
OptimResult nelder_mead(const ObjectiveFn& f, const Eigen::VectorXd& x0,
                        const NelderMeadOptions& opts = {});

struct BfgsOptions {
    int max_iter = 200;
    double grad_tol = 1e-6;
    double f_tol = 1e-11;
    double fd_step = 1e-6;
    bool central = false;  ///< central differences cost 2p evals per gradient
};

/// Quasi-Newton minimizer with finite-difference gradients and backtracking
/// line search.
OptimResult bfgs_fd(const ObjectiveFn& f, const Eigen::VectorXd& x0,
                    const BfgsOptions& opts = {});

/// Central finite-difference gradient with per-coordinate steps
/// h_i = step_rel * max(|x_i|, 1).
Eigen::VectorXd fd_gradient(const ObjectiveFn& f, const Eigen::VectorXd& x,
                            double step_rel = 1e-6);

/// Central finite-difference Hessian. Steps may be clipped per coordinate via
/// `max_step` (useful near a positivity boundary); pass an empty vector for
/// unconstrained steps.
Eigen::MatrixXd fd_hessian(const ObjectiveFn& f, const Eigen::VectorXd& x,
                           double step_rel = 1e-4,
                           const Eigen::VectorXd& max_step = Eigen::VectorXd());

} // namespace survproc
