#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "survproc/optimize.hpp"

using namespace survproc;

namespace {

double rosenbrock(const Eigen::VectorXd& x) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i + 1 < x.size(); ++i) {
        acc += 100.0 * std::pow(x[i + 1] - x[i] * x[i], 2) + std::pow(1.0 - x[i], 2);
    }
    return acc;
}

double quadratic(const Eigen::VectorXd& x) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        acc += (i + 1.0) * (x[i] - 2.0) * (x[i] - 2.0);
    }
    return acc;
}

} // namespace

TEST_CASE("simplex minimizes a quadratic bowl") {
    const auto res = nelder_mead(quadratic, Eigen::VectorXd::Zero(4));
    CHECK(res.converged);
    CHECK((res.x.array() - 2.0).abs().maxCoeff() < 1e-4);
}

TEST_CASE("simplex handles the rosenbrock valley in two dimensions") {
    Eigen::VectorXd x0(2);
    x0 << -1.2, 1.0;
    const auto res = nelder_mead(rosenbrock, x0);
    CHECK(res.f < 1e-8);
    CHECK((res.x.array() - 1.0).abs().maxCoeff() < 1e-3);
}

TEST_CASE("quasi-Newton with finite differences matches on a larger quadratic") {
    const auto res = bfgs_fd(quadratic, Eigen::VectorXd::Zero(10));
    CHECK(res.converged);
    CHECK((res.x.array() - 2.0).abs().maxCoeff() < 1e-4);
}

TEST_CASE("quasi-Newton descends the rosenbrock valley in ten dimensions") {
    BfgsOptions opts;
    opts.max_iter = 2000;
    const auto res = bfgs_fd(rosenbrock, Eigen::VectorXd::Zero(10), opts);
    CHECK(res.f < 1e-6);
}

TEST_CASE("finite-difference gradient matches the analytic quadratic gradient") {
    Eigen::VectorXd x(3);
    x << 0.5, -1.0, 4.0;
    const Eigen::VectorXd g = fd_gradient(quadratic, x);
    for (Eigen::Index i = 0; i < 3; ++i) {
        CHECK(g[i] == doctest::Approx(2.0 * (i + 1.0) * (x[i] - 2.0)).epsilon(1e-6));
    }
}

TEST_CASE("finite-difference hessian of a quadratic recovers its diagonal") {
    Eigen::VectorXd x(3);
    x << 1.0, 1.0, 1.0;
    const Eigen::MatrixXd h = fd_hessian(quadratic, x);
    for (Eigen::Index i = 0; i < 3; ++i) {
        for (Eigen::Index j = 0; j < 3; ++j) {
            const double expected = i == j ? 2.0 * (i + 1.0) : 0.0;
            CHECK(h(i, j) == doctest::Approx(expected).epsilon(1e-4).scale(1.0));
        }
    }
}
