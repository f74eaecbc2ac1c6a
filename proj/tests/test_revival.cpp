#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "survproc/gaussian.hpp"
#include "survproc/revival.hpp"

using namespace survproc;

namespace {

MeanModel linear_mean() {
    MeanModel mm;
    mm.alpha = {};
    mm.m0 = LogLinearCurve{0.0, 1.0};  // m0(z) = z
    mm.beta = {0.0};
    return mm;
}

CovarianceModel ou_cov() {
    CovarianceModel cm;
    cm.sigma_b2 = 1.0;
    cm.kernel = KernelType::exponential;
    cm.sigma_g2 = 2.0;
    cm.rho = 1.0;
    cm.sigma_e2 = 0.25;
    return cm;
}

} // namespace

TEST_CASE("conditional mean substitutes directly") {
    const MeanModel mm = linear_mean();
    CHECK(mm(3.0, 5.0, 0) == doctest::Approx(2.0));
}

TEST_CASE("parallel curves: arm difference is constant in revival time") {
    MeanModel mm = linear_mean();
    mm.beta = {0.0, 1.0};
    for (const double z : {0.5, 1.0, 2.0, 4.0}) {
        const double t = 5.0;
        CHECK(mm(t - z, t, 1) - mm(t - z, t, 0) == doctest::Approx(1.0));
    }
}

TEST_CASE("conditional mean hand evaluation") {
    MeanModel mm;
    mm.alpha = {0.1};
    mm.m0 = LogLinearCurve{2.0, 0.0};
    mm.beta = {0.0};
    CHECK(mm(4.0, 5.0, 0) == doctest::Approx(0.5 + 2.0 * std::log(2.0)).epsilon(1e-12));
    CHECK(mm(4.0, 5.0, 0) == doctest::Approx(1.8862943611).epsilon(1e-9));
}

TEST_CASE("conditional mean is undefined at or beyond the survival time") {
    const MeanModel mm = linear_mean();
    CHECK_THROWS_AS(mm(3.0, 3.0, 0), std::domain_error);
    CHECK_THROWS_AS(mm(4.0, 3.0, 0), std::domain_error);
}

TEST_CASE("additivity: mean differences at fixed revival time depend on t only") {
    MeanModel mm;
    mm.alpha = {0.1, 0.02};
    mm.m0 = LogLinearCurve{1.5, -0.2};
    mm.beta = {0.0};
    const double t1 = 6.0;
    const double t2 = 9.0;
    const double expected = mm.alpha_at(t1) - mm.alpha_at(t2);
    for (const double z : {0.25, 1.0, 3.0, 5.5}) {
        CHECK(mm(t1 - z, t1, 0) - mm(t2 - z, t2, 0) == doctest::Approx(expected).epsilon(1e-12));
    }
}

TEST_CASE("singleton grid variance sums the three components") {
    const auto mom = conditional_moments(std::vector<double>{2.0}, 5.0, 0, linear_mean(),
                                         ou_cov());
    CHECK(mom.cov(0, 0) == doctest::Approx(1.0 + 2.0 + 0.25));
}

TEST_CASE("vanishing kernel variance leaves compound symmetry") {
    CovarianceModel cm = ou_cov();
    cm.sigma_g2 = 0.0;
    const std::vector<double> ts{0.0, 1.0, 2.5};
    const auto mom = conditional_moments(ts, 5.0, 0, linear_mean(), cm);
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
            const double expected = (i == j) ? cm.sigma_b2 + cm.sigma_e2 : cm.sigma_b2;
            CHECK(mom.cov(i, j) == doctest::Approx(expected));
        }
    }
}

TEST_CASE("OU covariance hand evaluation on a two-point grid") {
    const std::vector<double> ts{0.0, 1.0};
    const auto mom = conditional_moments(ts, 5.0, 0, linear_mean(), ou_cov());
    const double off = 1.0 + 2.0 * std::exp(-1.0);
    CHECK(mom.cov(0, 0) == doctest::Approx(3.25));
    CHECK(mom.cov(1, 1) == doctest::Approx(3.25));
    CHECK(mom.cov(0, 1) == doctest::Approx(off).epsilon(1e-12));
    CHECK(mom.cov(1, 0) == doctest::Approx(off).epsilon(1e-12));
}

TEST_CASE("grid at or beyond the survival time is rejected") {
    CHECK_THROWS_AS(
        conditional_moments(std::vector<double>{1.0, 5.0}, 5.0, 0, linear_mean(), ou_cov()),
        std::domain_error);
}

TEST_CASE("moments depend on the record only through grid, time, and arm") {
    const std::vector<double> ts{0.5, 1.5, 2.0};
    const auto a = conditional_moments(ts, 4.0, 0, linear_mean(), ou_cov());
    const auto b = conditional_moments(ts, 4.0, 0, linear_mean(), ou_cov());
    CHECK(a.mean == b.mean);
    CHECK(a.cov == b.cov);
}

TEST_CASE("cholesky succeeds for admissible parameters on grids up to 50 points") {
    Philox rng(42, 0);
    for (int rep = 0; rep < 200; ++rep) {
        CovarianceModel cm;
        cm.sigma_b2 = rng.uniform() * 4.0;
        cm.sigma_g2 = rng.uniform() * 4.0;
        cm.rho = 0.05 + rng.uniform() * 5.0;
        cm.sigma_e2 = 1e-4 + rng.uniform();
        cm.kernel = rep % 2 == 0 ? KernelType::exponential : KernelType::matern32;
        const std::size_t k = 1 + static_cast<std::size_t>(rng.uniform() * 50);
        std::vector<double> ts;
        double t = rng.uniform();
        for (std::size_t i = 0; i < k; ++i) {
            ts.push_back(t);
            t += 0.01 + rng.uniform();
        }
        CHECK_NOTHROW(cholesky_psd(cm.matrix(ts)));
    }
}

TEST_CASE("conditional sampling reproduces its moments") {
    const std::vector<double> ts{0.0, 1.0, 3.0};
    const double t = 6.0;
    MeanModel mm;
    mm.alpha = {0.1};
    mm.m0 = LogLinearCurve{2.0, 0.0};
    mm.beta = {0.0};
    const CovarianceModel cm = ou_cov();
    const auto mom = conditional_moments(ts, t, 0, mm, cm);

    const std::size_t n = 100000;
    Philox rng(11, 0);
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(3);
    Eigen::MatrixXd sum_sq = Eigen::MatrixXd::Zero(3, 3);
    for (std::size_t i = 0; i < n; ++i) {
        const Eigen::VectorXd y = sample_conditional(ts, t, 0, mm, cm, rng);
        sum += y;
        sum_sq += y * y.transpose();
    }
    const Eigen::VectorXd mean = sum / static_cast<double>(n);
    const Eigen::MatrixXd cov =
        sum_sq / static_cast<double>(n) - mean * mean.transpose();
    for (int i = 0; i < 3; ++i) {
        const double se = std::sqrt(mom.cov(i, i) / static_cast<double>(n));
        CHECK(std::abs(mean[i] - mom.mean[i]) < 3.0 * se);
        for (int j = 0; j < 3; ++j) {
            const double var_entry =
                (mom.cov(i, i) * mom.cov(j, j) + mom.cov(i, j) * mom.cov(i, j)) /
                static_cast<double>(n);
            CHECK(std::abs(cov(i, j) - mom.cov(i, j)) < 3.0 * std::sqrt(var_entry));
        }
    }
}

TEST_CASE("degenerate variances collapse draws onto the mean") {
    CovarianceModel cm;
    cm.sigma_b2 = 0.0;
    cm.sigma_g2 = 0.0;
    cm.sigma_e2 = 1e-12;
    const std::vector<double> ts{0.0, 1.0};
    Philox rng(3, 0);
    const auto mom = conditional_moments(ts, 4.0, 0, linear_mean(), cm);
    const Eigen::VectorXd y = sample_conditional(ts, 4.0, 0, linear_mean(), cm, rng);
    CHECK((y - mom.mean).cwiseAbs().maxCoeff() < 1e-4);
}

TEST_CASE("natural spline interpolates its knots and extrapolates linearly") {
    const NaturalSplineCurve sp({0.0, 1.0, 3.0, 6.0}, {0.0, 1.0, 1.5, 1.0});
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK(sp(sp.knots()[i]) == doctest::Approx(sp.values()[i]).epsilon(1e-12));
    }
    const double slope = (sp(7.0) - sp(6.0));
    CHECK(sp(8.0) - sp(7.0) == doctest::Approx(slope).epsilon(1e-9));
}

TEST_CASE("curve basis expansion matches direct evaluation") {
    const MeanCurve curves[] = {
        MeanCurve{LogLinearCurve{1.3, -0.4}},
        MeanCurve{NaturalSplineCurve({0.0, 1.0, 3.0, 6.0}, {0.2, 1.0, 1.5, 1.0})},
    };
    for (const auto& curve : curves) {
        const CurveBasis basis(curve);
        const auto coef = curve_coefficients(curve);
        for (const double z : {0.0, 0.4, 1.7, 5.0, 9.0}) {
            const Eigen::VectorXd b = basis(z);
            double acc = 0.0;
            for (std::size_t j = 0; j < coef.size(); ++j) {
                acc += coef[j] * b[static_cast<Eigen::Index>(j)];
            }
            CHECK(acc == doctest::Approx(evaluate_curve(curve, z)).epsilon(1e-10));
        }
    }
}
