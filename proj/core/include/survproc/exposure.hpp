#pragma once

#include <Eigen/Dense>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "survproc/quadrature.hpp"
#include "survproc/revival.hpp"
#include "survproc/rng.hpp"
#include "survproc/types.hpp"

namespace survproc {

/// Plain stationary covariance kernel for exposure processes.
struct StationaryKernel {
    KernelType type = KernelType::exponential;
    double sigma2 = 1.0;
    double rho = 1.0;

    void check() const;
    double operator()(double s, double sp) const;
    Eigen::MatrixXd gram(std::span<const double> grid) const;
    Eigen::MatrixXd cross(std::span<const double> a, std::span<const double> b) const;
};

/// Nonnegative hazard link h(x). The identity link is truncated at zero,
/// which biases hazard integrals whenever paths cross the truncation point;
/// the log-linear link is the default.
struct HazardLink {
    enum class Type { loglinear, identity };
    Type type = Type::loglinear;
    double a = 0.0;
    double b = 0.0;

    double operator()(double x) const;
};

/// Continuous-time Gaussian exposure process with a hazard that depends only
/// on the current exposure value. The construction makes the survival time
/// depend on the path up to the present only.
struct ExposureModel {
    double mu0 = 0.0;
    StationaryKernel k0;
    HazardLink link;

    void check() const { k0.check(); }
};

/// Latent construction: the observed process is the zero-mean latent path
/// plus white measurement noise, and the hazard reads the latent path. Given
/// observations on a grid, the latent path is Gaussian with mean
/// K (K + noise I)^{-1} x.
struct LatentJointModel {
    StationaryKernel k;
    double noise_var = 1.0;
    HazardLink link;

    void check() const;
};

struct MCConfig {
    int n_paths = 10000;
    double grid_dt = 0.0;  ///< inner grid resolution; 0 picks t / 200
    std::uint64_t seed = 0;
    int chunks = 50;             ///< standard errors come from chunk means
    double tail_horizon = 0.0;   ///< path horizon past a censoring time; 0 picks one
    double se_warn_fraction = 0.01;

    void check() const;
};

struct MCEstimate {
    double estimate = 0.0;
    double std_error = 0.0;
    int n_paths = 0;
};

/// Conditional survival density f(t | X[ts] = x): Monte Carlo over Gaussian
/// paths conditioned on the observations (which may lie beyond t), hazard
/// integrated by the trapezoid rule on the inner grid.
MCEstimate survival_density_given_exposure(std::span<const double> ts,
                                           std::span<const double> x, double t,
                                           const ExposureModel& em, const MCConfig& mc);

/// Conditional survivor pr(T > t | X[ts] = x); value in [0, 1], exactly 1 at
/// t = 0.
MCEstimate survivor_given_exposure(std::span<const double> ts, std::span<const double> x,
                                   double t, const ExposureModel& em, const MCConfig& mc);

/// Conditional survivor for the latent construction, integrating over the
/// latent path given the noisy observations.
MCEstimate latent_conditional_survivor(std::span<const double> ts, std::span<const double> x,
                                       double t, const LatentJointModel& ljm,
                                       const MCConfig& mc);

/// Health process attached to an exposure model: the revival mean structure
/// plus a contemporaneous exposure term exposure_coef * X(s).
struct ExposureHealthModel {
    MeanModel mean;
    double exposure_coef = 0.0;
    CovarianceModel cov;
};

/// A record carrying exposure measurements (possibly post mortem) and health
/// measurements at a subset of the exposure times before death.
struct ExposureRecord {
    std::string patient_id;
    std::vector<double> exposure_times;
    std::vector<double> exposure_values;
    std::vector<double> health_times;
    std::vector<double> health_values;
    int arm = 0;
    Terminal terminal;
};

struct ExposureLoglik {
    double total = 0.0;
    double exposure_gaussian = 0.0;   ///< log density of the observed exposures
    double survival_component = 0.0;  ///< log conditional density or survivor
    double health_component = 0.0;    ///< log conditional health density
    double mc_se = 0.0;
    bool precision_warning = false;
};

/// Three-factor record log-likelihood. For a censored record with health
/// measurements the health factor averages the Gaussian density over the
/// conditional death-time law, one extra one-dimensional integral on the
/// path grid; the integral is truncated at tail_horizon past the censoring
/// time and the precision warning fires when the dropped death-time mass
/// exceeds one part in a thousand.
ExposureLoglik exposure_record_loglik(const ExposureRecord& rec, const ExposureModel& em,
                                      const ExposureHealthModel& health, const MCConfig& mc,
                                      const QuadratureConfig& qc);

struct ProbeReport {
    double base = 0.0;
    double perturbed = 0.0;
    double observation_change = 0.0;     ///< perturbed - base, common random numbers
    double observation_se = 0.0;         ///< SE of the paired difference
    double construction_change = 0.0;    ///< effect of perturbing the simulated path past t
    bool construction_bit_exact = true;  ///< construction_change is exactly zero
    std::string verdict;
};

using ProbeModel = std::variant<ExposureModel, LatentJointModel>;

/// Perturbs a future observation (ts[future_index] > t) by delta and reports
/// the change in the conditional survivor at t under common random numbers,
/// together with the construction-level check that the hazard functional
/// never reads simulated path values beyond t.
ProbeReport exogeneity_probe(const ProbeModel& model, std::span<const double> ts,
                             std::span<const double> x, double t, std::size_t future_index,
                             double delta, const MCConfig& mc);

/// Draws unconditional exposure paths on a fixed grid together with survival
/// times from their hazard (by inverting the trapezoid cumulative hazard
/// against a unit exponential). The grid covariance is factored once at
/// construction. Survival beyond the grid returns +inf.
class ExposureSimulator {
  public:
    ExposureSimulator(ExposureModel em, std::vector<double> grid);
    std::pair<Eigen::VectorXd, double> draw(Philox& rng) const;

  private:
    ExposureModel em_;
    std::vector<double> grid_;
    Eigen::MatrixXd chol_;
};

} // namespace survproc
