#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "survproc/density.hpp"
#include "survproc/model.hpp"
#include "survproc/types.hpp"

namespace survproc {

/// The log-likelihood split into its four factors: the marginal survival
/// terms for uncensored and censored records, the conditional Gaussian term
/// for uncensored records, and the censored remainder. The sum equals the
/// total log-likelihood identically; `gaussian_uncensored` involves psi only
/// and `survival_*` involve lambda only.
///
/// Records with an interval-bracketed death contribute their survival
/// interval mass log(S(a) - S(b)) to `survival_censored`, keeping that term
/// lambda-only and the identity exact.
struct FourFactors {
    double survival_uncensored = 0.0;  ///< sum over deaths of log f(t)
    double survival_censored = 0.0;    ///< sum over censored of log S(t)
    double gaussian_uncensored = 0.0;  ///< sum over deaths of log q - log f
    double censored_remainder = 0.0;   ///< sum over censored of log p - log S

    double total() const {
        return survival_uncensored + survival_censored + gaussian_uncensored +
               censored_remainder;
    }
};

/// log q for a record with observed death, log of the tail integral above
/// the censoring time for a right-censored record, and the log interval mass
/// for a record with trailing absorbing values.
double record_loglik(const PatientRecord& rec, const ModelParams& mp,
                     const QuadratureConfig& qc);

/// Sum of record log-likelihoods. Per-record terms are evaluated on
/// `workers` threads and summed in record order, so the value does not
/// depend on scheduling. A failing record aborts with its patient id.
double dataset_loglik(const Dataset& ds, const ModelParams& mp, const QuadratureConfig& qc,
                      int workers = 1);

FourFactors four_factor(const Dataset& ds, const ModelParams& mp, const QuadratureConfig& qc,
                        int workers = 1);

/// Marginal survival part of the likelihood (the lambda-only factors),
/// evaluated without any Gaussian machinery.
double survival_loglik(const Dataset& ds, const SurvivalFamily& fam);

struct MarginalFit {
    SurvivalFamily family;
    double loglik = 0.0;
    bool converged = false;
    bool boundary = false;  ///< an estimate ran to the edge of the admissible region
    int iterations = 0;
};

/// Censored-data parametric MLE of the survival family. `init` supplies the
/// family and a starting point (its parameter values may be empty, in which
/// case a moment-based start is used). Throws ConvergenceError when the
/// optimizer exhausts its budget away from a boundary.
MarginalFit fit_marginal_survival(const Dataset& ds, SurvivalFamily init);

/// Generalized least squares for the mean parameters with the covariance
/// held fixed: exact normal-equations solve over the uncensored records.
/// Returns the fitted mean model; `structure` fixes alpha order, curve type
/// and knots, and the number of arms.
MeanModel fit_mean_gls(const Dataset& ds, const MeanModel& structure,
                       const CovarianceModel& cov);

struct ConditionalFit {
    MeanModel mean;
    CovarianceModel cov;
    double loglik = 0.0;  ///< the Gaussian factor at the fit
    bool converged = false;
    int iterations = 0;
};

struct FitOptions {
    int workers = 1;
    /// Quadrature used inside optimizer iterations; looser than reporting
    /// accuracy by default.
    QuadratureConfig fit_qc{1e-7, 1e-12, 60, 1.0};
    int max_iter = 400;
};

/// Maximizes the uncensored conditional Gaussian factor over psi. Lambda
/// never enters. Alternates exact GLS mean updates with covariance search,
/// then polishes all parameters jointly.
ConditionalFit fit_conditional_gaussian(const Dataset& ds, const MeanModel& mean_init,
                                        const CovarianceModel& cov_init,
                                        const FitOptions& opts = {});

struct FitResult {
    ModelParams params;
    bool converged = false;
    double loglik = 0.0;
    int iterations = 0;
    FourFactors factors;
    std::vector<std::string> param_names;
    Eigen::VectorXd std_errors;  ///< natural scale; NaN when information is singular
    bool information_singular = false;
    std::vector<std::string> boundary;  ///< parameters at the admissible edge
};

/// Joint maximum likelihood over theta = (lambda, psi), started from `init`
/// (normally the staged estimates). Simplex search up to 8 free parameters,
/// quasi-Newton with finite-difference gradients above. Standard errors come
/// from the finite-difference observed information; a singular information
/// matrix is reported, not pseudo-inverted.
FitResult fit_joint(const Dataset& ds, const ModelParams& init, const QuadratureConfig& qc,
                    const FitOptions& opts = {});

/// Staged pipeline: marginal survival fit, conditional Gaussian fit, then
/// the joint fit initialized at the staged estimates.
FitResult fit_staged_then_joint(const Dataset& ds, const ModelParams& structure,
                                const QuadratureConfig& qc, const FitOptions& opts = {});

struct CompatibilityEntry {
    std::string patient_id;
    bool censored = false;
    double pit = 0.0;  ///< probability integral transform, U(0,1) under the model
    double z = 0.0;    ///< normal score of the transform
};

/// Checks whether the health process of censored records is compatible with
/// the law fitted from uncensored ones. Each record is reduced to the exact
/// probability transform of a linear summary of its measurements (for
/// censored records under the Gaussian mixture over the truncated survival
/// law), and the censored and uncensored transform samples are compared by
/// a Wilcoxon rank-sum statistic.
struct CompatibilityReport {
    std::vector<CompatibilityEntry> entries;
    std::vector<std::string> skipped;  ///< records with no measurements
    int n_censored = 0;
    int n_uncensored = 0;
    bool aggregate_defined = false;
    double rank_sum_z = 0.0;  ///< approximately N(0,1) under compatibility
    bool flagged = false;     ///< |rank_sum_z| > 1.96
};

CompatibilityReport censored_compatibility(const Dataset& ds, const ModelParams& mp,
                                           const QuadratureConfig& qc, int workers = 1);

/// Maps a parameter structure to and from flat vectors: the optimizer works
/// on a log-transformed copy of every positivity-constrained coordinate,
/// standard errors and Hessians on the natural scale.
class ParamPack {
  public:
    explicit ParamPack(const ModelParams& structure);

    Eigen::Index size() const { return n_; }
    std::vector<std::string> names() const { return names_; }

    Eigen::VectorXd pack(const ModelParams& mp) const;      ///< optimizer scale
    ModelParams unpack(const Eigen::VectorXd& x) const;
    Eigen::VectorXd natural(const ModelParams& mp) const;   ///< original scale
    ModelParams from_natural(const Eigen::VectorXd& v) const;
    bool is_positive(Eigen::Index i) const { return positive_[static_cast<std::size_t>(i)]; }

  private:
    ModelParams structure_;
    Eigen::Index n_ = 0;
    std::vector<std::string> names_;
    std::vector<bool> positive_;
};

std::string fit_result_to_json_text(const FitResult& fr);
FitResult fit_result_from_json_text(const std::string& text);

} // namespace survproc
