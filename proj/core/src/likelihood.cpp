#include "survproc/likelihood.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <numeric>
#include <thread>

#include <json.hpp>

#include "survproc/gaussian.hpp"
#include "survproc/optimize.hpp"

namespace survproc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

enum class RecordKind { death, right_censored, interval };

RecordKind classify(const PatientRecord& rec) {
    if (rec.has_trailing_flat()) return RecordKind::interval;
    return rec.terminal.is_death() ? RecordKind::death : RecordKind::right_censored;
}

/// Death-time bracket of a record with trailing absorbing values.
std::pair<double, double> death_interval(const PatientRecord& rec) {
    const std::size_t j = rec.n_real();
    const double lo = j > 0 ? rec.times[j - 1] : 0.0;
    return {lo, rec.times[j]};
}

/// log(S(a) - S(b)) computed from log survivor values.
double log_survivor_gap(const SurvivalFamily& fam, double a, double b) {
    const double lsa = fam.log_survivor(a);
    const double lsb = fam.log_survivor(b);
    const double gap = -std::expm1(lsb - lsa);
    if (!(gap > 0.0)) return -kInf;
    return lsa + std::log(gap);
}

double record_survival_term(const PatientRecord& rec, const SurvivalFamily& fam) {
    switch (classify(rec)) {
        case RecordKind::death: return fam.log_density(rec.terminal.time);
        case RecordKind::right_censored: return fam.log_survivor(rec.terminal.time);
        case RecordKind::interval: {
            const auto [a, b] = death_interval(rec);
            return log_survivor_gap(fam, a, b);
        }
    }
    return -kInf;
}

/// Runs f(i) for i in [0, n) on `workers` threads; results land in index
/// order so downstream sums are scheduling-independent.
std::vector<double> parallel_eval(std::size_t n, int workers,
                                  const std::function<double(std::size_t)>& f) {
    std::vector<double> out(n, 0.0);
    if (workers <= 1 || n < 2) {
        for (std::size_t i = 0; i < n; ++i) out[i] = f(i);
        return out;
    }
    const int nthreads = std::min<int>(workers, static_cast<int>(n));
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(nthreads));
    std::atomic<std::size_t> next{0};
    for (int w = 0; w < nthreads; ++w) {
        pool.emplace_back([&, w] {
            try {
                for (;;) {
                    const std::size_t i = next.fetch_add(1);
                    if (i >= n) break;
                    out[i] = f(i);
                }
            } catch (...) {
                errors[static_cast<std::size_t>(w)] = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    return out;
}

double ordered_sum(const std::vector<double>& v) {
    return std::accumulate(v.begin(), v.end(), 0.0);
}

double record_loglik_impl(const PatientRecord& rec, const ModelParams& mp,
                          const QuadratureConfig& qc) {
    const auto ts = rec.real_times();
    const auto y = rec.real_values();
    switch (classify(rec)) {
        case RecordKind::death:
            return JointDensityEvaluator(ts, y, rec.arm, mp).log_at(rec.terminal.time);
        case RecordKind::right_censored:
            return log_marginal_density(ts, y, rec.arm, mp, qc, rec.terminal.time);
        case RecordKind::interval:
            return log_interval_censored_mass(rec, mp, qc);
    }
    return -kInf;
}

} // namespace

double record_loglik(const PatientRecord& rec, const ModelParams& mp,
                     const QuadratureConfig& qc) {
    mp.check();
    return record_loglik_impl(rec, mp, qc);
}

double dataset_loglik(const Dataset& ds, const ModelParams& mp, const QuadratureConfig& qc,
                      int workers) {
    mp.check();
    const auto terms = parallel_eval(ds.records.size(), workers, [&](std::size_t i) {
        try {
            return record_loglik_impl(ds.records[i], mp, qc);
        } catch (const NumericError& e) {
            throw NumericError("record '" + ds.records[i].patient_id + "': " + e.what(),
                               e.achieved);
        }
    });
    return ordered_sum(terms);
}

FourFactors four_factor(const Dataset& ds, const ModelParams& mp, const QuadratureConfig& qc,
                        int workers) {
    mp.check();
    const auto logliks = parallel_eval(ds.records.size(), workers, [&](std::size_t i) {
        try {
            return record_loglik_impl(ds.records[i], mp, qc);
        } catch (const NumericError& e) {
            throw NumericError("record '" + ds.records[i].patient_id + "': " + e.what(),
                               e.achieved);
        }
    });
    FourFactors ff;
    for (std::size_t i = 0; i < ds.records.size(); ++i) {
        const auto& rec = ds.records[i];
        const double survival_part = record_survival_term(rec, mp.survival);
        if (classify(rec) == RecordKind::death) {
            ff.survival_uncensored += survival_part;
            ff.gaussian_uncensored += logliks[i] - survival_part;
        } else {
            ff.survival_censored += survival_part;
            ff.censored_remainder += logliks[i] - survival_part;
        }
    }
    return ff;
}

double survival_loglik(const Dataset& ds, const SurvivalFamily& fam) {
    fam.check();
    double acc = 0.0;
    for (const auto& rec : ds.records) acc += record_survival_term(rec, fam);
    return acc;
}

MarginalFit fit_marginal_survival(const Dataset& ds, SurvivalFamily init) {
    // Moment start: exponential rate matching deaths per unit exposure.
    std::size_t deaths = 0;
    double total_time = 0.0;
    for (const auto& rec : ds.records) {
        if (classify(rec) != RecordKind::right_censored) ++deaths;
        total_time += rec.terminal.time;
    }
    if (total_time <= 0.0) throw DataError("survival fit needs positive terminal times");
    const double rate0 = std::max(static_cast<double>(deaths), 0.5) / total_time;
    if (init.lambda.empty()) {
        switch (init.family) {
            case Family::exponential: init.lambda = {rate0}; break;
            case Family::weibull: init.lambda = {1.0, 1.0 / rate0}; break;
            case Family::gamma: init.lambda = {1.0, rate0}; break;
        }
    }
    init.check();

    const Eigen::Index p = static_cast<Eigen::Index>(init.lambda.size());
    Eigen::VectorXd x0(p);
    for (Eigen::Index i = 0; i < p; ++i) x0[i] = std::log(init.lambda[static_cast<std::size_t>(i)]);

    SurvivalFamily fam = init;
    auto objective = [&](const Eigen::VectorXd& x) {
        SurvivalFamily trial = fam;
        for (Eigen::Index i = 0; i < p; ++i) {
            trial.lambda[static_cast<std::size_t>(i)] =
                std::exp(std::clamp(x[i], -700.0, 700.0));
        }
        const double ll = survival_loglik(ds, trial);
        return std::isfinite(ll) ? -ll : kInf;
    };

    NelderMeadOptions nm;
    nm.max_iter = 2000;
    const auto res = nelder_mead(objective, x0, nm);

    MarginalFit out;
    out.family = fam;
    for (Eigen::Index i = 0; i < p; ++i) {
        out.family.lambda[static_cast<std::size_t>(i)] =
            std::exp(std::clamp(res.x[i], -700.0, 700.0));
    }
    out.loglik = -res.f;
    out.iterations = res.iterations;
    out.boundary = std::any_of(out.family.lambda.begin(), out.family.lambda.end(),
                               [](double v) { return v < 1e-7 || v > 1e7; });
    out.converged = res.converged && !out.boundary;
    if (!res.converged && !out.boundary) {
        throw ConvergenceError("marginal survival fit did not converge after " +
                               std::to_string(res.iterations) + " iterations (last loglik " +
                               std::to_string(-res.f) + ")");
    }
    return out;
}

namespace {

struct UncensoredView {
    std::vector<double> ts;
    Eigen::VectorXd y;
    double t;
    int arm;
};

std::vector<UncensoredView> uncensored_views(const Dataset& ds) {
    std::vector<UncensoredView> views;
    for (const auto& rec : ds.records) {
        if (classify(rec) != RecordKind::death || rec.n_real() == 0) continue;
        UncensoredView v;
        v.ts = rec.real_times();
        const auto yv = rec.real_values();
        v.y = Eigen::Map<const Eigen::VectorXd>(yv.data(), static_cast<Eigen::Index>(yv.size()));
        v.t = rec.terminal.time;
        v.arm = rec.arm;
        views.push_back(std::move(v));
    }
    return views;
}

/// The psi-only Gaussian factor over uncensored records.
double gaussian_factor(const std::vector<UncensoredView>& views, const MeanModel& mm,
                       const CovarianceModel& cm) {
    double acc = 0.0;
    for (const auto& v : views) {
        const auto mom = conditional_moments(v.ts, v.t, v.arm, mm, cm);
        acc += log_mvn_density(v.y, mom.mean, cholesky_psd(mom.cov));
    }
    return acc;
}

} // namespace

MeanModel fit_mean_gls(const Dataset& ds, const MeanModel& structure,
                       const CovarianceModel& cov) {
    structure.check();
    cov.check();
    const auto views = uncensored_views(ds);
    if (views.empty()) throw DataError("mean fit needs an uncensored record with measurements");

    const std::size_t n_alpha = structure.alpha.size();
    const CurveBasis basis(structure.m0);
    const std::size_t n_curve = basis.size();
    const std::size_t n_arms = structure.beta.size();
    const auto p = static_cast<Eigen::Index>(n_alpha + n_curve + (n_arms - 1));

    Eigen::MatrixXd normal = Eigen::MatrixXd::Zero(p, p);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(p);
    for (const auto& v : views) {
        const auto k = static_cast<Eigen::Index>(v.ts.size());
        Eigen::MatrixXd design(k, p);
        for (Eigen::Index r = 0; r < k; ++r) {
            const double s = v.ts[static_cast<std::size_t>(r)];
            Eigen::Index c = 0;
            double power = v.t;
            for (std::size_t a = 0; a < n_alpha; ++a) {
                design(r, c++) = power;
                power *= v.t;
            }
            const Eigen::VectorXd cb = basis(v.t - s);
            for (std::size_t b = 0; b < n_curve; ++b) design(r, c++) = cb[static_cast<Eigen::Index>(b)];
            for (std::size_t a = 1; a < n_arms; ++a) {
                design(r, c++) = v.arm == static_cast<int>(a) ? 1.0 : 0.0;
            }
        }
        const Eigen::MatrixXd chol = cholesky_psd(cov.matrix(v.ts));
        const Eigen::MatrixXd wd = chol.triangularView<Eigen::Lower>().solve(design);
        const Eigen::VectorXd wy = chol.triangularView<Eigen::Lower>().solve(v.y);
        normal.noalias() += wd.transpose() * wd;
        rhs.noalias() += wd.transpose() * wy;
    }

    const Eigen::LDLT<Eigen::MatrixXd> ldlt(normal);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
        throw NumericError("mean-model normal equations are singular");
    }
    const Eigen::VectorXd coef = ldlt.solve(rhs);

    MeanModel out = structure;
    Eigen::Index c = 0;
    for (std::size_t a = 0; a < n_alpha; ++a) out.alpha[a] = coef[c++];
    std::vector<double> curve_coef(n_curve);
    for (std::size_t b = 0; b < n_curve; ++b) curve_coef[b] = coef[c++];
    out.m0 = curve_with_coefficients(structure.m0, curve_coef);
    for (std::size_t a = 1; a < n_arms; ++a) out.beta[a] = coef[c++];
    return out;
}

namespace {

/// Covariance components on the optimizer scale.
Eigen::VectorXd pack_cov(const CovarianceModel& cm) {
    Eigen::VectorXd x(4);
    x << std::log(std::max(cm.sigma_b2, 1e-12)), std::log(std::max(cm.sigma_g2, 1e-12)),
        std::log(cm.rho), std::log(cm.sigma_e2);
    return x;
}

CovarianceModel unpack_cov(const CovarianceModel& structure, const Eigen::VectorXd& x) {
    CovarianceModel cm = structure;
    cm.sigma_b2 = std::exp(std::clamp(x[0], -700.0, 700.0));
    cm.sigma_g2 = std::exp(std::clamp(x[1], -700.0, 700.0));
    cm.rho = std::exp(std::clamp(x[2], -700.0, 700.0));
    cm.sigma_e2 = std::exp(std::clamp(x[3], -700.0, 700.0));
    return cm;
}

} // namespace

ConditionalFit fit_conditional_gaussian(const Dataset& ds, const MeanModel& mean_init,
                                        const CovarianceModel& cov_init,
                                        const FitOptions& opts) {
    const auto views = uncensored_views(ds);
    if (views.empty()) {
        throw DataError("conditional Gaussian fit needs an uncensored record with measurements");
    }

    // Moment-based candidate start: OLS residual variance split across the
    // three components, range set from the observation span.
    CovarianceModel flat = cov_init;
    flat.sigma_b2 = 0.0;
    flat.sigma_g2 = 0.0;
    flat.sigma_e2 = 1.0;
    MeanModel ols = fit_mean_gls(ds, mean_init, flat);
    double rss = 0.0;
    std::size_t n_obs = 0;
    double t_min = kInf;
    double t_max = -kInf;
    for (const auto& v : views) {
        for (std::size_t i = 0; i < v.ts.size(); ++i) {
            const double r = v.y[static_cast<Eigen::Index>(i)] - ols(v.ts[i], v.t, v.arm);
            rss += r * r;
            t_min = std::min(t_min, v.ts[i]);
            t_max = std::max(t_max, v.ts[i]);
        }
        n_obs += v.ts.size();
    }
    const double var0 = std::max(rss / static_cast<double>(n_obs), 1e-8);
    CovarianceModel moment = cov_init;
    moment.sigma_b2 = 0.3 * var0;
    moment.sigma_g2 = 0.4 * var0;
    moment.sigma_e2 = 0.3 * var0;
    moment.rho = std::max(0.25 * (t_max - t_min), 0.1);

    CovarianceModel cov = cov_init;
    try {
        cov.check();
        if (gaussian_factor(views, fit_mean_gls(ds, mean_init, moment), moment) >
            gaussian_factor(views, fit_mean_gls(ds, mean_init, cov), cov)) {
            cov = moment;
        }
    } catch (const std::exception&) {
        cov = moment;
    }

    // Alternate exact mean updates with covariance search, then polish.
    MeanModel mean = mean_init;
    int iterations = 0;
    for (int round = 0; round < 2; ++round) {
        mean = fit_mean_gls(ds, mean, cov);
        auto cov_obj = [&](const Eigen::VectorXd& x) {
            try {
                const double ll = gaussian_factor(views, mean, unpack_cov(cov, x));
                return std::isfinite(ll) ? -ll : kInf;
            } catch (const NumericError&) {
                return kInf;
            }
        };
        NelderMeadOptions nm;
        nm.max_iter = 300;
        nm.f_tol = 1e-8;
        const auto res = nelder_mead(cov_obj, pack_cov(cov), nm);
        cov = unpack_cov(cov, res.x);
        iterations += res.iterations;
    }
    mean = fit_mean_gls(ds, mean, cov);

    // Full psi polish.
    const std::size_t n_mean = mean.alpha.size() + curve_coefficients(mean.m0).size() +
                               (mean.beta.size() - 1);
    const auto p = static_cast<Eigen::Index>(n_mean + 4);
    Eigen::VectorXd x0(p);
    {
        Eigen::Index c = 0;
        for (const double a : mean.alpha) x0[c++] = a;
        for (const double v : curve_coefficients(mean.m0)) x0[c++] = v;
        for (std::size_t a = 1; a < mean.beta.size(); ++a) x0[c++] = mean.beta[a];
        x0.segment(c, 4) = pack_cov(cov);
    }
    auto unpack_psi = [&](const Eigen::VectorXd& x) {
        MeanModel mm = mean;
        Eigen::Index c = 0;
        for (std::size_t a = 0; a < mm.alpha.size(); ++a) mm.alpha[a] = x[c++];
        std::vector<double> cc(curve_coefficients(mean.m0).size());
        for (auto& v : cc) v = x[c++];
        mm.m0 = curve_with_coefficients(mean.m0, cc);
        for (std::size_t a = 1; a < mm.beta.size(); ++a) mm.beta[a] = x[c++];
        return std::pair<MeanModel, CovarianceModel>{mm, unpack_cov(cov, x.segment(c, 4))};
    };
    auto psi_obj = [&](const Eigen::VectorXd& x) {
        try {
            const auto [mm, cm] = unpack_psi(x);
            const double ll = gaussian_factor(views, mm, cm);
            return std::isfinite(ll) ? -ll : kInf;
        } catch (const NumericError&) {
            return kInf;
        }
    };

    OptimResult res;
    if (p <= 8) {
        NelderMeadOptions nm;
        nm.max_iter = opts.max_iter * 10;
        nm.init_step = 0.1;
        res = nelder_mead(psi_obj, x0, nm);
    } else {
        BfgsOptions bo;
        bo.max_iter = opts.max_iter;
        res = bfgs_fd(psi_obj, x0, bo);
    }

    ConditionalFit out;
    std::tie(out.mean, out.cov) = unpack_psi(res.x);
    out.loglik = -res.f;
    out.converged = res.converged;
    out.iterations = iterations + res.iterations;
    return out;
}

ParamPack::ParamPack(const ModelParams& structure) : structure_(structure) {
    structure_.check();
    for (const auto& n : structure_.survival.param_names()) {
        names_.push_back("lambda." + n);
        positive_.push_back(true);
    }
    for (std::size_t i = 0; i < structure_.mean.alpha.size(); ++i) {
        names_.push_back("psi.alpha" + std::to_string(i + 1));
        positive_.push_back(false);
    }
    if (std::holds_alternative<LogLinearCurve>(structure_.mean.m0)) {
        names_.push_back("psi.m0.c_log");
        names_.push_back("psi.m0.c_lin");
        positive_.push_back(false);
        positive_.push_back(false);
    } else {
        const auto& sp = std::get<NaturalSplineCurve>(structure_.mean.m0);
        for (std::size_t i = 0; i < sp.knots().size(); ++i) {
            names_.push_back("psi.m0.value" + std::to_string(i + 1));
            positive_.push_back(false);
        }
    }
    for (std::size_t a = 1; a < structure_.mean.beta.size(); ++a) {
        names_.push_back("psi.beta" + std::to_string(a));
        positive_.push_back(false);
    }
    for (const char* n : {"sigma_b2", "sigma_g2", "rho", "sigma_e2"}) {
        names_.push_back(std::string("psi.cov.") + n);
        positive_.push_back(true);
    }
    n_ = static_cast<Eigen::Index>(names_.size());
}

Eigen::VectorXd ParamPack::natural(const ModelParams& mp) const {
    Eigen::VectorXd v(n_);
    Eigen::Index c = 0;
    for (const double x : mp.survival.lambda) v[c++] = x;
    for (const double x : mp.mean.alpha) v[c++] = x;
    for (const double x : curve_coefficients(mp.mean.m0)) v[c++] = x;
    for (std::size_t a = 1; a < mp.mean.beta.size(); ++a) v[c++] = mp.mean.beta[a];
    v[c++] = mp.cov.sigma_b2;
    v[c++] = mp.cov.sigma_g2;
    v[c++] = mp.cov.rho;
    v[c++] = mp.cov.sigma_e2;
    return v;
}

ModelParams ParamPack::from_natural(const Eigen::VectorXd& v) const {
    if (v.size() != n_) throw ConfigError("parameter vector has wrong length");
    ModelParams mp = structure_;
    Eigen::Index c = 0;
    for (auto& x : mp.survival.lambda) x = v[c++];
    for (auto& x : mp.mean.alpha) x = v[c++];
    std::vector<double> cc(curve_coefficients(structure_.mean.m0).size());
    for (auto& x : cc) x = v[c++];
    mp.mean.m0 = curve_with_coefficients(structure_.mean.m0, cc);
    for (std::size_t a = 1; a < mp.mean.beta.size(); ++a) mp.mean.beta[a] = v[c++];
    mp.cov.sigma_b2 = v[c++];
    mp.cov.sigma_g2 = v[c++];
    mp.cov.rho = v[c++];
    mp.cov.sigma_e2 = v[c++];
    return mp;
}

Eigen::VectorXd ParamPack::pack(const ModelParams& mp) const {
    Eigen::VectorXd v = natural(mp);
    for (Eigen::Index i = 0; i < n_; ++i) {
        if (positive_[static_cast<std::size_t>(i)]) v[i] = std::log(std::max(v[i], 1e-300));
    }
    return v;
}

ModelParams ParamPack::unpack(const Eigen::VectorXd& x) const {
    Eigen::VectorXd v = x;
    for (Eigen::Index i = 0; i < n_; ++i) {
        if (positive_[static_cast<std::size_t>(i)]) {
            v[i] = std::exp(std::clamp(v[i], -700.0, 700.0));
        }
    }
    return from_natural(v);
}

FitResult fit_joint(const Dataset& ds, const ModelParams& init, const QuadratureConfig& qc,
                    const FitOptions& opts) {
    init.check();
    const ParamPack pack(init);
    const Eigen::VectorXd x0 = pack.pack(init);

    double best_f = kInf;
    Eigen::VectorXd best_x = x0;
    auto objective = [&](const Eigen::VectorXd& x) {
        double f;
        try {
            f = -dataset_loglik(ds, pack.unpack(x), opts.fit_qc, opts.workers);
        } catch (const NumericError&) {
            return kInf;
        }
        if (!std::isfinite(f)) return kInf;
        if (f < best_f) {
            best_f = f;
            best_x = x;
        }
        return f;
    };

    OptimResult res;
    if (pack.size() <= 8) {
        NelderMeadOptions nm;
        nm.max_iter = opts.max_iter * 10;
        nm.init_step = 0.05;
        res = nelder_mead(objective, x0, nm);
    } else {
        BfgsOptions bo;
        bo.max_iter = opts.max_iter;
        bo.fd_step = 1e-5;
        res = bfgs_fd(objective, x0, bo);
    }

    FitResult out;
    out.param_names = pack.names();
    out.converged = res.converged;
    out.iterations = res.iterations;

    ModelParams fitted = pack.unpack(best_x);
    double fitted_ll = dataset_loglik(ds, fitted, qc, opts.workers);
    const double init_ll = dataset_loglik(ds, init, qc, opts.workers);
    if (init_ll > fitted_ll) {
        fitted = init;
        fitted_ll = init_ll;
        out.converged = false;
    }
    out.params = fitted;
    out.loglik = fitted_ll;
    out.factors = four_factor(ds, fitted, qc, opts.workers);

    // Observed information on the natural scale.
    const Eigen::VectorXd theta = pack.natural(fitted);
    Eigen::VectorXd max_step(pack.size());
    for (Eigen::Index i = 0; i < pack.size(); ++i) {
        max_step[i] = pack.is_positive(i) ? 0.25 * theta[i] : 0.0;
        if (theta[i] < 1e-6 && pack.is_positive(i)) {
            out.boundary.push_back(pack.names()[static_cast<std::size_t>(i)]);
        }
    }
    auto natural_obj = [&](const Eigen::VectorXd& v) {
        try {
            const ModelParams mp = pack.from_natural(v);
            mp.check();
            const double ll = dataset_loglik(ds, mp, opts.fit_qc, opts.workers);
            return std::isfinite(ll) ? -ll : kInf;
        } catch (const std::exception&) {
            return kInf;
        }
    };
    const Eigen::MatrixXd info = fd_hessian(natural_obj, theta, 1e-3, max_step);
    out.std_errors = Eigen::VectorXd::Constant(pack.size(),
                                               std::numeric_limits<double>::quiet_NaN());
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
    if (info.allFinite() && ldlt.info() == Eigen::Success && ldlt.isPositive()) {
        const Eigen::MatrixXd cov =
            ldlt.solve(Eigen::MatrixXd::Identity(pack.size(), pack.size()));
        bool ok = true;
        for (Eigen::Index i = 0; i < pack.size(); ++i) ok = ok && cov(i, i) > 0.0;
        if (ok) {
            for (Eigen::Index i = 0; i < pack.size(); ++i) {
                out.std_errors[i] = std::sqrt(cov(i, i));
            }
        } else {
            out.information_singular = true;
        }
    } else {
        out.information_singular = true;
    }
    return out;
}

FitResult fit_staged_then_joint(const Dataset& ds, const ModelParams& structure,
                                const QuadratureConfig& qc, const FitOptions& opts) {
    const MarginalFit marginal = fit_marginal_survival(ds, structure.survival);
    const ConditionalFit cond =
        fit_conditional_gaussian(ds, structure.mean, structure.cov, opts);
    ModelParams init = structure;
    init.survival = marginal.family;
    init.mean = cond.mean;
    init.cov = cond.cov;
    return fit_joint(ds, init, qc, opts);
}

namespace {

/// Expectation of fn(t) under the survival law truncated to (lo, hi).
double truncated_expectation(const SurvivalFamily& fam,
                             const std::function<double(double)>& fn, double lo, double hi,
                             double log_norm, const QuadratureConfig& qc) {
    auto integrand = [&](double t) {
        const double w = std::exp(fam.log_density(t) - log_norm);
        return w * fn(t);
    };
    IntegralResult res;
    if (std::isinf(hi)) {
        const double c = qc.tail_scale;
        auto mapped = [&](double u) {
            const double om = 1.0 - u;
            const double t = lo + c * u / om;
            return integrand(t) * c / (om * om);
        };
        res = integrate_adaptive(mapped, 0.0, 1.0, qc);
    } else {
        res = integrate_adaptive(integrand, lo, hi, qc);
    }
    require_converged(res, "compatibility expectation");
    return res.value;
}

} // namespace

CompatibilityReport censored_compatibility(const Dataset& ds, const ModelParams& mp,
                                           const QuadratureConfig& qc, int workers) {
    mp.check();
    CompatibilityReport report;

    std::vector<std::size_t> usable;
    for (std::size_t i = 0; i < ds.records.size(); ++i) {
        if (ds.records[i].n_real() == 0) {
            report.skipped.push_back(ds.records[i].patient_id);
        } else {
            usable.push_back(i);
        }
    }

    const auto pits = parallel_eval(usable.size(), workers, [&](std::size_t u) {
        const auto& rec = ds.records[usable[u]];
        const auto ts = rec.real_times();
        const auto yv = rec.real_values();
        const double sum_y = std::accumulate(yv.begin(), yv.end(), 0.0);
        const auto k = static_cast<double>(ts.size());

        const Eigen::MatrixXd sigma = mp.cov.matrix(ts);
        const double ones_sigma_ones = sigma.sum();
        const double sd_given_t = std::sqrt(ones_sigma_ones);

        auto sum_mean = [&](double t) {
            double g = k * (mp.mean.alpha_at(t) + mp.mean.beta_for(rec.arm));
            for (const double s : ts) g += evaluate_curve(mp.mean.m0, t - s);
            return g;
        };

        if (classify(rec) == RecordKind::death) {
            const double u_val = (sum_y - sum_mean(rec.terminal.time)) / sd_given_t;
            return normal_cdf(u_val);
        }

        double lo;
        double hi;
        if (classify(rec) == RecordKind::interval) {
            std::tie(lo, hi) = death_interval(rec);
        } else {
            lo = std::max(rec.terminal.time, ts.back());
            hi = kInf;
        }
        const double log_norm = std::isinf(hi)
                                    ? mp.survival.log_survivor(lo)
                                    : log_survivor_gap(mp.survival, lo, hi);
        const double mean_g =
            truncated_expectation(mp.survival, sum_mean, lo, hi, log_norm, qc);
        const double mean_g2 = truncated_expectation(
            mp.survival, [&](double t) { const double g = sum_mean(t); return g * g; }, lo,
            hi, log_norm, qc);
        const double var_g = std::max(mean_g2 - mean_g * mean_g, 0.0);
        const double s_total = std::sqrt(ones_sigma_ones + var_g);
        const double u_obs = (sum_y - mean_g) / s_total;
        // Exact probability transform under the Gaussian mixture over the
        // truncated survival law.
        const double pit = truncated_expectation(
            mp.survival,
            [&](double t) {
                return normal_cdf((u_obs * s_total - (sum_mean(t) - mean_g)) / sd_given_t);
            },
            lo, hi, log_norm, qc);
        return std::min(std::max(pit, 1e-15), 1.0 - 1e-15);
    });

    for (std::size_t u = 0; u < usable.size(); ++u) {
        const auto& rec = ds.records[usable[u]];
        CompatibilityEntry e;
        e.patient_id = rec.patient_id;
        e.censored = classify(rec) != RecordKind::death;
        e.pit = pits[u];
        e.z = normal_quantile(e.pit);
        report.entries.push_back(std::move(e));
        if (report.entries.back().censored) {
            ++report.n_censored;
        } else {
            ++report.n_uncensored;
        }
    }

    if (report.n_censored == 0 || report.n_uncensored == 0) {
        report.entries.clear();
        return report;
    }

    // Wilcoxon rank-sum of censored PITs within the pooled sample.
    std::vector<std::size_t> order(report.entries.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return report.entries[a].pit < report.entries[b].pit;
    });
    double rank_sum = 0.0;
    for (std::size_t r = 0; r < order.size(); ++r) {
        if (report.entries[order[r]].censored) rank_sum += static_cast<double>(r + 1);
    }
    const double nc = report.n_censored;
    const double nu = report.n_uncensored;
    const double n = nc + nu;
    const double mean_w = nc * (n + 1.0) / 2.0;
    const double sd_w = std::sqrt(nc * nu * (n + 1.0) / 12.0);
    report.rank_sum_z = (rank_sum - mean_w) / sd_w;
    report.aggregate_defined = true;
    report.flagged = std::abs(report.rank_sum_z) > 1.96;
    return report;
}

std::string fit_result_to_json_text(const FitResult& fr) {
    nlohmann::json j;
    j["params"] = nlohmann::json::parse(model_params_to_json_text(fr.params));
    j["converged"] = fr.converged;
    j["iterations"] = fr.iterations;
    j["loglik"] = fr.loglik;
    j["four_factors"] = {{"survival_uncensored", fr.factors.survival_uncensored},
                         {"survival_censored", fr.factors.survival_censored},
                         {"gaussian_uncensored", fr.factors.gaussian_uncensored},
                         {"censored_remainder", fr.factors.censored_remainder},
                         {"total", fr.factors.total()}};
    nlohmann::json se = nlohmann::json::object();
    for (std::size_t i = 0; i < fr.param_names.size(); ++i) {
        const double v = fr.std_errors.size() > static_cast<Eigen::Index>(i)
                             ? fr.std_errors[static_cast<Eigen::Index>(i)]
                             : std::numeric_limits<double>::quiet_NaN();
        se[fr.param_names[i]] = std::isfinite(v) ? nlohmann::json(v) : nlohmann::json();
    }
    j["std_errors"] = se;
    j["information_singular"] = fr.information_singular;
    j["boundary"] = fr.boundary;
    return j.dump(2);
}

FitResult fit_result_from_json_text(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("fit result JSON parse failure: ") + e.what());
    }
    try {
        FitResult fr;
        fr.params = model_params_from_json_text(j.at("params").dump());
        fr.converged = j.at("converged").get<bool>();
        fr.iterations = j.at("iterations").get<int>();
        fr.loglik = j.at("loglik").get<double>();
        const auto& ff = j.at("four_factors");
        fr.factors.survival_uncensored = ff.at("survival_uncensored").get<double>();
        fr.factors.survival_censored = ff.at("survival_censored").get<double>();
        fr.factors.gaussian_uncensored = ff.at("gaussian_uncensored").get<double>();
        fr.factors.censored_remainder = ff.at("censored_remainder").get<double>();
        const auto& se = j.at("std_errors");
        const ParamPack pack(fr.params);
        fr.param_names = pack.names();
        fr.std_errors = Eigen::VectorXd::Constant(pack.size(),
                                                  std::numeric_limits<double>::quiet_NaN());
        for (Eigen::Index i = 0; i < pack.size(); ++i) {
            const auto& v = se.at(fr.param_names[static_cast<std::size_t>(i)]);
            if (!v.is_null()) fr.std_errors[i] = v.get<double>();
        }
        fr.information_singular = j.at("information_singular").get<bool>();
        fr.boundary = j.at("boundary").get<std::vector<std::string>>();
        return fr;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("fit result JSON missing field: ") + e.what());
    }
}

} // namespace survproc
