#include "survproc/exposure.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "survproc/gaussian.hpp"

namespace survproc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kTimeTol = 1e-9;

std::vector<double> build_grid(double t_end, double dt, std::span<const double> extra) {
    std::vector<double> g;
    g.push_back(0.0);
    if (t_end > 0.0) {
        const auto steps = static_cast<std::size_t>(std::ceil(t_end / dt - 1e-9));
        for (std::size_t i = 1; i <= steps; ++i) g.push_back(std::min(i * dt, t_end));
        if (g.back() < t_end - kTimeTol) g.push_back(t_end);
    }
    for (const double s : extra) {
        if (s >= -kTimeTol && s <= t_end + kTimeTol) g.push_back(std::clamp(s, 0.0, t_end));
    }
    std::sort(g.begin(), g.end());
    std::vector<double> out;
    for (const double v : g) {
        if (out.empty() || v - out.back() > kTimeTol) out.push_back(v);
    }
    return out;
}

std::size_t index_of(const std::vector<double>& grid, double t) {
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (std::abs(grid[i] - t) <= kTimeTol) return i;
    }
    throw NumericError("time " + std::to_string(t) + " is not a grid node");
}

/// Gaussian law of the path on the free grid nodes, conditioned on the
/// observations; nodes pinned exactly by a noise-free observation are fixed.
struct PathLaw {
    std::vector<double> grid;
    std::vector<std::size_t> free_nodes;
    std::vector<std::pair<std::size_t, double>> fixed_nodes;
    Eigen::VectorXd mean;
    Eigen::MatrixXd chol;

    Eigen::VectorXd assemble(Philox& rng) const {
        Eigen::VectorXd full(static_cast<Eigen::Index>(grid.size()));
        if (!free_nodes.empty()) {
            Eigen::VectorXd z(mean.size());
            for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = rng.normal();
            const Eigen::VectorXd v = mean + chol.triangularView<Eigen::Lower>() * z;
            for (std::size_t i = 0; i < free_nodes.size(); ++i) {
                full[static_cast<Eigen::Index>(free_nodes[i])] = v[static_cast<Eigen::Index>(i)];
            }
        }
        for (const auto& [idx, val] : fixed_nodes) {
            full[static_cast<Eigen::Index>(idx)] = val;
        }
        return full;
    }
};

PathLaw exposure_law(const ExposureModel& em, std::span<const double> ts,
                     std::span<const double> x, std::vector<double> grid) {
    PathLaw law;
    law.grid = std::move(grid);

    std::vector<bool> is_fixed(law.grid.size(), false);
    for (std::size_t j = 0; j < ts.size(); ++j) {
        for (std::size_t i = 0; i < law.grid.size(); ++i) {
            if (std::abs(law.grid[i] - ts[j]) <= kTimeTol) {
                if (!is_fixed[i]) law.fixed_nodes.emplace_back(i, x[j]);
                is_fixed[i] = true;
            }
        }
    }
    std::vector<double> free_times;
    for (std::size_t i = 0; i < law.grid.size(); ++i) {
        if (!is_fixed[i]) {
            law.free_nodes.push_back(i);
            free_times.push_back(law.grid[i]);
        }
    }
    const auto nf = static_cast<Eigen::Index>(free_times.size());
    if (nf == 0) return law;

    if (ts.empty()) {
        law.mean = Eigen::VectorXd::Constant(nf, em.mu0);
        law.chol = cholesky_psd(em.k0.gram(free_times));
        return law;
    }
    const Eigen::MatrixXd k_oo = em.k0.gram(ts);
    const Eigen::MatrixXd k_fo = em.k0.cross(free_times, ts);
    const Eigen::MatrixXd chol_o = cholesky_psd(k_oo);
    const Eigen::VectorXd resid =
        Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size())) -
        Eigen::VectorXd::Constant(static_cast<Eigen::Index>(ts.size()), em.mu0);
    // Solve K_oo^{-1} via the factor in two triangular passes.
    const Eigen::MatrixXd w = chol_o.triangularView<Eigen::Lower>().solve(k_fo.transpose());
    const Eigen::VectorXd u = chol_o.triangularView<Eigen::Lower>().solve(resid);
    law.mean = Eigen::VectorXd::Constant(nf, em.mu0) + w.transpose() * u;
    const Eigen::MatrixXd cov = em.k0.gram(free_times) - w.transpose() * w;
    law.chol = cholesky_psd(cov);
    return law;
}

PathLaw latent_law(const LatentJointModel& ljm, std::span<const double> ts,
                   std::span<const double> x, std::vector<double> grid) {
    PathLaw law;
    law.grid = std::move(grid);
    law.free_nodes.resize(law.grid.size());
    for (std::size_t i = 0; i < law.grid.size(); ++i) law.free_nodes[i] = i;
    const auto nf = static_cast<Eigen::Index>(law.grid.size());

    if (ts.empty()) {
        law.mean = Eigen::VectorXd::Zero(nf);
        law.chol = cholesky_psd(ljm.k.gram(law.grid));
        return law;
    }
    Eigen::MatrixXd k_oo = ljm.k.gram(ts);
    k_oo.diagonal().array() += ljm.noise_var;
    const Eigen::MatrixXd k_fo = ljm.k.cross(law.grid, ts);
    const Eigen::MatrixXd chol_o = cholesky_psd(k_oo);
    const Eigen::MatrixXd w = chol_o.triangularView<Eigen::Lower>().solve(k_fo.transpose());
    const Eigen::VectorXd u = chol_o.triangularView<Eigen::Lower>().solve(
        Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size())));
    law.mean = w.transpose() * u;
    const Eigen::MatrixXd cov = ljm.k.gram(law.grid) - w.transpose() * w;
    law.chol = cholesky_psd(cov);
    return law;
}

/// exp(-trapezoid hazard up to grid[limit]), optionally times the hazard at
/// the endpoint. Reads path values at indices <= limit only.
double hazard_functional(const Eigen::VectorXd& path, const std::vector<double>& grid,
                         std::size_t limit, const HazardLink& link, bool want_density) {
    double cum = 0.0;
    double h_prev = link(path[0]);
    for (std::size_t i = 1; i <= limit; ++i) {
        const double h_i = link(path[static_cast<Eigen::Index>(i)]);
        cum += 0.5 * (h_prev + h_i) * (grid[i] - grid[i - 1]);
        h_prev = h_i;
    }
    double v = std::exp(-cum);
    if (want_density) v *= h_prev;
    return v;
}

struct ChunkLayout {
    int chunks;
    int chunk_size;
    int n_paths;
};

ChunkLayout layout(const MCConfig& mc) {
    const int c = std::max(2, std::min(mc.chunks, mc.n_paths));
    const int size = std::max(1, mc.n_paths / c);
    return {c, size, c * size};
}

MCEstimate run_mc(const PathLaw& law, std::size_t limit, const HazardLink& link,
                  bool want_density, const MCConfig& mc) {
    const ChunkLayout lay = layout(mc);
    double total = 0.0;
    double chunk_sq = 0.0;
    for (int c = 0; c < lay.chunks; ++c) {
        double chunk_sum = 0.0;
        for (int p = 0; p < lay.chunk_size; ++p) {
            const std::uint64_t path_index =
                static_cast<std::uint64_t>(c) * static_cast<std::uint64_t>(lay.chunk_size) + p;
            Philox rng(mc.seed, path_index + 1);
            const Eigen::VectorXd path = law.assemble(rng);
            chunk_sum += hazard_functional(path, law.grid, limit, link, want_density);
        }
        total += chunk_sum;
        const double cm = chunk_sum / lay.chunk_size;
        chunk_sq += cm * cm;
    }
    MCEstimate est;
    est.n_paths = lay.n_paths;
    est.estimate = total / lay.n_paths;
    const double var_chunk =
        std::max(0.0, (chunk_sq - lay.chunks * est.estimate * est.estimate) /
                          (lay.chunks - 1.0));
    est.std_error = std::sqrt(var_chunk / lay.chunks);
    return est;
}

/// Same draws against two mean vectors sharing one covariance factor;
/// returns both estimates and the paired-difference standard error.
struct PairedMC {
    MCEstimate base;
    MCEstimate perturbed;
    double diff = 0.0;
    double diff_se = 0.0;
};

PairedMC run_mc_paired(const PathLaw& base, const PathLaw& perturbed, std::size_t limit,
                       const HazardLink& link, bool want_density, const MCConfig& mc) {
    const ChunkLayout lay = layout(mc);
    double tot_a = 0.0;
    double tot_b = 0.0;
    double tot_d = 0.0;
    double sq_a = 0.0;
    double sq_b = 0.0;
    double sq_d = 0.0;
    Eigen::VectorXd shift(base.mean.size());
    shift = perturbed.mean - base.mean;
    for (int c = 0; c < lay.chunks; ++c) {
        double ca = 0.0;
        double cb = 0.0;
        for (int p = 0; p < lay.chunk_size; ++p) {
            const std::uint64_t path_index =
                static_cast<std::uint64_t>(c) * static_cast<std::uint64_t>(lay.chunk_size) + p;
            Philox rng(mc.seed, path_index + 1);
            Eigen::VectorXd path = base.assemble(rng);
            ca += hazard_functional(path, base.grid, limit, link, want_density);
            for (std::size_t i = 0; i < base.free_nodes.size(); ++i) {
                path[static_cast<Eigen::Index>(base.free_nodes[i])] +=
                    shift[static_cast<Eigen::Index>(i)];
            }
            for (const auto& [idx, val] : perturbed.fixed_nodes) {
                path[static_cast<Eigen::Index>(idx)] = val;
            }
            cb += hazard_functional(path, base.grid, limit, link, want_density);
        }
        tot_a += ca;
        tot_b += cb;
        tot_d += cb - ca;
        const double ma = ca / lay.chunk_size;
        const double mb = cb / lay.chunk_size;
        sq_a += ma * ma;
        sq_b += mb * mb;
        sq_d += (mb - ma) * (mb - ma);
    }
    auto finish = [&](double tot, double sq) {
        MCEstimate e;
        e.n_paths = lay.n_paths;
        e.estimate = tot / lay.n_paths;
        const double var_chunk =
            std::max(0.0, (sq - lay.chunks * e.estimate * e.estimate) / (lay.chunks - 1.0));
        e.std_error = std::sqrt(var_chunk / lay.chunks);
        return e;
    };
    PairedMC out;
    out.base = finish(tot_a, sq_a);
    out.perturbed = finish(tot_b, sq_b);
    out.diff = tot_d / lay.n_paths;
    const double md = out.diff;
    const double var_chunk =
        std::max(0.0, (sq_d - lay.chunks * md * md) / (lay.chunks - 1.0));
    out.diff_se = std::sqrt(var_chunk / lay.chunks);
    return out;
}

double pick_dt(double t_end, const MCConfig& mc) {
    if (mc.grid_dt > 0.0) return mc.grid_dt;
    return t_end > 0.0 ? t_end / 200.0 : 1.0;
}

} // namespace

void StationaryKernel::check() const {
    if (!(sigma2 > 0.0)) throw ConfigError("kernel variance must be positive");
    if (!(rho > 0.0)) throw ConfigError("kernel range must be positive");
}

double StationaryKernel::operator()(double s, double sp) const {
    const double d = std::abs(s - sp) / rho;
    if (type == KernelType::exponential) return sigma2 * std::exp(-d);
    const double a = std::sqrt(3.0) * d;
    return sigma2 * (1.0 + a) * std::exp(-a);
}

Eigen::MatrixXd StationaryKernel::gram(std::span<const double> grid) const {
    const auto n = static_cast<Eigen::Index>(grid.size());
    Eigen::MatrixXd k(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j <= i; ++j) {
            const double v = (*this)(grid[static_cast<std::size_t>(i)],
                                     grid[static_cast<std::size_t>(j)]);
            k(i, j) = v;
            k(j, i) = v;
        }
    }
    return k;
}

Eigen::MatrixXd StationaryKernel::cross(std::span<const double> a,
                                        std::span<const double> b) const {
    Eigen::MatrixXd k(static_cast<Eigen::Index>(a.size()), static_cast<Eigen::Index>(b.size()));
    for (Eigen::Index i = 0; i < k.rows(); ++i) {
        for (Eigen::Index j = 0; j < k.cols(); ++j) {
            k(i, j) = (*this)(a[static_cast<std::size_t>(i)], b[static_cast<std::size_t>(j)]);
        }
    }
    return k;
}

double HazardLink::operator()(double x) const {
    if (type == Type::loglinear) return std::exp(std::clamp(a + b * x, -700.0, 700.0));
    return std::max(0.0, a + b * x);
}

void LatentJointModel::check() const {
    k.check();
    if (!(noise_var >= 0.0)) throw ConfigError("noise variance must be nonnegative");
}

void MCConfig::check() const {
    if (n_paths < 1) throw ConfigError("n_paths must be >= 1");
    if (grid_dt < 0.0) throw ConfigError("grid_dt must be nonnegative");
    if (chunks < 2) throw ConfigError("chunks must be >= 2");
    if (tail_horizon < 0.0) throw ConfigError("tail_horizon must be nonnegative");
}

MCEstimate survival_density_given_exposure(std::span<const double> ts,
                                           std::span<const double> x, double t,
                                           const ExposureModel& em, const MCConfig& mc) {
    em.check();
    mc.check();
    if (ts.size() != x.size()) throw DataError("one exposure value per observation time");
    if (!(t > 0.0)) throw DataError("conditional survival density needs t > 0");
    const PathLaw law = exposure_law(em, ts, x, build_grid(t, pick_dt(t, mc), ts));
    return run_mc(law, index_of(law.grid, t), em.link, true, mc);
}

MCEstimate survivor_given_exposure(std::span<const double> ts, std::span<const double> x,
                                   double t, const ExposureModel& em, const MCConfig& mc) {
    em.check();
    mc.check();
    if (ts.size() != x.size()) throw DataError("one exposure value per observation time");
    if (t < 0.0) throw DataError("survivor needs t >= 0");
    if (t == 0.0) return {1.0, 0.0, mc.n_paths};
    const PathLaw law = exposure_law(em, ts, x, build_grid(t, pick_dt(t, mc), ts));
    MCEstimate est = run_mc(law, index_of(law.grid, t), em.link, false, mc);
    est.estimate = std::clamp(est.estimate, 0.0, 1.0);
    return est;
}

MCEstimate latent_conditional_survivor(std::span<const double> ts, std::span<const double> x,
                                       double t, const LatentJointModel& ljm,
                                       const MCConfig& mc) {
    ljm.check();
    mc.check();
    if (ts.size() != x.size()) throw DataError("one observation value per time");
    if (t < 0.0) throw DataError("survivor needs t >= 0");
    if (t == 0.0) return {1.0, 0.0, mc.n_paths};
    const PathLaw law = latent_law(ljm, ts, x, build_grid(t, pick_dt(t, mc), {}));
    MCEstimate est = run_mc(law, index_of(law.grid, t), ljm.link, false, mc);
    est.estimate = std::clamp(est.estimate, 0.0, 1.0);
    return est;
}

ExposureLoglik exposure_record_loglik(const ExposureRecord& rec, const ExposureModel& em,
                                      const ExposureHealthModel& health, const MCConfig& mc,
                                      const QuadratureConfig& qc) {
    em.check();
    health.mean.check();
    health.cov.check();
    mc.check();
    qc.check();
    if (rec.exposure_times.size() != rec.exposure_values.size()) {
        throw DataError("one exposure value per exposure time");
    }
    if (rec.health_times.size() != rec.health_values.size()) {
        throw DataError("one health value per health time");
    }

    ExposureLoglik out;

    // Exposure Gaussian factor.
    if (!rec.exposure_times.empty()) {
        const Eigen::MatrixXd chol = cholesky_psd(em.k0.gram(rec.exposure_times));
        const Eigen::VectorXd xv = Eigen::Map<const Eigen::VectorXd>(
            rec.exposure_values.data(), static_cast<Eigen::Index>(rec.exposure_values.size()));
        out.exposure_gaussian = log_mvn_density(
            xv, Eigen::VectorXd::Constant(xv.size(), em.mu0), chol);
    }

    // Contemporaneous exposure at each health time.
    std::vector<double> x_at_health(rec.health_times.size());
    for (std::size_t i = 0; i < rec.health_times.size(); ++i) {
        bool found = false;
        for (std::size_t j = 0; j < rec.exposure_times.size(); ++j) {
            if (std::abs(rec.health_times[i] - rec.exposure_times[j]) <= kTimeTol) {
                x_at_health[i] = rec.exposure_values[j];
                found = true;
                break;
            }
        }
        if (!found) {
            throw DataError("health measurement at time " +
                            std::to_string(rec.health_times[i]) +
                            " has no contemporaneous exposure value");
        }
    }

    // Health mean given survival time t; the guard on s < t is relaxed to
    // s <= t so that integration can start exactly at the censoring time.
    auto health_mean = [&](double t) {
        Eigen::VectorXd g(static_cast<Eigen::Index>(rec.health_times.size()));
        const double at = health.mean.alpha_at(t);
        const double bt = health.mean.beta_for(rec.arm);
        for (std::size_t i = 0; i < rec.health_times.size(); ++i) {
            g[static_cast<Eigen::Index>(i)] = at + evaluate_curve(health.mean.m0,
                                                                  t - rec.health_times[i]) +
                                              bt + health.exposure_coef * x_at_health[i];
        }
        return g;
    };

    const bool has_health = !rec.health_times.empty();
    Eigen::MatrixXd health_chol;
    Eigen::VectorXd yv;
    if (has_health) {
        health_chol = cholesky_psd(health.cov.matrix(rec.health_times));
        yv = Eigen::Map<const Eigen::VectorXd>(rec.health_values.data(),
                                               static_cast<Eigen::Index>(rec.health_values.size()));
    }

    if (rec.terminal.is_death()) {
        const double t_death = rec.terminal.time;
        if (has_health && rec.health_times.back() >= t_death) {
            throw DataError("health measurements must precede the death time");
        }
        const MCEstimate d = survival_density_given_exposure(
            rec.exposure_times, rec.exposure_values, t_death, em, mc);
        if (!(d.estimate > 0.0)) {
            throw NumericError("conditional survival density estimate is zero");
        }
        out.survival_component = std::log(d.estimate);
        out.mc_se = d.std_error / d.estimate;
        if (has_health) {
            out.health_component = log_mvn_density(yv, health_mean(t_death), health_chol);
        }
    } else {
        const double t_c = rec.terminal.time;
        if (has_health && rec.health_times.back() > t_c) {
            throw DataError("health measurements must precede the censoring time");
        }
        if (!has_health) {
            const MCEstimate s = survivor_given_exposure(rec.exposure_times,
                                                         rec.exposure_values, t_c, em, mc);
            if (!(s.estimate > 0.0)) throw NumericError("conditional survivor estimate is zero");
            out.survival_component = std::log(s.estimate);
            out.mc_se = s.std_error / s.estimate;
        } else {
            // One-dimensional integral of the death-time law against the
            // Gaussian health density, on the path grid past the censoring
            // time.
            const double tail =
                mc.tail_horizon > 0.0 ? mc.tail_horizon : 4.0 * std::max(t_c, 1.0);
            const double t_max = t_c + tail;
            const PathLaw law = exposure_law(
                em, rec.exposure_times, rec.exposure_values,
                build_grid(t_max, pick_dt(t_max, mc), rec.exposure_times));
            const std::size_t idx_c = index_of(law.grid, t_c);
            const std::size_t m = law.grid.size();

            // Gaussian health density at each candidate death node.
            std::vector<double> health_density(m, 0.0);
            const double s_last = rec.health_times.back();
            for (std::size_t i = idx_c; i < m; ++i) {
                if (law.grid[i] >= s_last - kTimeTol) {
                    health_density[i] =
                        std::exp(log_mvn_density(yv, health_mean(law.grid[i]), health_chol));
                }
            }

            const ChunkLayout lay = layout(mc);
            double surv_total = 0.0;
            double surv_end_total = 0.0;
            double int_total = 0.0;
            double sq_log = 0.0;
            std::vector<double> node_density(m, 0.0);
            std::vector<double> chunk_logs;
            chunk_logs.reserve(static_cast<std::size_t>(lay.chunks));
            for (int c = 0; c < lay.chunks; ++c) {
                std::fill(node_density.begin(), node_density.end(), 0.0);
                double chunk_surv = 0.0;
                for (int p = 0; p < lay.chunk_size; ++p) {
                    const std::uint64_t path_index =
                        static_cast<std::uint64_t>(c) * lay.chunk_size + p;
                    Philox rng(mc.seed, path_index + 1);
                    const Eigen::VectorXd path = law.assemble(rng);
                    double cum = 0.0;
                    double h_prev = em.link(path[0]);
                    for (std::size_t i = 1; i < m; ++i) {
                        const double h_i = em.link(path[static_cast<Eigen::Index>(i)]);
                        cum += 0.5 * (h_prev + h_i) * (law.grid[i] - law.grid[i - 1]);
                        h_prev = h_i;
                        if (i == idx_c) chunk_surv += std::exp(-cum);
                        if (i >= idx_c) node_density[i] += h_i * std::exp(-cum);
                    }
                    if (idx_c == 0) chunk_surv += 1.0;
                    node_density[idx_c] += em.link(path[static_cast<Eigen::Index>(idx_c)]) *
                                           (idx_c == 0 ? 1.0 : 0.0);
                    surv_end_total += std::exp(-cum);
                }
                double integral = 0.0;
                for (std::size_t i = idx_c + 1; i < m; ++i) {
                    integral += 0.5 *
                                (node_density[i - 1] * health_density[i - 1] +
                                 node_density[i] * health_density[i]) *
                                (law.grid[i] - law.grid[i - 1]);
                }
                integral /= lay.chunk_size;
                chunk_surv /= lay.chunk_size;
                surv_total += chunk_surv;
                int_total += integral;
                const double cl = integral > 0.0 ? std::log(integral) : -kInf;
                chunk_logs.push_back(cl);
            }
            const double surv = surv_total / lay.chunks;
            const double integral = int_total / lay.chunks;
            if (!(surv > 0.0) || !(integral > 0.0)) {
                throw NumericError("censored exposure record has vanishing MC mass");
            }
            out.survival_component = std::log(surv);
            out.health_component = std::log(integral) - std::log(surv);
            double mean_log = 0.0;
            for (const double cl : chunk_logs) mean_log += cl;
            mean_log /= lay.chunks;
            for (const double cl : chunk_logs) sq_log += (cl - mean_log) * (cl - mean_log);
            out.mc_se = std::sqrt(sq_log / (lay.chunks - 1.0) / lay.chunks);
            // Death-time mass beyond the path horizon is dropped; surface it
            // when it stops being negligible so the caller can raise
            // tail_horizon.
            const double truncated = surv_end_total / lay.n_paths / surv;
            if (truncated > 1e-3) out.precision_warning = true;
        }
    }

    out.total = out.exposure_gaussian + out.survival_component + out.health_component;
    out.precision_warning = out.precision_warning ||
        out.mc_se > mc.se_warn_fraction * std::max(1.0, std::abs(out.total));
    return out;
}

ProbeReport exogeneity_probe(const ProbeModel& model, std::span<const double> ts,
                             std::span<const double> x, double t, std::size_t future_index,
                             double delta, const MCConfig& mc) {
    mc.check();
    if (ts.size() != x.size()) throw DataError("one observation value per time");
    if (future_index >= ts.size() || !(ts[future_index] > t)) {
        throw DataError("probe requires an observation time strictly beyond t");
    }
    std::vector<double> x_pert(x.begin(), x.end());
    x_pert[future_index] += delta;

    const double dt = pick_dt(t, mc);
    // Extend the grid past t so the construction-level check has future
    // path values to perturb.
    const double t_ext = std::max(t + 5.0 * dt, *std::max_element(ts.begin(), ts.end()));
    const bool is_latent = std::holds_alternative<LatentJointModel>(model);

    PathLaw base;
    PathLaw pert;
    const HazardLink* link = nullptr;
    if (is_latent) {
        const auto& ljm = std::get<LatentJointModel>(model);
        ljm.check();
        base = latent_law(ljm, ts, x, build_grid(t_ext, dt, {&t, 1}));
        pert = latent_law(ljm, ts, x_pert, build_grid(t_ext, dt, {&t, 1}));
        link = &ljm.link;
    } else {
        const auto& em = std::get<ExposureModel>(model);
        em.check();
        std::vector<double> extra(ts.begin(), ts.end());
        extra.push_back(t);
        base = exposure_law(em, ts, x, build_grid(t_ext, dt, extra));
        pert = exposure_law(em, ts, x_pert, build_grid(t_ext, dt, extra));
        link = &em.link;
    }

    const std::size_t limit = index_of(base.grid, t);
    const PairedMC paired = run_mc_paired(base, pert, limit, *link, false, mc);

    ProbeReport report;
    report.base = paired.base.estimate;
    report.perturbed = paired.perturbed.estimate;
    report.observation_change = paired.diff;
    report.observation_se = paired.diff_se;

    // Construction-level check: perturb simulated path values beyond t and
    // re-evaluate the hazard functional.
    {
        const int n_check = std::min(mc.n_paths, 2000);
        double max_abs = 0.0;
        bool exact = true;
        for (int p = 0; p < n_check; ++p) {
            Philox rng(mc.seed, static_cast<std::uint64_t>(p) + 1);
            Eigen::VectorXd path = base.assemble(rng);
            const double v1 = hazard_functional(path, base.grid, limit, *link, false);
            for (std::size_t i = limit + 1; i < base.grid.size(); ++i) {
                path[static_cast<Eigen::Index>(i)] += delta;
            }
            const double v2 = hazard_functional(path, base.grid, limit, *link, false);
            max_abs = std::max(max_abs, std::abs(v2 - v1));
            exact = exact && (v1 == v2);
        }
        report.construction_change = max_abs;
        report.construction_bit_exact = exact;
    }

    const bool detected = std::abs(report.observation_change) > 3.0 * report.observation_se &&
                          report.observation_se >= 0.0;
    report.verdict = detected ? "conditional survivor depends on future observations"
                              : "no dependence on future observations detected";
    return report;
}

ExposureSimulator::ExposureSimulator(ExposureModel em, std::vector<double> grid)
    : em_(std::move(em)), grid_(std::move(grid)) {
    em_.check();
    if (grid_.size() < 2) throw DataError("simulation grid needs at least two nodes");
    chol_ = cholesky_psd(em_.k0.gram(grid_));
}

std::pair<Eigen::VectorXd, double> ExposureSimulator::draw(Philox& rng) const {
    const Eigen::VectorXd path = sample_mvn(
        Eigen::VectorXd::Constant(static_cast<Eigen::Index>(grid_.size()), em_.mu0), chol_,
        rng);
    const double target = rng.exponential(1.0);
    double cum = 0.0;
    double h_prev = em_.link(path[0]);
    for (std::size_t i = 1; i < grid_.size(); ++i) {
        const double h_i = em_.link(path[static_cast<Eigen::Index>(i)]);
        const double inc = 0.5 * (h_prev + h_i) * (grid_[i] - grid_[i - 1]);
        if (cum + inc >= target) {
            const double frac = inc > 0.0 ? (target - cum) / inc : 1.0;
            return {path, grid_[i - 1] + frac * (grid_[i] - grid_[i - 1])};
        }
        cum += inc;
        h_prev = h_i;
    }
    return {path, kInf};
}

} // namespace survproc
