#include "survproc/simulate.hpp"

#include <cmath>
#include <cstdio>
#include <limits>

#include "survproc/gaussian.hpp"
#include "survproc/revival.hpp"

namespace survproc {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();

std::string default_id(std::size_t i) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "P%05zu", i);
    return buf;
}

int arm_count(const ModelParams& mp) { return static_cast<int>(mp.mean.beta.size()); }
} // namespace

void FixedSchedule::check() const {
    if (!(horizon > 0.0)) throw ConfigError("schedule horizon must be positive");
    for (std::size_t i = 0; i < times.size(); ++i) {
        if (times[i] < 0.0 || times[i] > horizon) {
            throw ConfigError("schedule time outside [0, horizon]");
        }
        if (i > 0 && !(times[i] > times[i - 1])) {
            throw ConfigError("schedule times must be strictly increasing");
        }
    }
}

FixedSchedule FixedSchedule::regular(double horizon, double step) {
    if (!(step > 0.0)) throw ConfigError("schedule step must be positive");
    FixedSchedule s;
    s.horizon = horizon;
    for (double t = 0.0; t <= horizon + 1e-12; t += step) s.times.push_back(std::min(t, horizon));
    if (!s.times.empty() && s.times.size() >= 2 &&
        s.times.back() == s.times[s.times.size() - 2]) {
        s.times.pop_back();
    }
    s.check();
    return s;
}

ConstantGapPolicy::ConstantGapPolicy(double gap) : gap_(gap) {
    if (!(gap > 0.0)) throw ConfigError("constant gap must be positive");
}

double ConstantGapPolicy::log_density(double gap, double, double) const {
    return gap == gap_ ? 0.0 : -kInf;
}

ShiftedExpGapPolicy::ShiftedExpGapPolicy(double min_gap, double base_rate, double value_coef)
    : min_gap_(min_gap), base_rate_(base_rate), value_coef_(value_coef) {
    if (!(min_gap > 0.0)) throw ConfigError("policy min_gap must be positive");
    if (!(base_rate > 0.0)) throw ConfigError("policy base_rate must be positive");
}

double ShiftedExpGapPolicy::rate_for(double value) const {
    return base_rate_ * std::exp(std::clamp(-value_coef_ * value, -30.0, 30.0));
}

double ShiftedExpGapPolicy::sample_gap(double, double last_value, Philox& rng) const {
    return min_gap_ + rng.exponential(rate_for(last_value));
}

double ShiftedExpGapPolicy::log_density(double gap, double, double last_value) const {
    if (!(gap > min_gap_)) return -kInf;
    const double rate = rate_for(last_value);
    return std::log(rate) - rate * (gap - min_gap_);
}

PatientRecord simulate_fixed(const FixedSchedule& sched, int arm, const ModelParams& mp,
                             Philox& rng, const std::string& patient_id) {
    sched.check();
    mp.check();
    if (arm < 0 || arm >= arm_count(mp)) throw ConfigError("arm index out of range");

    PatientRecord rec;
    rec.patient_id = patient_id;
    rec.arm = arm;

    const double t_death = mp.survival.sample(rng);
    std::vector<double> grid;
    for (const double s : sched.times) {
        if (s < t_death) grid.push_back(s);
    }
    if (!grid.empty()) {
        const Eigen::VectorXd y = sample_conditional(grid, t_death, arm, mp.mean, mp.cov, rng);
        rec.times = grid;
        for (Eigen::Index i = 0; i < y.size(); ++i) rec.values.push_back(StateValue::real(y[i]));
    }
    rec.terminal = t_death <= sched.horizon ? Terminal::death(t_death)
                                            : Terminal::censored(sched.horizon);
    return rec;
}

SequentialRecord simulate_sequential(const AppointmentPolicy& policy, double horizon, int arm,
                                     const ModelParams& mp, Philox& rng,
                                     const std::string& patient_id) {
    mp.check();
    if (!(horizon > 0.0)) throw ConfigError("horizon must be positive");
    if (arm < 0 || arm >= arm_count(mp)) throw ConfigError("arm index out of range");

    SequentialRecord out;
    out.record.patient_id = patient_id;
    out.record.arm = arm;

    const double t_death = mp.survival.sample(rng);

    // Growing Cholesky factor of the visited-grid covariance; w solves
    // L w = y - gamma so each new value needs one triangular solve.
    std::vector<double> grid;
    Eigen::MatrixXd chol(0, 0);
    Eigen::VectorXd w(0);

    double t_cur = 0.0;
    while (t_cur < t_death && t_cur <= horizon) {
        const auto k = static_cast<Eigen::Index>(grid.size());
        const double gamma_s = mp.mean(t_cur, t_death, arm);
        double cond_mean = gamma_s;
        double cond_var = mp.cov.sigma_b2 + mp.cov.kernel_at(t_cur, t_cur) + mp.cov.sigma_e2;
        Eigen::VectorXd cross(k);
        if (k > 0) {
            for (Eigen::Index i = 0; i < k; ++i) {
                cross[i] = mp.cov.sigma_b2 +
                           mp.cov.kernel_at(t_cur, grid[static_cast<std::size_t>(i)]);
            }
            chol.topLeftCorner(k, k).triangularView<Eigen::Lower>().solveInPlace(cross);
            cond_mean += cross.dot(w);
            cond_var -= cross.squaredNorm();
        }
        cond_var = std::max(cond_var, 1e-12);
        const double sd = std::sqrt(cond_var);
        const double y = cond_mean + sd * rng.normal();

        grid.push_back(t_cur);
        out.record.times.push_back(t_cur);
        out.record.values.push_back(StateValue::real(y));
        chol.conservativeResize(k + 1, k + 1);
        chol.row(k).head(k) = cross.transpose();
        chol.col(k).head(k).setZero();
        chol(k, k) = sd;
        w.conservativeResize(k + 1);
        w[k] = (y - cond_mean) / sd;

        const double gap = policy.sample_gap(t_cur, y, rng);
        if (!(gap > 0.0)) {
            throw ConfigError("appointment policy proposed a non-positive gap");
        }
        const double t_next = t_cur + gap;
        out.scheduled_next.push_back(t_next);
        t_cur = t_next;
    }

    out.record.terminal =
        t_death <= horizon ? Terminal::death(t_death) : Terminal::censored(horizon);
    return out;
}

BreachReport detect_off_schedule(const SequentialRecord& rec, double tol) {
    BreachReport report;
    if (rec.scheduled_next.empty() && rec.record.times.size() > 1) return report;
    report.applicable = true;
    for (std::size_t j = 1; j < rec.record.times.size(); ++j) {
        if (j - 1 >= rec.scheduled_next.size()) break;
        const double sched = rec.scheduled_next[j - 1];
        const double actual = rec.record.times[j];
        if (std::abs(actual - sched) > tol) report.breaches.push_back({j, sched, actual});
    }
    return report;
}

double appointment_log_density(const SequentialRecord& rec, const AppointmentPolicy& policy) {
    double acc = 0.0;
    for (std::size_t j = 0; j < rec.scheduled_next.size(); ++j) {
        const double t_j = rec.record.times[j];
        const double y_j = rec.record.values[j].value();
        acc += policy.log_density(rec.scheduled_next[j] - t_j, t_j, y_j);
    }
    return acc;
}

Dataset simulate_fixed_dataset(std::size_t n, const FixedSchedule& sched,
                               const ModelParams& mp, std::uint64_t seed) {
    Dataset ds;
    ds.records.reserve(n);
    const int arms = arm_count(mp);
    for (std::size_t i = 0; i < n; ++i) {
        const std::string id = default_id(i);
        Philox rng(seed, stream_id(id));
        ds.records.push_back(
            simulate_fixed(sched, static_cast<int>(i % static_cast<std::size_t>(arms)), mp,
                           rng, id));
    }
    return ds;
}

std::vector<SequentialRecord> simulate_sequential_dataset(std::size_t n,
                                                          const AppointmentPolicy& policy,
                                                          double horizon,
                                                          const ModelParams& mp,
                                                          std::uint64_t seed) {
    std::vector<SequentialRecord> out;
    out.reserve(n);
    const int arms = arm_count(mp);
    for (std::size_t i = 0; i < n; ++i) {
        const std::string id = default_id(i);
        Philox rng(seed, stream_id(id));
        out.push_back(simulate_sequential(policy, horizon,
                                          static_cast<int>(i % static_cast<std::size_t>(arms)),
                                          mp, rng, id));
    }
    return out;
}

Dataset to_dataset(const std::vector<SequentialRecord>& recs) {
    Dataset ds;
    ds.records.reserve(recs.size());
    for (const auto& r : recs) ds.records.push_back(r.record);
    return ds;
}

} // namespace survproc
