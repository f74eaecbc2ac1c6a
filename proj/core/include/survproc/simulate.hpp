#pragma once

#include <memory>
#include <vector>

#include "survproc/model.hpp"
#include "survproc/rng.hpp"
#include "survproc/types.hpp"

namespace survproc {

/// Measurement times fixed at recruitment, within an observation horizon.
/// Schedules may differ between patients.
struct FixedSchedule {
    double horizon = 0.0;
    std::vector<double> times;

    void check() const;
    static FixedSchedule regular(double horizon, double step);
};

/// Conditional law of the next appointment given the observed history. The
/// gap may depend on the last observed value and visit time, never on
/// unobserved path values or on model parameters; its support is strictly
/// positive.
class AppointmentPolicy {
  public:
    virtual ~AppointmentPolicy() = default;
    virtual double sample_gap(double last_time, double last_value, Philox& rng) const = 0;
    virtual double log_density(double gap, double last_time, double last_value) const = 0;
};

/// Degenerate policy: every gap equals `gap`. Reduces the sequential scheme
/// to a regular fixed schedule.
class ConstantGapPolicy final : public AppointmentPolicy {
  public:
    explicit ConstantGapPolicy(double gap);
    double sample_gap(double, double, Philox&) const override { return gap_; }
    /// Point mass; by convention 0 at the scheduled gap, -inf elsewhere.
    double log_density(double gap, double, double) const override;

  private:
    double gap_;
};

/// Gap = min_gap + Exponential(rate), rate = base_rate * exp(-value_coef * y):
/// lower last health values shorten the wait when value_coef > 0. Setting
/// value_coef = 0 makes the schedule ignore the measurements entirely.
class ShiftedExpGapPolicy final : public AppointmentPolicy {
  public:
    ShiftedExpGapPolicy(double min_gap, double base_rate, double value_coef);
    double sample_gap(double last_time, double last_value, Philox& rng) const override;
    double log_density(double gap, double last_time, double last_value) const override;

  private:
    double rate_for(double value) const;
    double min_gap_;
    double base_rate_;
    double value_coef_;
};

/// First scheme: draw the survival time, then Gaussian values at every
/// schedule point the patient is alive for. Post-mortem appointments are
/// suppressed; an exact death time within the horizon is recorded, otherwise
/// the record is censored at the horizon.
PatientRecord simulate_fixed(const FixedSchedule& sched, int arm, const ModelParams& mp,
                             Philox& rng, const std::string& patient_id = "");

/// A sequential record together with the appointment made at each visit.
/// `scheduled_next[j]` was drawn at visit j; the last entry is the
/// appointment that death or the horizon preempted.
struct SequentialRecord {
    PatientRecord record;
    std::vector<double> scheduled_next;
};

/// Second scheme: alternate observing the health value (conditionally on the
/// values already seen and the survival time) with drawing the next
/// appointment from the policy. Sampling stops at the horizon or at death,
/// whichever comes first. Throws ConfigError if the policy proposes a
/// non-positive gap.
SequentialRecord simulate_sequential(const AppointmentPolicy& policy, double horizon, int arm,
                                     const ModelParams& mp, Philox& rng,
                                     const std::string& patient_id = "");

struct Breach {
    std::size_t visit_index = 0;  ///< index into record.times
    double scheduled = 0.0;
    double actual = 0.0;
};

struct BreachReport {
    bool applicable = false;  ///< false when schedule annotations are missing
    std::vector<Breach> breaches;
};

/// Every visit time is compared with the appointment recorded at the
/// previous visit; any difference beyond `tol` is a protocol breach.
BreachReport detect_off_schedule(const SequentialRecord& rec, double tol = 0.0);

/// Sum of the policy factor log densities for a sequential record. This
/// quantity is determined by the protocol and the data alone; it carries no
/// model parameters.
double appointment_log_density(const SequentialRecord& rec, const AppointmentPolicy& policy);

/// Dataset-level convenience wrappers. Patient streams are keyed by
/// (seed, patient id), so records do not depend on simulation order. Arms
/// cycle through 0..n_arms-1.
Dataset simulate_fixed_dataset(std::size_t n, const FixedSchedule& sched,
                               const ModelParams& mp, std::uint64_t seed);
std::vector<SequentialRecord> simulate_sequential_dataset(std::size_t n,
                                                          const AppointmentPolicy& policy,
                                                          double horizon,
                                                          const ModelParams& mp,
                                                          std::uint64_t seed);
Dataset to_dataset(const std::vector<SequentialRecord>& recs);

} // namespace survproc
