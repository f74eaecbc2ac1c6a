#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "survproc/errors.hpp"

namespace survproc {

/// A point in the state space: either a real health measurement or the
/// absorbing symbol recorded when the patient is found dead. The absorbing
/// value compares equal only to itself.
class StateValue {
  public:
    static StateValue real(double v);
    static StateValue flat() { return StateValue(); }

    bool is_flat() const { return flat_; }
    bool is_real() const { return !flat_; }

    /// Measurement value; calling this on the absorbing state is a logic error.
    double value() const;

    friend bool operator==(const StateValue& a, const StateValue& b) {
        if (a.flat_ || b.flat_) return a.flat_ == b.flat_;
        return a.value_ == b.value_;
    }
    friend bool operator!=(const StateValue& a, const StateValue& b) { return !(a == b); }

  private:
    StateValue() : value_(0.0), flat_(true) {}
    double value_;
    bool flat_;
};

struct Terminal {
    enum class Kind { death, censored };
    Kind kind = Kind::censored;
    double time = 0.0;

    static Terminal death(double t) { return {Kind::death, t}; }
    static Terminal censored(double t) { return {Kind::censored, t}; }
    bool is_death() const { return kind == Kind::death; }

    friend bool operator==(const Terminal& a, const Terminal& b) {
        return a.kind == b.kind && a.time == b.time;
    }
};

/// One patient's sampling times, observed values, covariate level, and
/// terminal status. Immutable by convention after assembly; all library
/// operations take records by const reference.
struct PatientRecord {
    std::string patient_id;
    std::vector<double> times;       ///< strictly increasing, all >= 0
    std::vector<StateValue> values;  ///< one per time; real prefix, flat tail
    int arm = 0;                     ///< treatment arm, 0 = null level
    std::vector<double> covariates;  ///< optional real covariate vector
    Terminal terminal;

    /// Length of the real-valued prefix of `values`.
    std::size_t n_real() const;
    /// True when the record carries a trailing block of absorbing values,
    /// i.e. the death time is known only up to an interval.
    bool has_trailing_flat() const { return n_real() < values.size(); }

    std::vector<double> real_times() const;
    std::vector<double> real_values() const;

    friend bool operator==(const PatientRecord& a, const PatientRecord& b) {
        return a.patient_id == b.patient_id && a.times == b.times &&
               a.values == b.values && a.arm == b.arm &&
               a.covariates == b.covariates && a.terminal == b.terminal;
    }
};

/// Invariant check. Returns one entry per violated invariant; an empty list
/// means the record is valid. Violations are data, not errors: this never
/// throws on any record that parses.
std::vector<std::string> validate(const PatientRecord& rec);

struct Dataset {
    std::vector<PatientRecord> records;

    /// Indices of records whose terminal status is censored.
    std::vector<std::size_t> censored_index() const;

    /// First invalid record, if any, as (index, violations).
    std::vector<std::pair<std::size_t, std::vector<std::string>>> validate_all() const;

    friend bool operator==(const Dataset& a, const Dataset& b) {
        return a.records == b.records;
    }
};

} // namespace survproc
