#pragma once

#include <optional>
#include <string>
#include <vector>

#include "survproc/errors.hpp"

namespace survproc {

/// Explicit joint law of a finite-state process observed at a few time
/// points, together with a death time per trajectory. Probabilities must sum
/// to one. Desk scale: the checkers enumerate every trajectory.
struct TrajectoryTable {
    std::vector<double> times;
    struct Entry {
        std::vector<std::string> values;  ///< one state per time point
        double death_time = 0.0;          ///< +inf allowed
        double prob = 0.0;
    };
    std::vector<Entry> entries;

    void check() const;  ///< throws DataError on malformed or non-normalized tables
};

struct VitalityWitness {
    std::size_t time_index = 0;
    std::string value;
    /// Survival probability given the value when it lies strictly inside
    /// (0, 1), or the two trajectory indices whose conditionals disagree.
    double probability = 0.0;
    std::optional<std::pair<std::size_t, std::size_t>> trajectory_pair;
    std::string detail;
};

struct VitalityVerdict {
    bool vital = false;
    std::optional<VitalityWitness> witness;
};

/// A process is vital when the current value alone decides survival: for
/// every time t and attainable value y, pr(T > t | Y(t) = y) lies in {0, 1}
/// and conditioning on the full trajectory changes nothing. Returns the
/// first violation found.
VitalityVerdict vitality_check(const TrajectoryTable& table, double tol = 1e-9);

/// Explicit joint law of a bivariate finite-state process (no death time).
struct BivariateTable {
    std::vector<double> times;
    struct Entry {
        std::vector<std::string> x;
        std::vector<std::string> y;
        double prob = 0.0;
    };
    std::vector<Entry> entries;

    void check() const;
    BivariateTable swapped() const;  ///< exchange the roles of x and y
};

struct IevWitness {
    std::size_t time_index = 0;
    std::vector<std::string> future_y;  ///< the atom whose probability shifts
    std::size_t history_a = 0;          ///< entry indices carrying the two histories
    std::size_t history_b = 0;
    double prob_a = 0.0;
    double prob_b = 0.0;
};

struct IevVerdict {
    bool holds = false;
    std::optional<IevWitness> witness;
};

/// Y evolves independently of X when, at every time point, the conditional
/// law of Y's future given both histories equals the one given Y's history
/// alone. Verified by enumeration over all histories and future atoms.
IevVerdict independent_evolution_check(const BivariateTable& table, double tol = 1e-9);

/// Whether the two component processes are independent given the pair of
/// initial values (the residual dependence allowed under mutual independent
/// evolution). Empty witness detail on success.
struct ConditionalIndependenceVerdict {
    bool holds = false;
    std::string detail;
};

ConditionalIndependenceVerdict conditionally_independent_given_initial(
    const BivariateTable& table, double tol = 1e-9);

/// Marginal dependence of the two components (any joint atom whose
/// probability differs from the product of its marginals).
bool components_dependent(const BivariateTable& table, double tol = 1e-9);

/// JSON forms used by the CLI. A vitality table:
///   {"check": "vitality", "times": [...],
///    "trajectories": [{"values": [...], "death_time": 2.5, "prob": 0.1}, ...]}
/// death_time may be the string "inf". An independent-evolution table:
///   {"check": "independent-evolution", "times": [...],
///    "trajectories": [{"x": [...], "y": [...], "prob": 0.1}, ...]}
struct FiniteCheckInput {
    std::optional<TrajectoryTable> vitality;
    std::optional<BivariateTable> iev;
};

FiniteCheckInput finite_check_from_json_text(const std::string& text);
std::string vitality_verdict_to_json_text(const VitalityVerdict& v);
std::string iev_verdict_to_json_text(const IevVerdict& v);

} // namespace survproc
