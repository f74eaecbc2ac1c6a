#include "survproc/finite_check.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include <json.hpp>

namespace survproc {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();

std::string join_key(const std::vector<std::string>& v, std::size_t from, std::size_t to) {
    std::string key;
    for (std::size_t i = from; i < to; ++i) {
        key += v[i];
        key += '\x1f';
    }
    return key;
}
} // namespace

void TrajectoryTable::check() const {
    if (times.empty()) throw DataError("trajectory table needs at least one time point");
    for (std::size_t i = 1; i < times.size(); ++i) {
        if (!(times[i] > times[i - 1])) {
            throw DataError("trajectory table times must be strictly increasing");
        }
    }
    if (entries.empty()) throw DataError("trajectory table has no entries");
    double total = 0.0;
    for (const auto& e : entries) {
        if (e.values.size() != times.size()) {
            throw DataError("trajectory value count must match time count");
        }
        if (!(e.prob >= 0.0)) throw DataError("trajectory probabilities must be nonnegative");
        total += e.prob;
    }
    if (std::abs(total - 1.0) > 1e-9) {
        throw DataError("trajectory probabilities sum to " + std::to_string(total) +
                        ", expected 1");
    }
}

VitalityVerdict vitality_check(const TrajectoryTable& table, double tol) {
    table.check();
    for (std::size_t tau = 0; tau < table.times.size(); ++tau) {
        const double t = table.times[tau];

        // Conditionals grouped by the current value, then by full trajectory.
        struct Group {
            double p_total = 0.0;
            double p_alive = 0.0;
            // per full trajectory: representative entry, mass, alive mass
            std::map<std::string, std::tuple<std::size_t, double, double>> trajectories;
        };
        std::map<std::string, Group> by_value;
        for (std::size_t i = 0; i < table.entries.size(); ++i) {
            const auto& e = table.entries[i];
            if (e.prob == 0.0) continue;
            Group& g = by_value[e.values[tau]];
            const bool alive = e.death_time > t;
            g.p_total += e.prob;
            if (alive) g.p_alive += e.prob;
            const std::string tk = join_key(e.values, 0, e.values.size());
            auto it = g.trajectories.find(tk);
            if (it == g.trajectories.end()) {
                g.trajectories.emplace(tk, std::make_tuple(i, e.prob, alive ? e.prob : 0.0));
            } else {
                std::get<1>(it->second) += e.prob;
                if (alive) std::get<2>(it->second) += e.prob;
            }
        }

        for (const auto& [value, g] : by_value) {
            // Dependence on more than the current value: two trajectories
            // sharing the value but with different survival conditionals.
            double lo = 2.0;
            double hi = -1.0;
            std::size_t lo_idx = 0;
            std::size_t hi_idx = 0;
            for (const auto& [tk, rec] : g.trajectories) {
                const double cond = std::get<2>(rec) / std::get<1>(rec);
                if (cond < lo) {
                    lo = cond;
                    lo_idx = std::get<0>(rec);
                }
                if (cond > hi) {
                    hi = cond;
                    hi_idx = std::get<0>(rec);
                }
            }
            if (hi - lo > tol) {
                VitalityWitness w;
                w.time_index = tau;
                w.value = value;
                w.probability = g.p_alive / g.p_total;
                w.trajectory_pair = {lo_idx, hi_idx};
                w.detail = "survival given the current value depends on the rest of the "
                           "trajectory";
                return {false, w};
            }
            const double pr = g.p_alive / g.p_total;
            if (pr > tol && pr < 1.0 - tol) {
                VitalityWitness w;
                w.time_index = tau;
                w.value = value;
                w.probability = pr;
                w.detail = "survival probability lies strictly inside (0, 1)";
                return {false, w};
            }
        }
    }
    return {true, std::nullopt};
}

void BivariateTable::check() const {
    if (times.empty()) throw DataError("bivariate table needs at least one time point");
    for (std::size_t i = 1; i < times.size(); ++i) {
        if (!(times[i] > times[i - 1])) {
            throw DataError("bivariate table times must be strictly increasing");
        }
    }
    if (entries.empty()) throw DataError("bivariate table has no entries");
    double total = 0.0;
    for (const auto& e : entries) {
        if (e.x.size() != times.size() || e.y.size() != times.size()) {
            throw DataError("bivariate value counts must match time count");
        }
        if (!(e.prob >= 0.0)) throw DataError("probabilities must be nonnegative");
        total += e.prob;
    }
    if (std::abs(total - 1.0) > 1e-9) {
        throw DataError("bivariate probabilities sum to " + std::to_string(total) +
                        ", expected 1");
    }
}

BivariateTable BivariateTable::swapped() const {
    BivariateTable out;
    out.times = times;
    for (const auto& e : entries) out.entries.push_back({e.y, e.x, e.prob});
    return out;
}

IevVerdict independent_evolution_check(const BivariateTable& table, double tol) {
    table.check();
    const std::size_t k = table.times.size();
    for (std::size_t tau = 0; tau + 1 < k; ++tau) {
        // Per joint history: mass and mass per future-y atom.
        struct HistGroup {
            std::size_t rep = 0;
            double total = 0.0;
            std::map<std::string, double> atom_mass;
        };
        std::map<std::string, HistGroup> by_joint;
        std::map<std::string, std::vector<std::string>> joint_to_yh;
        for (std::size_t i = 0; i < table.entries.size(); ++i) {
            const auto& e = table.entries[i];
            if (e.prob == 0.0) continue;
            const std::string jh =
                join_key(e.x, 0, tau + 1) + '\x1e' + join_key(e.y, 0, tau + 1);
            auto [it, inserted] = by_joint.try_emplace(jh);
            if (inserted) it->second.rep = i;
            it->second.total += e.prob;
            it->second.atom_mass[join_key(e.y, tau + 1, k)] += e.prob;
            if (inserted) {
                joint_to_yh[jh] = {e.y.begin(), e.y.begin() + static_cast<std::ptrdiff_t>(tau + 1)};
            }
        }

        // Group joint histories by their y part.
        std::map<std::string, std::vector<const std::pair<const std::string, HistGroup>*>>
            by_yh;
        for (const auto& kv : by_joint) {
            by_yh[join_key(joint_to_yh[kv.first], 0, tau + 1)].push_back(&kv);
        }

        for (const auto& [yh, groups] : by_yh) {
            if (groups.size() < 2) continue;
            // Every future-y atom seen under this y history.
            std::map<std::string, std::vector<std::string>> atoms;
            for (const auto* g : groups) {
                for (const auto& [atom, mass] : g->second.atom_mass) {
                    (void)mass;
                    atoms.try_emplace(atom);
                }
            }
            for (const auto& [atom, unused] : atoms) {
                (void)unused;
                double lo = 2.0;
                double hi = -1.0;
                std::size_t lo_rep = 0;
                std::size_t hi_rep = 0;
                for (const auto* g : groups) {
                    const auto it = g->second.atom_mass.find(atom);
                    const double cond =
                        (it == g->second.atom_mass.end() ? 0.0 : it->second) / g->second.total;
                    if (cond < lo) {
                        lo = cond;
                        lo_rep = g->second.rep;
                    }
                    if (cond > hi) {
                        hi = cond;
                        hi_rep = g->second.rep;
                    }
                }
                if (hi - lo > tol) {
                    IevWitness w;
                    w.time_index = tau;
                    const auto& rep_entry = table.entries[hi_rep];
                    w.future_y = {rep_entry.y.begin() + static_cast<std::ptrdiff_t>(tau + 1),
                                  rep_entry.y.end()};
                    // Use the atom's own decomposition when the max
                    // representative does not carry it.
                    w.history_a = hi_rep;
                    w.history_b = lo_rep;
                    w.prob_a = hi;
                    w.prob_b = lo;
                    return {false, w};
                }
            }
        }
    }
    return {true, std::nullopt};
}

ConditionalIndependenceVerdict conditionally_independent_given_initial(
    const BivariateTable& table, double tol) {
    table.check();
    const std::size_t k = table.times.size();
    struct InitGroup {
        double total = 0.0;
        std::map<std::string, double> joint;
        std::map<std::string, double> x_marg;
        std::map<std::string, double> y_marg;
    };
    std::map<std::string, InitGroup> by_init;
    for (const auto& e : table.entries) {
        if (e.prob == 0.0) continue;
        InitGroup& g = by_init[e.x[0] + '\x1e' + e.y[0]];
        const std::string xf = join_key(e.x, 0, k);
        const std::string yf = join_key(e.y, 0, k);
        g.total += e.prob;
        g.joint[xf + '\x1e' + yf] += e.prob;
        g.x_marg[xf] += e.prob;
        g.y_marg[yf] += e.prob;
    }
    for (const auto& [init, g] : by_init) {
        for (const auto& [xf, px] : g.x_marg) {
            for (const auto& [yf, py] : g.y_marg) {
                const auto it = g.joint.find(xf + '\x1e' + yf);
                const double pj = it == g.joint.end() ? 0.0 : it->second;
                if (std::abs(pj / g.total - (px / g.total) * (py / g.total)) > tol) {
                    ConditionalIndependenceVerdict v;
                    v.holds = false;
                    v.detail = "joint probability differs from the product given initial pair";
                    return v;
                }
            }
        }
    }
    return {true, ""};
}

bool components_dependent(const BivariateTable& table, double tol) {
    table.check();
    const std::size_t k = table.times.size();
    std::map<std::string, double> joint;
    std::map<std::string, double> x_marg;
    std::map<std::string, double> y_marg;
    for (const auto& e : table.entries) {
        const std::string xf = join_key(e.x, 0, k);
        const std::string yf = join_key(e.y, 0, k);
        joint[xf + '\x1e' + yf] += e.prob;
        x_marg[xf] += e.prob;
        y_marg[yf] += e.prob;
    }
    for (const auto& [xf, px] : x_marg) {
        for (const auto& [yf, py] : y_marg) {
            const auto it = joint.find(xf + '\x1e' + yf);
            const double pj = it == joint.end() ? 0.0 : it->second;
            if (std::abs(pj - px * py) > tol) return true;
        }
    }
    return false;
}

FiniteCheckInput finite_check_from_json_text(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("finite-check JSON parse failure: ") + e.what());
    }
    FiniteCheckInput input;
    try {
        const std::string check = j.value("check", "vitality");
        if (check == "vitality") {
            TrajectoryTable t;
            t.times = j.at("times").get<std::vector<double>>();
            for (const auto& e : j.at("trajectories")) {
                TrajectoryTable::Entry entry;
                entry.values = e.at("values").get<std::vector<std::string>>();
                const auto& dt = e.at("death_time");
                entry.death_time = dt.is_string() ? kInf : dt.get<double>();
                entry.prob = e.at("prob").get<double>();
                t.entries.push_back(std::move(entry));
            }
            input.vitality = std::move(t);
        } else if (check == "independent-evolution") {
            BivariateTable t;
            t.times = j.at("times").get<std::vector<double>>();
            for (const auto& e : j.at("trajectories")) {
                BivariateTable::Entry entry;
                entry.x = e.at("x").get<std::vector<std::string>>();
                entry.y = e.at("y").get<std::vector<std::string>>();
                entry.prob = e.at("prob").get<double>();
                t.entries.push_back(std::move(entry));
            }
            input.iev = std::move(t);
        } else {
            throw ConfigError("unknown check '" + check + "'");
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("finite-check JSON missing field: ") + e.what());
    }
    return input;
}

std::string vitality_verdict_to_json_text(const VitalityVerdict& v) {
    nlohmann::json j;
    j["check"] = "vitality";
    j["vital"] = v.vital;
    if (v.witness) {
        nlohmann::json w;
        w["time_index"] = v.witness->time_index;
        w["value"] = v.witness->value;
        w["probability"] = v.witness->probability;
        w["detail"] = v.witness->detail;
        if (v.witness->trajectory_pair) {
            w["trajectory_pair"] = {v.witness->trajectory_pair->first,
                                    v.witness->trajectory_pair->second};
        }
        j["witness"] = w;
    } else {
        j["witness"] = nullptr;
    }
    return j.dump(2);
}

std::string iev_verdict_to_json_text(const IevVerdict& v) {
    nlohmann::json j;
    j["check"] = "independent-evolution";
    j["holds"] = v.holds;
    if (v.witness) {
        nlohmann::json w;
        w["time_index"] = v.witness->time_index;
        w["future_y"] = v.witness->future_y;
        w["history_a"] = v.witness->history_a;
        w["history_b"] = v.witness->history_b;
        w["prob_a"] = v.witness->prob_a;
        w["prob_b"] = v.witness->prob_b;
        j["witness"] = w;
    } else {
        j["witness"] = nullptr;
    }
    return j.dump(2);
}

} // namespace survproc
