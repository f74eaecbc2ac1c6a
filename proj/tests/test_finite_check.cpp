#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <limits>

#include "survproc/finite_check.hpp"

using namespace survproc;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

/// Survival recoded as a Boolean process on times (1, 2).
TrajectoryTable recoded_survival() {
    TrajectoryTable t;
    t.times = {1.0, 2.0};
    t.entries = {
        {{"0", "0"}, 0.5, 0.2},
        {{"1", "0"}, 1.5, 0.3},
        {{"1", "1"}, 2.5, 0.5},
    };
    return t;
}

/// The same survival process paired with an independent coin.
TrajectoryTable vital_pair() {
    TrajectoryTable t;
    t.times = {1.0, 2.0};
    const TrajectoryTable base = recoded_survival();
    for (const auto& e : base.entries) {
        for (const char* c1 : {"h", "t"}) {
            for (const char* c2 : {"h", "t"}) {
                t.entries.push_back({{e.values[0] + "|" + c1, e.values[1] + "|" + c2},
                                     e.death_time,
                                     e.prob / 4.0});
            }
        }
    }
    return t;
}

/// Product of the survival indicator with a nonzero-valued process.
TrajectoryTable vital_product() {
    TrajectoryTable t;
    t.times = {1.0, 2.0};
    const TrajectoryTable base = recoded_survival();
    for (const auto& e : base.entries) {
        for (const char* z1 : {"1.3", "-2"}) {
            for (const char* z2 : {"1.3", "-2"}) {
                t.entries.push_back({{e.values[0] == "0" ? "0" : z1,
                                      e.values[1] == "0" ? "0" : z2},
                                     e.death_time,
                                     e.prob / 4.0});
            }
        }
    }
    return t;
}

TrajectoryTable constant_process() {
    TrajectoryTable t;
    t.times = {1.0, 2.0};
    t.entries = {
        {{"c", "c"}, 0.5, 0.2},
        {{"c", "c"}, 1.5, 0.3},
        {{"c", "c"}, 2.5, 0.5},
    };
    return t;
}

/// A latent-health flavor: the value shifts the death odds but never
/// determines survival.
TrajectoryTable latent_health() {
    TrajectoryTable t;
    t.times = {1.0};
    t.entries = {
        {{"good"}, 1.5, 0.45},
        {{"good"}, 0.5, 0.05},
        {{"bad"}, 1.5, 0.20},
        {{"bad"}, 0.5, 0.30},
    };
    return t;
}

BivariateTable independent_pair() {
    BivariateTable t;
    t.times = {0.0, 1.0};
    for (const char* x0 : {"h", "t"}) {
        for (const char* x1 : {"h", "t"}) {
            for (const char* y0 : {"h", "t"}) {
                for (const char* y1 : {"h", "t"}) {
                    t.entries.push_back({{x0, x1}, {y0, y1}, 1.0 / 16.0});
                }
            }
        }
    }
    return t;
}

/// Y copies X with a lag: Y(1) = X(0).
BivariateTable lagged_copy() {
    BivariateTable t;
    t.times = {0.0, 1.0};
    for (const char* x0 : {"h", "t"}) {
        for (const char* x1 : {"h", "t"}) {
            t.entries.push_back({{x0, x1}, {"c", x0}, 0.25});
        }
    }
    return t;
}

/// Both components start at a shared coin and then flip independently with
/// probability 1/4 each.
BivariateTable coupled_initial() {
    BivariateTable t;
    t.times = {0.0, 1.0};
    for (const char* b : {"h", "t"}) {
        for (const bool flip_x : {false, true}) {
            for (const bool flip_y : {false, true}) {
                auto flipped = [&](bool flip) {
                    const bool heads = (std::string(b) == "h") != flip;
                    return heads ? "h" : "t";
                };
                t.entries.push_back({{b, flipped(flip_x)},
                                     {b, flipped(flip_y)},
                                     0.5 * (flip_x ? 0.25 : 0.75) * (flip_y ? 0.25 : 0.75)});
            }
        }
    }
    return t;
}

} // namespace

TEST_CASE("the recoded survival process is vital") {
    const auto v = vitality_check(recoded_survival());
    CHECK(v.vital);
    CHECK_FALSE(v.witness.has_value());
}

TEST_CASE("pairing a vital process with an arbitrary coin stays vital") {
    CHECK(vitality_check(vital_pair()).vital);
}

TEST_CASE("the survival indicator times a nonzero process is vital") {
    CHECK(vitality_check(vital_product()).vital);
}

TEST_CASE("a constant-in-time process cannot be vital") {
    const auto v = vitality_check(constant_process());
    REQUIRE_FALSE(v.vital);
    REQUIRE(v.witness.has_value());
    CHECK(v.witness->time_index == 0);
    CHECK(v.witness->value == "c");
    CHECK(v.witness->probability == doctest::Approx(0.8));
}

TEST_CASE("a latent health value with intermediate death odds is non-vital") {
    const auto v = vitality_check(latent_health());
    REQUIRE_FALSE(v.vital);
    REQUIRE(v.witness.has_value());
    CHECK(v.witness->probability > 0.0);
    CHECK(v.witness->probability < 1.0);
}

TEST_CASE("fully independent processes evolve independently both ways") {
    const auto t = independent_pair();
    CHECK(independent_evolution_check(t).holds);
    CHECK(independent_evolution_check(t.swapped()).holds);
    CHECK_FALSE(components_dependent(t));
}

TEST_CASE("a lagged copy fails independent evolution with an explicit witness") {
    const BivariateTable table = lagged_copy();
    const auto verdict = independent_evolution_check(table);
    REQUIRE_FALSE(verdict.holds);
    REQUIRE(verdict.witness.has_value());
    CHECK(verdict.witness->time_index == 0);
    CHECK(verdict.witness->prob_a == doctest::Approx(1.0));
    CHECK(verdict.witness->prob_b == doctest::Approx(0.0));
    // The two histories share the y part but differ in x.
    const auto& a = table.entries[verdict.witness->history_a];
    const auto& b = table.entries[verdict.witness->history_b];
    CHECK(a.y[0] == b.y[0]);
    CHECK(a.x[0] != b.x[0]);
}

TEST_CASE("mutual independent evolution leaves dependence only through the start") {
    const auto t = coupled_initial();
    CHECK(independent_evolution_check(t).holds);
    CHECK(independent_evolution_check(t.swapped()).holds);
    CHECK(components_dependent(t));
    CHECK(conditionally_independent_given_initial(t).holds);
}

TEST_CASE("lagged and contemporaneous copies given the start") {
    // With the lag, the y future is a function of the initial x value, so
    // conditioning on the start removes the dependence entirely.
    CHECK(conditionally_independent_given_initial(lagged_copy()).holds);

    // A contemporaneous copy stays coupled after conditioning.
    BivariateTable t;
    t.times = {0.0, 1.0};
    for (const char* x0 : {"h", "t"}) {
        for (const char* x1 : {"h", "t"}) {
            t.entries.push_back({{x0, x1}, {"c", x1}, 0.25});
        }
    }
    CHECK_FALSE(conditionally_independent_given_initial(t).holds);
}

TEST_CASE("non-normalized tables are rejected") {
    TrajectoryTable t = recoded_survival();
    t.entries[0].prob = 0.3;
    CHECK_THROWS_AS(vitality_check(t), DataError);
    BivariateTable b = lagged_copy();
    b.entries[0].prob = 0.3;
    CHECK_THROWS_AS(independent_evolution_check(b), DataError);
}

TEST_CASE("vitality tables parse from JSON including infinite death times") {
    const char* text = R"({
      "check": "vitality",
      "times": [1.0, 2.0],
      "trajectories": [
        {"values": ["0", "0"], "death_time": 0.5, "prob": 0.2},
        {"values": ["1", "0"], "death_time": 1.5, "prob": 0.3},
        {"values": ["1", "1"], "death_time": "inf", "prob": 0.5}
      ]
    })";
    const auto input = finite_check_from_json_text(text);
    REQUIRE(input.vitality.has_value());
    const auto v = vitality_check(*input.vitality);
    CHECK(v.vital);
    const std::string out = vitality_verdict_to_json_text(v);
    CHECK(out.find("\"vital\": true") != std::string::npos);
}

TEST_CASE("independent-evolution tables parse from JSON") {
    const char* text = R"({
      "check": "independent-evolution",
      "times": [0.0, 1.0],
      "trajectories": [
        {"x": ["h", "h"], "y": ["c", "h"], "prob": 0.25},
        {"x": ["h", "t"], "y": ["c", "h"], "prob": 0.25},
        {"x": ["t", "h"], "y": ["c", "t"], "prob": 0.25},
        {"x": ["t", "t"], "y": ["c", "t"], "prob": 0.25}
      ]
    })";
    const auto input = finite_check_from_json_text(text);
    REQUIRE(input.iev.has_value());
    const auto v = independent_evolution_check(*input.iev);
    CHECK_FALSE(v.holds);
    const std::string out = iev_verdict_to_json_text(v);
    CHECK(out.find("\"holds\": false") != std::string::npos);
}

TEST_CASE("unknown check names are a config error") {
    CHECK_THROWS_AS(finite_check_from_json_text(R"({"check": "nonsense"})"), ConfigError);
}

TEST_CASE("infinite death times count as alive at every time point") {
    TrajectoryTable t;
    t.times = {1.0};
    t.entries = {
        {{"alive"}, kInf, 0.5},
        {{"dead"}, 0.5, 0.5},
    };
    CHECK(vitality_check(t).vital);
}
