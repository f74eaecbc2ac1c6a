#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "survproc/simulate.hpp"

using namespace survproc;

namespace {

ModelParams base_model() {
    ModelParams mp;
    mp.survival = {Family::weibull, {1.5, 10.0}};
    mp.mean.alpha = {0.1};
    mp.mean.m0 = LogLinearCurve{2.0, 0.0};
    mp.mean.beta = {0.0};
    mp.cov = {1.0, KernelType::exponential, 2.0, 1.0, 0.25};
    return mp;
}

/// Two-sample Kolmogorov-Smirnov p-value (asymptotic).
double ks_two_sample_p(std::vector<double> a, std::vector<double> b) {
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    double d = 0.0;
    std::size_t i = 0;
    std::size_t j = 0;
    while (i < a.size() && j < b.size()) {
        if (a[i] <= b[j]) {
            ++i;
        } else {
            ++j;
        }
        const double fa = static_cast<double>(i) / static_cast<double>(a.size());
        const double fb = static_cast<double>(j) / static_cast<double>(b.size());
        d = std::max(d, std::abs(fa - fb));
    }
    const double ne = static_cast<double>(a.size()) * static_cast<double>(b.size()) /
                      static_cast<double>(a.size() + b.size());
    const double lambda = (std::sqrt(ne) + 0.12 + 0.11 / std::sqrt(ne)) * d;
    double p = 0.0;
    for (int k = 1; k <= 100; ++k) {
        p += 2.0 * (k % 2 == 1 ? 1.0 : -1.0) * std::exp(-2.0 * k * k * lambda * lambda);
    }
    return std::clamp(p, 0.0, 1.0);
}

} // namespace

TEST_CASE("empty schedule produces a pure survival datum") {
    const ModelParams mp = base_model();
    FixedSchedule sched;
    sched.horizon = 12.0;
    Philox rng(1, 1);
    const PatientRecord rec = simulate_fixed(sched, 0, mp, rng, "P0");
    CHECK(rec.times.empty());
    CHECK(rec.values.empty());
    CHECK(validate(rec).empty());
}

TEST_CASE("survival beyond the horizon censors every record with a full schedule") {
    ModelParams mp = base_model();
    mp.survival.lambda = {1.5, 1000.0};  // deaths effectively never before 12
    const FixedSchedule sched = FixedSchedule::regular(12.0, 1.0);
    for (std::uint64_t i = 0; i < 50; ++i) {
        Philox rng(2, i);
        const PatientRecord rec = simulate_fixed(sched, 0, mp, rng, "P");
        CHECK_FALSE(rec.terminal.is_death());
        CHECK(rec.terminal.time == 12.0);
        CHECK(rec.times.size() == sched.times.size());
    }
}

TEST_CASE("records carry exactly the pre-death measurements") {
    const ModelParams mp = base_model();
    const FixedSchedule sched = FixedSchedule::regular(12.0, 0.5);
    for (std::uint64_t i = 0; i < 200; ++i) {
        Philox rng(3, i);
        const PatientRecord rec = simulate_fixed(sched, 0, mp, rng, "P");
        CHECK(validate(rec).empty());
        if (rec.terminal.is_death()) {
            for (const double s : rec.times) CHECK(s < rec.terminal.time);
            std::size_t expected = 0;
            for (const double s : sched.times) {
                if (s < rec.terminal.time) ++expected;
            }
            CHECK(rec.times.size() == expected);
        }
    }
}

TEST_CASE("empirical death fraction matches one minus the survivor") {
    const ModelParams mp = base_model();
    FixedSchedule sched;
    sched.horizon = 12.0;
    const std::size_t n = 100000;
    std::size_t deaths = 0;
    for (std::uint64_t i = 0; i < n; ++i) {
        Philox rng(5, i);
        if (simulate_fixed(sched, 0, mp, rng, "P").terminal.is_death()) ++deaths;
    }
    const double p = 1.0 - mp.survival.survivor(12.0);
    const double se = std::sqrt(p * (1.0 - p) / static_cast<double>(n));
    CHECK(std::abs(static_cast<double>(deaths) / static_cast<double>(n) - p) < 3.0 * se);
}

TEST_CASE("a constant-gap policy reduces to a regular schedule") {
    const ModelParams mp = base_model();
    const ConstantGapPolicy policy(0.5);
    Philox rng(7, 1);
    const SequentialRecord rec = simulate_sequential(policy, 12.0, 0, mp, rng, "P");
    for (std::size_t j = 0; j < rec.record.times.size(); ++j) {
        CHECK(rec.record.times[j] == doctest::Approx(0.5 * static_cast<double>(j)));
    }
    CHECK(detect_off_schedule(rec).breaches.empty());
    CHECK(validate(rec.record).empty());
}

TEST_CASE("sequential draws match the scheme density on a coarse histogram") {
    // Exponential survival, t-dependent health mean, value-dependent policy.
    ModelParams mp;
    mp.survival = {Family::exponential, {1.0}};
    mp.mean.alpha = {};
    mp.mean.m0 = LogLinearCurve{1.0, 0.0};
    mp.mean.beta = {0.0};
    mp.cov = {0.0, KernelType::exponential, 0.5, 1.0, 0.5};  // Var Y(0) = 1
    const ShiftedExpGapPolicy policy(0.2, 1.0, 0.5);
    const double horizon = 50.0;

    // Box in (y0, t1, T) inside the one-value event {T < t1}.
    const double y_lo = -0.5, y_hi = 0.5;
    const double t1_lo = 0.5, t1_hi = 1.5;
    const double td_lo = 0.2, td_hi = 0.45;

    // Midpoint oracle for the joint density
    // f(T) phi(y; log(1+T), 1) g(t1 - 0 | y).
    const int panels = 60;
    double expected = 0.0;
    for (int a = 0; a < panels; ++a) {
        const double td = td_lo + (a + 0.5) * (td_hi - td_lo) / panels;
        for (int b = 0; b < panels; ++b) {
            const double y = y_lo + (b + 0.5) * (y_hi - y_lo) / panels;
            for (int c = 0; c < panels; ++c) {
                const double t1 = t1_lo + (c + 0.5) * (t1_hi - t1_lo) / panels;
                const double f = std::exp(-td);
                const double mean = std::log1p(td);
                const double phi =
                    std::exp(-0.5 * (y - mean) * (y - mean)) / std::sqrt(2.0 * M_PI);
                const double g = std::exp(policy.log_density(t1, 0.0, y));
                expected += f * phi * g;
            }
        }
    }
    expected *= (td_hi - td_lo) * (y_hi - y_lo) * (t1_hi - t1_lo) /
                static_cast<double>(panels * panels * panels);

    const std::size_t n = 200000;
    std::size_t hits = 0;
    for (std::uint64_t i = 0; i < n; ++i) {
        Philox rng(11, i);
        const SequentialRecord rec = simulate_sequential(policy, horizon, 0, mp, rng, "P");
        if (rec.record.times.size() != 1 || !rec.record.terminal.is_death()) continue;
        const double y0 = rec.record.values[0].value();
        const double t1 = rec.scheduled_next[0];
        const double td = rec.record.terminal.time;
        if (y0 > y_lo && y0 < y_hi && t1 > t1_lo && t1 < t1_hi && td > td_lo && td < td_hi) {
            ++hits;
        }
    }
    const double freq = static_cast<double>(hits) / static_cast<double>(n);
    const double se = std::sqrt(expected * (1.0 - expected) / static_cast<double>(n));
    CHECK(std::abs(freq - expected) < 3.0 * se + 0.02 * expected);
}

TEST_CASE("a value-blind policy makes appointment times independent of psi") {
    ModelParams mp_a = base_model();
    ModelParams mp_b = base_model();
    mp_b.mean.alpha = {0.5};
    mp_b.mean.m0 = LogLinearCurve{-1.0, 0.3};
    const ShiftedExpGapPolicy policy(0.2, 1.0, 0.0);
    std::vector<double> first_gap_a;
    std::vector<double> first_gap_b;
    for (std::uint64_t i = 0; i < 10000; ++i) {
        Philox rng_a(13, i);
        Philox rng_b(17, i);
        first_gap_a.push_back(
            simulate_sequential(policy, 10.0, 0, mp_a, rng_a, "P").scheduled_next[0]);
        first_gap_b.push_back(
            simulate_sequential(policy, 10.0, 0, mp_b, rng_b, "P").scheduled_next[0]);
    }
    CHECK(ks_two_sample_p(first_gap_a, first_gap_b) > 0.01);
}

TEST_CASE("the number of appointments correlates with health under a sensitive policy") {
    const ModelParams mp = base_model();
    const ShiftedExpGapPolicy policy(0.2, 0.6, 0.6);
    std::vector<double> counts;
    std::vector<double> means;
    for (std::uint64_t i = 0; i < 10000; ++i) {
        Philox rng(19, i);
        const SequentialRecord rec = simulate_sequential(policy, 10.0, 0, mp, rng, "P");
        if (rec.record.times.empty()) continue;
        double m = 0.0;
        for (const auto& v : rec.record.values) m += v.value();
        counts.push_back(static_cast<double>(rec.record.times.size()));
        means.push_back(m / static_cast<double>(rec.record.values.size()));
    }
    const auto n = static_cast<double>(counts.size());
    double mc = 0.0, mm = 0.0;
    for (std::size_t i = 0; i < counts.size(); ++i) {
        mc += counts[i];
        mm += means[i];
    }
    mc /= n;
    mm /= n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < counts.size(); ++i) {
        sxy += (counts[i] - mc) * (means[i] - mm);
        sxx += (counts[i] - mc) * (counts[i] - mc);
        syy += (means[i] - mm) * (means[i] - mm);
    }
    const double corr = sxy / std::sqrt(sxx * syy);
    // Sicker patients are seen sooner, so more visits go with lower values.
    CHECK(corr < -0.05);
}

TEST_CASE("off-schedule detection reports the perturbed visit") {
    ModelParams mp = base_model();
    mp.survival.lambda = {1.5, 1000.0};  // survives the horizon
    const ShiftedExpGapPolicy policy(0.3, 1.0, 0.0);
    Philox rng(23, 5);
    SequentialRecord rec = simulate_sequential(policy, 12.0, 0, mp, rng, "P");
    REQUIRE(rec.record.times.size() >= 3);

    CHECK(detect_off_schedule(rec).applicable);
    CHECK(detect_off_schedule(rec).breaches.empty());

    SequentialRecord bent = rec;
    bent.record.times[2] += 0.1;
    const auto report = detect_off_schedule(bent);
    REQUIRE(report.breaches.size() == 1);
    CHECK(report.breaches[0].visit_index == 2);
    CHECK(report.breaches[0].actual == doctest::Approx(report.breaches[0].scheduled + 0.1));

    CHECK(detect_off_schedule(bent, 0.2).breaches.empty());
}

TEST_CASE("off-schedule detection without annotations is not applicable") {
    SequentialRecord rec;
    rec.record.times = {0.0, 1.0};
    rec.record.values = {StateValue::real(0.0), StateValue::real(0.0)};
    rec.record.terminal = Terminal::censored(2.0);
    CHECK_FALSE(detect_off_schedule(rec).applicable);
}

TEST_CASE("appointment policy cannot alter the survival marginal") {
    const ModelParams mp = base_model();
    const ShiftedExpGapPolicy policy(0.2, 0.8, 0.5);
    FixedSchedule empty_sched;
    empty_sched.horizon = 10.0;
    int passes = 0;
    const int reps = 20;
    for (int rep = 0; rep < reps; ++rep) {
        std::vector<double> fixed_deaths;
        std::vector<double> seq_deaths;
        for (std::uint64_t i = 0; i < 10000; ++i) {
            const std::uint64_t stream = static_cast<std::uint64_t>(rep) * 20000 + i;
            Philox rng_f(29, stream);
            fixed_deaths.push_back(mp.survival.sample(rng_f));
            Philox rng_s(31, stream);
            const auto rec = simulate_sequential(policy, 1e9, 0, mp, rng_s, "P");
            seq_deaths.push_back(rec.record.terminal.time);
        }
        if (ks_two_sample_p(fixed_deaths, seq_deaths) > 0.01) ++passes;
    }
    CHECK(passes >= 19);
}

TEST_CASE("identical seed and patient id reproduce the record in any order") {
    const ModelParams mp = base_model();
    const FixedSchedule sched = FixedSchedule::regular(12.0, 1.0);
    const Dataset ds = simulate_fixed_dataset(10, sched, mp, 71);
    Philox rng(71, stream_id("P00007"));
    const PatientRecord alone = simulate_fixed(sched, 0, mp, rng, "P00007");
    CHECK(alone == ds.records[7]);

    const Dataset again = simulate_fixed_dataset(10, sched, mp, 71);
    CHECK(again == ds);
}

TEST_CASE("byte-identical reruns of the sequential scheme") {
    const ModelParams mp = base_model();
    const ShiftedExpGapPolicy policy(0.3, 1.0, 0.4);
    const auto a = simulate_sequential_dataset(5, policy, 8.0, mp, 73);
    const auto b = simulate_sequential_dataset(5, policy, 8.0, mp, 73);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].record == b[i].record);
        CHECK(a[i].scheduled_next == b[i].scheduled_next);
    }
}
