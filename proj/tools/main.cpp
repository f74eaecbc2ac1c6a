#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <thread>

#include "survproc/csv.hpp"
#include "survproc/exposure.hpp"
#include "survproc/finite_check.hpp"
#include "survproc/likelihood.hpp"
#include "survproc/model.hpp"
#include "survproc/simulate.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace survproc;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumerical = 4;
constexpr int kExitNonConvergence = 5;

struct RunConfig {
    std::string data_path;
    std::string events_path;
    std::string model_path;
    std::string fit_path;
    std::string out_dir = ".";
    std::optional<std::uint64_t> seed;
    int workers = 0;
    double tol = 0.0;      ///< quadrature relative tolerance override
    int mc_paths = 0;      ///< Monte Carlo path override
    bool force = false;
    std::string patient;
    std::string grid;
};

int effective_workers(const RunConfig& rc) {
    if (rc.workers > 0) return rc.workers;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? static_cast<int>(hw) : 1;
}

QuadratureConfig quadrature_from(const RunConfig& rc) {
    QuadratureConfig qc;
    if (rc.tol > 0.0) qc.rel_tol = rc.tol;
    return qc;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

/// Output files never overwrite silently.
fs::path output_path(const RunConfig& rc, const std::string& name) {
    fs::create_directories(rc.out_dir);
    fs::path p = fs::path(rc.out_dir) / name;
    if (fs::exists(p) && !rc.force) {
        throw ConfigError("output '" + p.string() + "' exists; pass --force to overwrite");
    }
    return p;
}

void write_text(const fs::path& p, const std::string& text) {
    std::ofstream out(p);
    if (!out) throw ConfigError("cannot open '" + p.string() + "' for writing");
    out << text;
    if (!text.empty() && text.back() != '\n') out << '\n';
}

json parse_json(const std::string& text, const char* what) {
    try {
        return json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string(what) + ": " + e.what());
    }
}

StationaryKernel kernel_from(const json& j) {
    StationaryKernel k;
    k.type = kernel_from_string(j.at("type").get<std::string>());
    k.sigma2 = j.at("sigma2").get<double>();
    k.rho = j.at("rho").get<double>();
    k.check();
    return k;
}

HazardLink link_from(const json& j) {
    HazardLink link;
    const std::string type = j.at("type").get<std::string>();
    if (type == "loglinear") {
        link.type = HazardLink::Type::loglinear;
    } else if (type == "identity") {
        // Truncation at zero biases the hazard integral once paths cross it.
        link.type = HazardLink::Type::identity;
    } else {
        throw ConfigError("unknown hazard link '" + type + "'");
    }
    link.a = j.at("a").get<double>();
    link.b = j.at("b").get<double>();
    return link;
}

int cmd_simulate(const RunConfig& rc) {
    if (!rc.seed) throw ConfigError("simulate is stochastic; --seed is required");
    const json j = parse_json(read_file(rc.model_path), "model JSON");
    const ModelParams mp = model_params_from_json_text(j.dump());
    if (!j.contains("simulate")) {
        throw ConfigError("model JSON needs a 'simulate' section for this command");
    }
    const json& sim = j.at("simulate");
    const auto n = sim.at("n").get<std::size_t>();
    const json& scheme = sim.at("scheme");
    const std::string type = scheme.at("type").get<std::string>();

    const auto data_p = output_path(rc, "data.csv");
    const auto events_p = output_path(rc, "events.csv");

    if (type == "fixed") {
        FixedSchedule sched;
        sched.horizon = scheme.at("horizon").get<double>();
        const json& sj = scheme.at("schedule");
        if (sj.at("type") == "regular") {
            sched = FixedSchedule::regular(sched.horizon, sj.at("step").get<double>());
        } else if (sj.at("type") == "explicit") {
            sched.times = sj.at("times").get<std::vector<double>>();
            sched.check();
        } else {
            throw ConfigError("schedule type must be 'regular' or 'explicit'");
        }
        const Dataset ds = simulate_fixed_dataset(n, sched, mp, *rc.seed);
        write_dataset(ds, data_p.string(), events_p.string());
    } else if (type == "sequential") {
        const double horizon = scheme.at("horizon").get<double>();
        const json& pj = scheme.at("policy");
        std::unique_ptr<AppointmentPolicy> policy;
        if (pj.at("type") == "constant") {
            policy = std::make_unique<ConstantGapPolicy>(pj.at("gap").get<double>());
        } else if (pj.at("type") == "shifted_exp") {
            policy = std::make_unique<ShiftedExpGapPolicy>(pj.at("min_gap").get<double>(),
                                                           pj.at("base_rate").get<double>(),
                                                           pj.at("value_coef").get<double>());
        } else {
            throw ConfigError("policy type must be 'constant' or 'shifted_exp'");
        }
        const auto appts_p = output_path(rc, "appointments.csv");
        const auto recs = simulate_sequential_dataset(n, *policy, horizon, mp, *rc.seed);
        write_dataset(to_dataset(recs), data_p.string(), events_p.string());
        std::ostringstream app;
        app << "patient_id,visit_index,visit_time,scheduled_next\n";
        for (const auto& r : recs) {
            for (std::size_t v = 0; v < r.scheduled_next.size(); ++v) {
                app << r.record.patient_id << ',' << v << ','
                    << format_double(r.record.times[v]) << ','
                    << format_double(r.scheduled_next[v]) << '\n';
            }
        }
        write_text(appts_p, app.str());
    } else {
        throw ConfigError("scheme type must be 'fixed' or 'sequential'");
    }
    return kExitOk;
}

std::string compatibility_csv(const CompatibilityReport& report) {
    std::ostringstream out;
    out << "patient_id,group,pit,z\n";
    for (const auto& e : report.entries) {
        out << e.patient_id << ',' << (e.censored ? "censored" : "uncensored") << ','
            << format_double(e.pit) << ',' << format_double(e.z) << '\n';
    }
    return out.str();
}

json compatibility_summary(const CompatibilityReport& report) {
    json j;
    j["n_censored"] = report.n_censored;
    j["n_uncensored"] = report.n_uncensored;
    j["aggregate_defined"] = report.aggregate_defined;
    if (report.aggregate_defined) {
        j["rank_sum_z"] = report.rank_sum_z;
        j["flagged"] = report.flagged;
    }
    j["skipped"] = report.skipped;
    return j;
}

int cmd_fit(const RunConfig& rc) {
    const ModelParams structure = read_model_params(rc.model_path);
    const Dataset ds = read_dataset(rc.data_path, rc.events_path);
    const auto bad = ds.validate_all();
    if (!bad.empty()) {
        throw DataError("record '" + ds.records[bad.front().first].patient_id +
                        "' violates invariants: " + bad.front().second.front());
    }
    const QuadratureConfig qc = quadrature_from(rc);
    FitOptions opts;
    opts.workers = effective_workers(rc);

    const auto fit_p = output_path(rc, "fit.json");
    const auto compat_p = output_path(rc, "compatibility.csv");

    const FitResult fr = fit_staged_then_joint(ds, structure, qc, opts);
    write_text(fit_p, fit_result_to_json_text(fr));

    const CompatibilityReport report = censored_compatibility(ds, fr.params, qc, opts.workers);
    write_text(compat_p, compatibility_csv(report));

    if (!fr.converged) {
        throw ConvergenceError("joint fit did not converge in " +
                               std::to_string(fr.iterations) + " iterations");
    }
    return kExitOk;
}

int cmd_predict(const RunConfig& rc) {
    const ModelParams mp = read_model_params(rc.model_path);
    const QuadratureConfig qc = quadrature_from(rc);

    std::vector<double> ts;
    std::vector<double> y;
    int arm = 0;
    if (!rc.data_path.empty()) {
        if (rc.patient.empty()) {
            throw ConfigError("predict with --data needs --patient");
        }
        const Dataset ds = read_dataset(rc.data_path, rc.events_path);
        const PatientRecord* rec = nullptr;
        for (const auto& r : ds.records) {
            if (r.patient_id == rc.patient) rec = &r;
        }
        if (rec == nullptr) throw DataError("patient '" + rc.patient + "' not found");
        ts = rec->real_times();
        y = rec->real_values();
        arm = rec->arm;
    }

    if (rc.grid.empty()) throw ConfigError("predict needs --grid start:stop:step");
    double g0 = 0.0;
    double g1 = 0.0;
    double gs = 0.0;
    if (std::sscanf(rc.grid.c_str(), "%lf:%lf:%lf", &g0, &g1, &gs) != 3 || !(gs > 0.0) ||
        !(g1 >= g0)) {
        throw ConfigError("cannot parse --grid '" + rc.grid + "'");
    }

    const ClinicalPredictive pred(ts, y, arm, mp, qc);
    std::ostringstream out;
    out << "t,density,survivor\n";
    for (double t = g0; t <= g1 + 1e-12; t += gs) {
        out << format_double(t) << ',' << format_double(pred.density(t)) << ','
            << format_double(pred.survivor(t)) << '\n';
    }
    write_text(output_path(rc, "predictive.csv"), out.str());
    return kExitOk;
}

int cmd_diagnose(const RunConfig& rc) {
    const FitResult fr = fit_result_from_json_text(read_file(rc.fit_path));
    const Dataset ds = read_dataset(rc.data_path, rc.events_path);
    const QuadratureConfig qc = quadrature_from(rc);
    const CompatibilityReport report =
        censored_compatibility(ds, fr.params, qc, effective_workers(rc));

    write_text(output_path(rc, "compatibility.csv"), compatibility_csv(report));
    json j;
    j["summary"] = compatibility_summary(report);
    j["fit_result"] = json::parse(fit_result_to_json_text(fr));
    write_text(output_path(rc, "diagnose.json"), j.dump(2));
    return kExitOk;
}

int cmd_check_exogeneity(const RunConfig& rc) {
    if (!rc.seed) throw ConfigError("check-exogeneity is stochastic; --seed is required");
    const json j = parse_json(read_file(rc.model_path), "probe spec JSON");

    MCConfig mc;
    if (j.contains("mc")) {
        const json& m = j.at("mc");
        mc.n_paths = m.value("paths", mc.n_paths);
        mc.grid_dt = m.value("grid_dt", mc.grid_dt);
        mc.chunks = m.value("chunks", mc.chunks);
    }
    if (rc.mc_paths > 0) mc.n_paths = rc.mc_paths;
    mc.seed = *rc.seed;

    const json& mj = j.at("model");
    ProbeModel model;
    const std::string type = mj.at("type").get<std::string>();
    if (type == "exposure") {
        ExposureModel em;
        em.mu0 = mj.value("mu0", 0.0);
        em.k0 = kernel_from(mj.at("kernel"));
        em.link = link_from(mj.at("link"));
        model = em;
    } else if (type == "latent") {
        LatentJointModel ljm;
        ljm.k = kernel_from(mj.at("kernel"));
        ljm.noise_var = mj.at("noise_var").get<double>();
        ljm.link = link_from(mj.at("link"));
        model = ljm;
    } else {
        throw ConfigError("model type must be 'exposure' or 'latent'");
    }

    const json& pj = j.at("probe");
    const auto ts = pj.at("ts").get<std::vector<double>>();
    const auto x = pj.at("x").get<std::vector<double>>();
    const double t = pj.at("t").get<double>();
    const auto future_index = pj.at("future_index").get<std::size_t>();
    const double delta = pj.at("delta").get<double>();

    const ProbeReport report = exogeneity_probe(model, ts, x, t, future_index, delta, mc);
    json out;
    out["base"] = report.base;
    out["perturbed"] = report.perturbed;
    out["observation_change"] = report.observation_change;
    out["observation_se"] = report.observation_se;
    out["construction_change"] = report.construction_change;
    out["construction_bit_exact"] = report.construction_bit_exact;
    out["verdict"] = report.verdict;
    write_text(output_path(rc, "exogeneity.json"), out.dump(2));
    return kExitOk;
}

int cmd_check_vitality(const RunConfig& rc) {
    const FiniteCheckInput input = finite_check_from_json_text(read_file(rc.model_path));
    std::string verdict;
    if (input.vitality) {
        verdict = vitality_verdict_to_json_text(vitality_check(*input.vitality));
    } else {
        verdict = iev_verdict_to_json_text(independent_evolution_check(*input.iev));
    }
    write_text(output_path(rc, "verdict.json"), verdict);
    return kExitOk;
}

void emit_error(int code, const char* kind, const std::string& message) {
    json j;
    j["error"] = {{"code", code}, {"kind", kind}, {"message", message}};
    std::cerr << j.dump() << std::endl;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Gaussian survival-process toolkit: simulation, likelihood fitting, "
                 "clinical prediction, and exogeneity checks"};
    app.require_subcommand(1);

    RunConfig rc;
    std::uint64_t seed_value = 0;
    bool seed_set = false;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--data", rc.data_path, "patient data CSV");
        sub->add_option("--events", rc.events_path, "event CSV");
        sub->add_option("--model", rc.model_path, "model config JSON");
        sub->add_option("--fit", rc.fit_path, "fit result JSON");
        sub->add_option("--seed", seed_value, "RNG seed")->each([&](const std::string&) {
            seed_set = true;
        });
        sub->add_option("--out", rc.out_dir, "output directory");
        sub->add_option("--workers", rc.workers, "worker threads (default: logical cores)");
        sub->add_option("--tol", rc.tol, "quadrature relative tolerance");
        sub->add_option("--mc-paths", rc.mc_paths, "Monte Carlo path count");
        sub->add_flag("--force", rc.force, "overwrite existing outputs");
    };

    auto* sim = app.add_subcommand("simulate", "simulate patient records");
    add_common(sim);
    sim->get_option("--model")->required();

    auto* fit = app.add_subcommand("fit", "staged and joint maximum likelihood");
    add_common(fit);
    fit->get_option("--data")->required();
    fit->get_option("--events")->required();
    fit->get_option("--model")->required();

    auto* predict = app.add_subcommand("predict", "clinical predictive distribution");
    add_common(predict);
    predict->get_option("--model")->required();
    predict->add_option("--patient", rc.patient, "patient id for the measurement history");
    predict->add_option("--grid", rc.grid, "output grid start:stop:step");

    auto* diagnose = app.add_subcommand("diagnose", "censored-record compatibility report");
    add_common(diagnose);
    diagnose->get_option("--data")->required();
    diagnose->get_option("--events")->required();
    diagnose->get_option("--fit")->required();

    auto* exo = app.add_subcommand("check-exogeneity", "future-observation dependence probe");
    add_common(exo);
    exo->get_option("--model")->required();

    auto* vital = app.add_subcommand("check-vitality", "finite-process vitality or "
                                                       "independent-evolution check");
    add_common(vital);
    vital->get_option("--model")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        emit_error(kExitConfig, "config", e.what());
        return kExitConfig;
    }

    if (seed_set) rc.seed = seed_value;

    try {
        if (sim->parsed()) return cmd_simulate(rc);
        if (fit->parsed()) return cmd_fit(rc);
        if (predict->parsed()) return cmd_predict(rc);
        if (diagnose->parsed()) return cmd_diagnose(rc);
        if (exo->parsed()) return cmd_check_exogeneity(rc);
        if (vital->parsed()) return cmd_check_vitality(rc);
        emit_error(kExitConfig, "config", "no subcommand selected");
        return kExitConfig;
    } catch (const ConfigError& e) {
        emit_error(kExitConfig, "config", e.what());
        return kExitConfig;
    } catch (const DataError& e) {
        emit_error(kExitData, "data", e.what());
        return kExitData;
    } catch (const ConvergenceError& e) {
        emit_error(kExitNonConvergence, "non-convergence", e.what());
        return kExitNonConvergence;
    } catch (const NumericError& e) {
        emit_error(kExitNumerical, "numerical", e.what());
        return kExitNumerical;
    } catch (const std::exception& e) {
        emit_error(kExitNumerical, "numerical", e.what());
        return kExitNumerical;
    }
}
