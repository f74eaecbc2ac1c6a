#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "survproc/survival.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const char* kModelJson = R"({
  "lambda": {"family": "weibull", "params": [1.5, 10.0]},
  "psi": {
    "alpha": [0.1],
    "mean_curve": {"type": "loglinear", "coefficients": [2.0, 0.0]},
    "beta": [0.0, 1.0],
    "covariance": {"kernel": "ou", "sigma_b2": 1.0, "sigma_g2": 2.0,
                   "rho": 1.0, "sigma_e2": 0.25}
  },
  "simulate": {
    "n": 40,
    "scheme": {"type": "fixed", "horizon": 12.0,
               "schedule": {"type": "regular", "step": 2.0}}
  }
})";

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("survproc_cli_" + std::to_string(::getpid()) + "_" +
                std::to_string(counter()++));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    static int& counter() {
        static int c = 0;
        return c;
    }
};

int run(const std::string& args) {
    const std::string cmd = std::string(SURVPROC_CLI_PATH) + " " + args + " 2>/dev/null";
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    REQUIRE(in.good());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write(const fs::path& p, const std::string& text) {
    std::ofstream out(p);
    out << text;
}

} // namespace

TEST_CASE("simulate with the same seed is byte-identical") {
    TempDir dir;
    write(dir.path / "model.json", kModelJson);
    const std::string model = (dir.path / "model.json").string();
    REQUIRE(run("simulate --model " + model + " --seed 7 --out " + (dir.path / "a").string()) ==
            0);
    REQUIRE(run("simulate --model " + model + " --seed 7 --out " + (dir.path / "b").string()) ==
            0);
    CHECK(slurp(dir.path / "a" / "data.csv") == slurp(dir.path / "b" / "data.csv"));
    CHECK(slurp(dir.path / "a" / "events.csv") == slurp(dir.path / "b" / "events.csv"));

    REQUIRE(run("simulate --model " + model + " --seed 8 --out " + (dir.path / "c").string()) ==
            0);
    CHECK(slurp(dir.path / "a" / "data.csv") != slurp(dir.path / "c" / "data.csv"));
}

TEST_CASE("simulate requires a seed and refuses to overwrite") {
    TempDir dir;
    write(dir.path / "model.json", kModelJson);
    const std::string model = (dir.path / "model.json").string();
    CHECK(run("simulate --model " + model + " --out " + dir.path.string()) == 2);
    REQUIRE(run("simulate --model " + model + " --seed 7 --out " + dir.path.string()) == 0);
    CHECK(run("simulate --model " + model + " --seed 7 --out " + dir.path.string()) == 2);
    CHECK(run("simulate --model " + model + " --seed 7 --force --out " + dir.path.string()) ==
          0);
}

TEST_CASE("fit on simulated output writes a consistent four-factor block") {
    TempDir dir;
    write(dir.path / "model.json", kModelJson);
    const std::string model = (dir.path / "model.json").string();
    REQUIRE(run("simulate --model " + model + " --seed 11 --out " + dir.path.string()) == 0);
    REQUIRE(run("fit --data " + (dir.path / "data.csv").string() + " --events " +
                (dir.path / "events.csv").string() + " --model " + model + " --out " +
                dir.path.string()) == 0);

    const json fit = json::parse(slurp(dir.path / "fit.json"));
    CHECK(fit.at("converged").get<bool>());
    const auto& ff = fit.at("four_factors");
    const double total = ff.at("survival_uncensored").get<double>() +
                         ff.at("survival_censored").get<double>() +
                         ff.at("gaussian_uncensored").get<double>() +
                         ff.at("censored_remainder").get<double>();
    CHECK(std::abs(total - fit.at("loglik").get<double>()) < 1e-8);
    CHECK(std::abs(total - ff.at("total").get<double>()) < 1e-10);

    // Compatibility report exists with a header and one row per usable record.
    const std::string compat = slurp(dir.path / "compatibility.csv");
    CHECK(compat.rfind("patient_id,group,pit,z", 0) == 0);

    SUBCASE("diagnose round-trips the fit result") {
        REQUIRE(run("diagnose --data " + (dir.path / "data.csv").string() + " --events " +
                    (dir.path / "events.csv").string() + " --fit " +
                    (dir.path / "fit.json").string() + " --out " +
                    (dir.path / "diag").string()) == 0);
        const json diag = json::parse(slurp(dir.path / "diag" / "diagnose.json"));
        CHECK(diag.at("fit_result") == fit);
        CHECK(diag.at("summary").contains("rank_sum_z"));
    }
}

TEST_CASE("predict with no history reproduces the prior survival density") {
    TempDir dir;
    write(dir.path / "model.json", kModelJson);
    REQUIRE(run("predict --model " + (dir.path / "model.json").string() +
                " --grid 0.5:10:0.5 --out " + dir.path.string()) == 0);
    std::ifstream in(dir.path / "predictive.csv");
    std::string header;
    std::getline(in, header);
    CHECK(header == "t,density,survivor");
    const survproc::SurvivalFamily fam{survproc::Family::weibull, {1.5, 10.0}};
    std::string line;
    int rows = 0;
    while (std::getline(in, line)) {
        double t = 0.0, dens = 0.0, surv = 0.0;
        REQUIRE(std::sscanf(line.c_str(), "%lf,%lf,%lf", &t, &dens, &surv) == 3);
        CHECK(dens == doctest::Approx(fam.density(t)).epsilon(1e-6));
        CHECK(surv == doctest::Approx(fam.survivor(t)).epsilon(1e-6));
        ++rows;
    }
    CHECK(rows == 20);
}

TEST_CASE("check-vitality writes a verdict") {
    TempDir dir;
    write(dir.path / "table.json", R"({
      "check": "vitality",
      "times": [1.0, 2.0],
      "trajectories": [
        {"values": ["c", "c"], "death_time": 0.5, "prob": 0.2},
        {"values": ["c", "c"], "death_time": 1.5, "prob": 0.3},
        {"values": ["c", "c"], "death_time": "inf", "prob": 0.5}
      ]
    })");
    REQUIRE(run("check-vitality --model " + (dir.path / "table.json").string() + " --out " +
                dir.path.string()) == 0);
    const json verdict = json::parse(slurp(dir.path / "verdict.json"));
    CHECK_FALSE(verdict.at("vital").get<bool>());
    CHECK(verdict.at("witness").at("value").get<std::string>() == "c");
}

TEST_CASE("check-exogeneity runs the probe end to end") {
    TempDir dir;
    write(dir.path / "probe.json", R"({
      "model": {"type": "latent",
                "kernel": {"type": "ou", "sigma2": 1.0, "rho": 1.0},
                "noise_var": 1.0,
                "link": {"type": "loglinear", "a": -1.2, "b": 0.5}},
      "probe": {"ts": [0.5, 1.5, 2.5], "x": [0.3, -0.2, 0.6],
                "t": 2.0, "future_index": 2, "delta": 2.0},
      "mc": {"paths": 4000, "grid_dt": 0.02}
    })");
    const std::string spec = (dir.path / "probe.json").string();
    CHECK(run("check-exogeneity --model " + spec + " --out " + dir.path.string()) == 2);
    REQUIRE(run("check-exogeneity --model " + spec + " --seed 3 --out " + dir.path.string()) ==
            0);
    const json report = json::parse(slurp(dir.path / "exogeneity.json"));
    CHECK(std::abs(report.at("observation_change").get<double>()) > 1e-3);
    CHECK(report.at("verdict").get<std::string>().find("future") != std::string::npos);
}

TEST_CASE("exit codes distinguish config from data failures") {
    TempDir dir;
    write(dir.path / "model.json", kModelJson);
    const std::string model = (dir.path / "model.json").string();
    // Unreadable data file.
    CHECK(run("fit --data " + (dir.path / "nothere.csv").string() + " --events " +
              (dir.path / "nothere2.csv").string() + " --model " + model + " --out " +
              dir.path.string()) == 3);
    // Missing required flag.
    CHECK(run("fit --data x.csv --events y.csv --out " + dir.path.string()) == 2);
    // Malformed model JSON.
    write(dir.path / "bad.json", "{not json");
    CHECK(run("simulate --model " + (dir.path / "bad.json").string() + " --seed 1 --out " +
              (dir.path / "z").string()) == 2);
    // Malformed CSV content.
    write(dir.path / "bad_data.csv", "patient_id,time,value\nP1,oops,1\n");
    write(dir.path / "bad_events.csv", "patient_id,terminal_time,status,arm\nP1,1,1,0\n");
    CHECK(run("fit --data " + (dir.path / "bad_data.csv").string() + " --events " +
              (dir.path / "bad_events.csv").string() + " --model " + model + " --out " +
              (dir.path / "w").string()) == 3);
}
