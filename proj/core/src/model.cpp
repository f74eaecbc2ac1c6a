#include "survproc/model.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "survproc/errors.hpp"

namespace survproc {

using nlohmann::json;

namespace {

json curve_to_json(const MeanCurve& m) {
    if (const auto* ll = std::get_if<LogLinearCurve>(&m)) {
        return {{"type", "loglinear"}, {"coefficients", {ll->c_log, ll->c_lin}}};
    }
    const auto& sp = std::get<NaturalSplineCurve>(m);
    return {{"type", "spline"}, {"knots", sp.knots()}, {"values", sp.values()}};
}

MeanCurve curve_from_json(const json& j) {
    const std::string type = j.at("type").get<std::string>();
    if (type == "loglinear") {
        const auto c = j.at("coefficients").get<std::vector<double>>();
        if (c.size() != 2) throw ConfigError("loglinear mean curve needs 2 coefficients");
        return LogLinearCurve{c[0], c[1]};
    }
    if (type == "spline") {
        return NaturalSplineCurve(j.at("knots").get<std::vector<double>>(),
                                  j.at("values").get<std::vector<double>>());
    }
    throw ConfigError("unknown mean curve type '" + type + "'");
}

} // namespace

ModelParams model_params_from_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("model JSON parse failure: ") + e.what());
    }
    try {
        ModelParams mp;
        const auto& lam = j.at("lambda");
        mp.survival.family = family_from_string(lam.at("family").get<std::string>());
        mp.survival.lambda = lam.at("params").get<std::vector<double>>();

        const auto& psi = j.at("psi");
        mp.mean.alpha = psi.at("alpha").get<std::vector<double>>();
        mp.mean.m0 = curve_from_json(psi.at("mean_curve"));
        mp.mean.beta = psi.at("beta").get<std::vector<double>>();

        const auto& cov = psi.at("covariance");
        mp.cov.kernel = kernel_from_string(cov.at("kernel").get<std::string>());
        mp.cov.sigma_b2 = cov.at("sigma_b2").get<double>();
        mp.cov.sigma_g2 = cov.at("sigma_g2").get<double>();
        mp.cov.rho = cov.at("rho").get<double>();
        mp.cov.sigma_e2 = cov.at("sigma_e2").get<double>();

        mp.check();
        return mp;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("model JSON missing or mistyped field: ") + e.what());
    }
}

ModelParams read_model_params(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open model file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return model_params_from_json_text(buf.str());
}

std::string model_params_to_json_text(const ModelParams& mp) {
    json j;
    j["lambda"] = {{"family", family_to_string(mp.survival.family)},
                   {"params", mp.survival.lambda}};
    j["psi"] = {{"alpha", mp.mean.alpha},
                {"mean_curve", curve_to_json(mp.mean.m0)},
                {"beta", mp.mean.beta},
                {"covariance",
                 {{"kernel", kernel_to_string(mp.cov.kernel)},
                  {"sigma_b2", mp.cov.sigma_b2},
                  {"sigma_g2", mp.cov.sigma_g2},
                  {"rho", mp.cov.rho},
                  {"sigma_e2", mp.cov.sigma_e2}}}};
    return j.dump(2);
}

void write_model_params(const ModelParams& mp, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot open '" + path + "' for writing");
    out << model_params_to_json_text(mp) << '\n';
}

} // namespace survproc
