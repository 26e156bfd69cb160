#include "riskmetric/json_io.hpp"

#include <cmath>
#include <fstream>
#include <limits>

namespace riskmetric {

using nlohmann::json;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

const json& need(const json& j, const char* key, const char* what) {
    auto it = j.find(key);
    if (it == j.end())
        throw ConfigError(std::string(what) + ": missing field '" + key + "'");
    return *it;
}

double num(const json& j, const char* key, const char* what) {
    const json& v = need(j, key, what);
    if (!v.is_number())
        throw ConfigError(std::string(what) + ": field '" + key + "' must be a number");
    return v.get<double>();
}

double num_or(const json& j, const char* key, double dflt) {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) return dflt;
    if (!it->is_number())
        throw ConfigError(std::string("field '") + key + "' must be a number");
    return it->get<double>();
}

std::vector<double> vec(const json& j, const char* key, const char* what) {
    const json& v = need(j, key, what);
    if (!v.is_array())
        throw ConfigError(std::string(what) + ": field '" + key + "' must be an array");
    std::vector<double> out;
    out.reserve(v.size());
    for (const auto& e : v) {
        if (!e.is_number())
            throw ConfigError(std::string(what) + ": field '" + key + "' must hold numbers");
        out.push_back(e.get<double>());
    }
    return out;
}

std::string kind_of(const json& j, const char* what) {
    const json& k = need(j, "kind", what);
    if (!k.is_string())
        throw ConfigError(std::string(what) + ": field 'kind' must be a string");
    return k.get<std::string>();
}

json jnum(double v) { return std::isfinite(v) ? json(v) : json(); }

} // namespace

Distortion distortion_from_json(const json& j) {
    const char* what = "distortion config";
    if (!j.is_object()) throw ConfigError(std::string(what) + ": expected an object");
    std::string kind = kind_of(j, what);
    if (kind == "zero") return Distortion::zero();
    if (kind == "identity") return Distortion::identity();
    if (kind == "linear") return Distortion::linear(num(j, "slope", what));
    if (kind == "power") return Distortion::power(num(j, "theta", what), num(j, "c", what));
    if (kind == "dual_power")
        return Distortion::dual_power(num(j, "theta", what), num(j, "c", what));
    if (kind == "gini") return Distortion::gini(num_or(j, "alpha", 1.0));
    if (kind == "mean_median") return Distortion::mean_median(num_or(j, "alpha", 1.0));
    if (kind == "linear_plus_gini")
        return Distortion::linear_plus_gini(num(j, "theta", what), num(j, "alpha", what));
    if (kind == "linear_plus_mean_median")
        return Distortion::linear_plus_mean_median(num(j, "theta", what), num(j, "alpha", what));
    if (kind == "convex_dual_power") return Distortion::convex_dual_power(num(j, "a", what));
    if (kind == "tabulated")
        return Distortion::tabulated(vec(j, "knots", what), vec(j, "values", what));
    throw ConfigError(std::string(what) + ": unknown kind '" + kind + "'");
}

LossModel loss_from_json(const json& j) {
    const char* what = "loss config";
    if (!j.is_object()) throw ConfigError(std::string(what) + ": expected an object");
    std::string kind = kind_of(j, what);
    if (kind == "zero_inflated_exponential")
        return LossModel::zero_inflated_exponential(num(j, "q", what), num(j, "lambda", what));
    if (kind == "discrete") return LossModel::discrete(vec(j, "xs", what), vec(j, "ps", what));
    if (kind == "truncated_density")
        return LossModel::truncated_density(num(j, "q", what), vec(j, "xs", what),
                                            vec(j, "fs", what));
    throw ConfigError(std::string(what) + ": unknown kind '" + kind + "'");
}

Utility utility_from_json(const json& j) {
    const char* what = "utility config";
    if (!j.is_object()) throw ConfigError(std::string(what) + ": expected an object");
    std::string kind = kind_of(j, what);
    if (kind == "linear") return Utility::linear();
    if (kind == "cara") return Utility::cara(num(j, "gamma", what));
    if (kind == "crra") return Utility::crra(num(j, "eta", what));
    if (kind == "hara") return Utility::hara(num(j, "a", what), num(j, "m", what));
    throw ConfigError(std::string(what) + ": unknown kind '" + kind + "'");
}

SolverConfig solver_from_json(const json& j) {
    SolverConfig cfg;
    if (j.is_null()) return cfg;
    if (!j.is_object()) throw ConfigError("solver config: expected an object");
    cfg.grid_n = static_cast<int>(num_or(j, "grid_n", cfg.grid_n));
    cfg.omega = num_or(j, "omega", cfg.omega);
    cfg.tol = num_or(j, "tol", cfg.tol);
    cfg.max_iter = static_cast<int>(num_or(j, "max_iter", cfg.max_iter));
    cfg.L_zero_band = num_or(j, "L_zero_band", cfg.L_zero_band);
    if (auto it = j.find("allow_nonconvex_b"); it != j.end()) {
        if (!it->is_boolean())
            throw ConfigError("solver config: 'allow_nonconvex_b' must be a boolean");
        cfg.allow_nonconvex_b = it->get<bool>();
    }
    cfg.validate();
    return cfg;
}

QuadratureConfig quadrature_from_json(const json& j) {
    QuadratureConfig cfg;
    if (j.is_null()) return cfg;
    if (!j.is_object()) throw ConfigError("quadrature config: expected an object");
    cfg.abs_tol = num_or(j, "abs_tol", cfg.abs_tol);
    cfg.rel_tol = num_or(j, "rel_tol", cfg.rel_tol);
    cfg.max_subdivisions = static_cast<int>(num_or(j, "max_subdivisions", cfg.max_subdivisions));
    cfg.tail_mass = num_or(j, "tail_mass", cfg.tail_mass);
    cfg.validate();
    return cfg;
}

Indemnity contract_from_json(const json& j, const RunConfig* ctx) {
    const char* what = "contract config";
    if (!j.is_object()) throw ConfigError(std::string(what) + ": expected an object");
    std::string kind = kind_of(j, what);
    if (kind == "zero") return Indemnity::zero();
    if (kind == "full") return Indemnity::full();
    if (kind == "deductible") return Indemnity::deductible(num(j, "d", what));
    if (kind == "max_limit") return Indemnity::max_limit(num(j, "m", what));
    if (kind == "deductible_coinsurance")
        return Indemnity::deductible_coinsurance(num(j, "d", what), num(j, "alpha", what));
    if (kind == "piecewise_linear")
        return Indemnity::piecewise_linear(vec(j, "knots", what), vec(j, "slopes", what),
                                           num_or(j, "ext_slope", 0.0));
    if (kind == "diml") {
        const json& pj = need(j, "params", what);
        if (!pj.is_object())
            throw ConfigError(std::string(what) + ": field 'params' must be an object");
        std::string family = need(j, "family", what).get<std::string>();
        double d = num(j, "d", what);
        double m = num_or(j, "m", kInf);
        double pi = num_or(j, "pi_star", 0.0);
        double ups = num_or(j, "upsilon", 0.0);
        if (family == "dual_power") {
            double gamma = num(pj, "gamma", what), lambda = num(pj, "lambda", what);
            double c = num(pj, "c", what), q = num(pj, "q", what);
            auto A = [q, lambda](double x) { return 1.0 - q * std::exp(-lambda * x); };
            DimlInterior di;
            di.family = family;
            di.params = {{"gamma", gamma}, {"lambda", lambda},        {"c", c},
                         {"theta", num(pj, "theta", what)}, {"q", q}, {"d", d}};
            di.value = [A, d, c, gamma](double x) {
                return x - d - (c - 1.0) / gamma * std::log(A(x) / A(d));
            };
            di.slope = [A, q, lambda, c, gamma](double x) {
                return 1.0 - (c - 1.0) / gamma * q * lambda * std::exp(-lambda * x) / A(x);
            };
            return Indemnity::diml(d, m, std::move(di), pi, ups);
        }
        if (family == "gini") {
            double gamma = num(pj, "gamma", what), lambda = num(pj, "lambda", what);
            double alpha = num(pj, "alpha", what), q = num(pj, "q", what);
            double theta = num(pj, "theta", what);
            auto B = [q, lambda, alpha, theta](double x) {
                return (1.0 + theta) + alpha * (1.0 - 2.0 * q * std::exp(-lambda * x));
            };
            DimlInterior di;
            di.family = family;
            di.params = {{"gamma", gamma}, {"lambda", lambda}, {"alpha", alpha},
                         {"theta", theta}, {"q", q},           {"d", d}};
            di.value = [B, d, gamma](double x) { return x - d - std::log(B(x) / B(d)) / gamma; };
            di.slope = [B, q, lambda, alpha, gamma](double x) {
                return 1.0 - 2.0 * alpha * q * lambda * std::exp(-lambda * x) / (gamma * B(x));
            };
            return Indemnity::diml(d, m, std::move(di), pi, ups);
        }
        if (family == "general") {
            if (!ctx)
                throw ConfigError(std::string(what) +
                                  ": a generic interior contract needs the surrounding "
                                  "loss/preferences/premium config to rebuild");
            return rebuild_interior_contract(ctx->prefs, ctx->pp, ctx->loss, d, m,
                                             num(pj, "pi", what), num(pj, "upsilon", what));
        }
        throw ConfigError(std::string(what) + ": unknown interior family '" + family + "'");
    }
    throw ConfigError(std::string(what) + ": unknown kind '" + kind + "'");
}

json contract_to_json(const Indemnity& I) {
    json j;
    switch (I.kind()) {
    case ContractKind::Zero:
        j["kind"] = "zero";
        break;
    case ContractKind::Full:
        j["kind"] = "full";
        break;
    case ContractKind::Deductible:
        j["kind"] = "deductible";
        j["d"] = I.d();
        break;
    case ContractKind::MaxLimit:
        j["kind"] = "max_limit";
        j["m"] = I.m();
        break;
    case ContractKind::DeductibleCoinsurance:
        j["kind"] = "deductible_coinsurance";
        j["d"] = I.d();
        j["alpha"] = I.alpha();
        break;
    case ContractKind::PiecewiseLinear:
        j["kind"] = "piecewise_linear";
        j["knots"] = I.pl_knots();
        j["slopes"] = I.pl_slopes();
        j["ext_slope"] = I.ext_slope();
        break;
    case ContractKind::Diml: {
        j["kind"] = "diml";
        const DimlInterior* di = I.interior();
        j["family"] = di ? di->family : "general";
        j["d"] = I.d();
        j["m"] = jnum(I.m());
        j["pi_star"] = I.pi_star();
        j["upsilon"] = I.upsilon();
        json pj = json::object();
        if (di)
            for (const auto& [k, v] : di->params) pj[k] = v;
        j["params"] = pj;
        break;
    }
    }
    return j;
}

RunConfig parse_run_config(const json& j) {
    if (!j.is_object()) throw ConfigError("run config: expected a JSON object");
    RunConfig cfg;
    cfg.raw = j;
    cfg.loss = loss_from_json(need(j, "loss", "run config"));

    const json& pr = need(j, "preferences", "run config");
    if (!pr.is_object()) throw ConfigError("run config: 'preferences' must be an object");
    cfg.prefs.utility = utility_from_json(need(pr, "utility", "preferences config"));
    cfg.prefs.b = pr.contains("b") ? distortion_from_json(pr.at("b")) : Distortion::identity();
    cfg.prefs.wealth = num(pr, "wealth", "preferences config");

    const json& pm = need(j, "premium", "run config");
    if (!pm.is_object()) throw ConfigError("run config: 'premium' must be an object");
    bool gh = pm.contains("g") || pm.contains("h");
    bool tk = pm.contains("theta") || pm.contains("k");
    if (gh == tk)
        throw ConfigError("premium config: give exactly one of the {g, h} pair or the "
                          "{theta, k} pair");
    if (gh) {
        Distortion g =
            pm.contains("g") ? distortion_from_json(pm.at("g")) : Distortion::identity();
        Distortion h = pm.contains("h") ? distortion_from_json(pm.at("h")) : Distortion::zero();
        cfg.pp = canonical_decompose(g, h);
    } else {
        cfg.pp.theta = num(pm, "theta", "premium config");
        cfg.pp.k = pm.contains("k") ? distortion_from_json(pm.at("k")) : Distortion::zero();
        cfg.pp.validate();
    }

    cfg.solver = solver_from_json(j.contains("solver") ? j.at("solver") : json());
    cfg.quadrature = quadrature_from_json(j.contains("quadrature") ? j.at("quadrature") : json());
    cfg.prefs.validate(cfg.solver.allow_nonconvex_b);

    if (j.contains("contract") && !j.at("contract").is_null())
        cfg.contract = contract_from_json(j.at("contract"), &cfg);
    return cfg;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    json j = json::parse(in); // parse errors carry line/column positions
    return parse_run_config(j);
}

json report_to_json(const SolveReport& rep) {
    json j;
    j["contract"] = contract_to_json(rep.contract);
    j["premium"] = rep.premium;
    j["rdeu_value"] = rep.rdeu;
    j["rdeu_divergent"] = rep.rdeu_divergent;
    j["residual"] = rep.residual;
    j["regime"] = regime_name(rep.regime);
    j["unique"] = rep.unique;
    j["unique_reason"] = rep.unique_reason;
    j["iterations"] = rep.iterations;
    j["solver_path"] = rep.solver_path;
    j["converged"] = rep.converged;
    j["d_star"] = jnum(rep.d_star);
    j["m_limit"] = jnum(rep.m_limit);
    j["slope_interior"] = jnum(rep.slope_interior);
    j["upsilon"] = jnum(rep.upsilon);
    j["g_residual"] = jnum(rep.g_residual);
    j["theta"] = rep.theta;
    j["grid_n"] = rep.grid_n;
    return j;
}

} // namespace riskmetric
