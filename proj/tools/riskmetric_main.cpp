#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "riskmetric/json_io.hpp"
#include "riskmetric/oracle.hpp"
#include "riskmetric/riskmetrics.hpp"
#include "riskmetric/solver.hpp"

using nlohmann::json;
using namespace riskmetric;

namespace {

void emit(const json& j, const std::string& out_path) {
    if (out_path.empty()) {
        std::cout << j.dump(2) << "\n";
        return;
    }
    std::ofstream out(out_path);
    if (!out) throw ConfigError("cannot write output file: " + out_path);
    out << j.dump(2) << "\n";
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

// Recognizes the closed-form CARA + zero-inflated-exponential configurations
// from the raw document, so `solve` can route them to the exact-root paths.
struct FamilyRoute {
    std::string family; // "power", "dual_power", "gini"
    double gamma = 0.0, lambda = 0.0, q = 0.0, shape = 0.0, theta = 0.0;
    std::optional<double> a_buyer;
};

std::optional<FamilyRoute> detect_family(const RunConfig& cfg) {
    const json& raw = cfg.raw;
    if (!raw.is_object()) return std::nullopt;
    const json& loss = raw.value("loss", json());
    const json& pr = raw.value("preferences", json());
    const json& pm = raw.value("premium", json());
    if (loss.value("kind", "") != std::string("zero_inflated_exponential")) return std::nullopt;
    const json& ut = pr.value("utility", json());
    if (ut.value("kind", "") != std::string("cara")) return std::nullopt;

    FamilyRoute fs;
    fs.gamma = ut.value("gamma", 0.0);
    fs.lambda = loss.value("lambda", 0.0);
    fs.q = loss.value("q", 0.0);

    std::string b_kind = "identity";
    if (pr.contains("b")) b_kind = pr.at("b").value("kind", "");
    if (pm.contains("h") && pm.at("h").value("kind", "") != std::string("zero"))
        return std::nullopt;

    if (pm.contains("g")) {
        const json& g = pm.at("g");
        std::string gk = g.value("kind", "");
        if (gk == "power") {
            if (b_kind == "convex_dual_power")
                fs.a_buyer = pr.at("b").value("a", 0.0);
            else if (b_kind != "identity")
                return std::nullopt;
            fs.family = "power";
            fs.theta = g.value("theta", 0.0);
            fs.shape = g.value("c", 0.0);
            return fs;
        }
        if (b_kind != "identity") return std::nullopt;
        if (gk == "dual_power") {
            fs.family = "dual_power";
            fs.theta = g.value("theta", 0.0);
            fs.shape = g.value("c", 0.0);
            return fs;
        }
        if (gk == "linear_plus_gini") {
            fs.family = "gini";
            fs.theta = g.value("theta", 0.0);
            fs.shape = g.value("alpha", 0.0);
            return fs;
        }
        return std::nullopt;
    }
    if (b_kind != "identity") return std::nullopt;
    if (pm.contains("k") && pm.at("k").value("kind", "") == std::string("gini")) {
        fs.family = "gini";
        fs.theta = pm.value("theta", 0.0);
        fs.shape = pm.at("k").value("alpha", 1.0);
        return fs;
    }
    return std::nullopt;
}

SolveReport solve_family(const RunConfig& cfg, const FamilyRoute& fs) {
    double w = cfg.prefs.wealth;
    if (fs.family == "power")
        return solve_power_exponential(fs.gamma, fs.lambda, fs.shape, fs.theta, fs.q, w,
                                       fs.a_buyer, cfg.solver, cfg.quadrature);
    if (fs.family == "dual_power")
        return solve_dualpower_exponential(fs.gamma, fs.lambda, fs.shape, fs.theta, fs.q, w,
                                           cfg.solver, cfg.quadrature);
    return solve_gini_exponential(fs.gamma, fs.lambda, fs.shape, fs.theta, fs.q, w, cfg.solver,
                                  cfg.quadrature);
}

SolveReport run_solve(const RunConfig& cfg, const std::string& method) {
    if (method == "auto") {
        if (auto fs = detect_family(cfg)) return solve_family(cfg, *fs);
        return solve_general(cfg.prefs, cfg.pp, cfg.loss, cfg.solver, cfg.quadrature);
    }
    if (method == "general")
        return solve_general(cfg.prefs, cfg.pp, cfg.loss, cfg.solver, cfg.quadrature);
    if (method == "deductible")
        return solve_deductible(cfg.prefs, cfg.pp, cfg.loss, cfg.solver, cfg.quadrature);
    if (method == "max_limit")
        return solve_max_limit(cfg.pp, cfg.prefs.b, cfg.loss, cfg.solver, cfg.quadrature,
                               &cfg.prefs);
    if (method == "diml") return solve_diml(cfg.prefs, cfg.pp, cfg.loss, cfg.solver, cfg.quadrature);
    if (method == "power_exponential" || method == "dualpower_exponential" ||
        method == "gini_exponential") {
        auto fs = detect_family(cfg);
        std::string want = method.substr(0, method.find('_'));
        if (want == "dualpower") want = "dual_power";
        if (want == "gini") want = "gini";
        if (want == "power") want = "power";
        if (!fs || fs->family != want)
            throw ConfigError("config does not match the " + method +
                              " family form (cara utility, zero-inflated exponential loss, "
                              "matching premium distortion)");
        return solve_family(cfg, *fs);
    }
    throw ConfigError("unknown solve method '" + method + "'");
}

void write_curves(const std::string& path, const RunConfig& cfg, const Indemnity& I) {
    MarginalFunction mf = compute_L(I, cfg.prefs, cfg.pp, cfg.loss, cfg.solver, cfg.quadrature);
    Distortion tb = cfg.prefs.tb();
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write csv file: " + path);
    out << "x,I_star,R_star,L,tk_S,tb_S\n";
    for (size_t i = 0; i < mf.t.size(); ++i) {
        double x = mf.t[i];
        double Ix = I(x);
        double S = cfg.loss.survival(x);
        out << fmt(x) << ',' << fmt(Ix) << ',' << fmt(x - Ix) << ',' << fmt(mf.L[i]) << ','
            << fmt(mf.tk_S[i]) << ',' << fmt(tb(S)) << "\n";
    }
}

struct CmdOpts {
    std::string config_path;
    std::string out_path;
    std::string csv_path;
    std::string report_path;
    std::string method = "auto";
    int oracle_n = 200;
    int oracle_iters = 4000;
    int gradcheck = 0;
    std::uint64_t seed = 42;
};

void cmd_premium(const CmdOpts& o) {
    RunConfig cfg = load_run_config(o.config_path);
    if (!cfg.contract) throw ConfigError("premium needs a 'contract' entry in the config");
    PremiumSplit ps = premium_split(cfg.pp, *cfg.contract, cfg.loss, cfg.quadrature);
    json j;
    j["premium"] = ps.total;
    j["loading_part"] = ps.loading_part;
    j["deviation_part"] = ps.deviation_part;
    emit(j, o.out_path);
}

void cmd_evaluate(const CmdOpts& o) {
    RunConfig cfg = load_run_config(o.config_path);
    if (!cfg.contract) throw ConfigError("evaluate needs a 'contract' entry in the config");
    double pi = premium(cfg.pp, *cfg.contract, cfg.loss, cfg.quadrature);
    RdeuResult r = rdeu_value_checked(cfg.prefs, *cfg.contract, pi, cfg.loss, cfg.quadrature);
    json j;
    j["premium"] = pi;
    j["rdeu_value"] = r.value;
    j["divergent"] = r.divergent;
    if (r.divergent) {
        j["certainty_equivalent"] = nullptr;
    } else {
        try {
            j["certainty_equivalent"] = cfg.prefs.utility.inv_u(r.value);
        } catch (const DomainError&) {
            j["certainty_equivalent"] = nullptr;
        }
    }
    emit(j, o.out_path);
}

void cmd_solve(const CmdOpts& o) {
    RunConfig cfg = load_run_config(o.config_path);
    SolveReport rep = run_solve(cfg, o.method);
    emit(report_to_json(rep), o.out_path);
    if (!o.csv_path.empty()) write_curves(o.csv_path, cfg, rep.contract);
}

void cmd_verify(const CmdOpts& o) {
    RunConfig cfg = load_run_config(o.config_path);
    Indemnity I;
    if (!o.report_path.empty()) {
        std::ifstream in(o.report_path);
        if (!in) throw ConfigError("cannot open report file: " + o.report_path);
        json rj = json::parse(in);
        I = contract_from_json(rj.at("contract"), &cfg);
        if (rj.contains("grid_n") && rj.at("grid_n").is_number())
            cfg.solver.grid_n = rj.at("grid_n").get<int>();
    } else if (cfg.contract) {
        I = *cfg.contract;
    } else {
        throw ConfigError("verify needs a contract, either in the config or via --report");
    }
    double res = verify_optimality(I, cfg.prefs, cfg.pp, cfg.loss, cfg.solver, cfg.quadrature);
    double pi = premium(cfg.pp, I, cfg.loss, cfg.quadrature);
    json j;
    j["residual"] = res;
    j["premium"] = pi;
    j["regime"] = regime_name(classify(I));
    emit(j, o.out_path);
    if (!o.csv_path.empty()) write_curves(o.csv_path, cfg, I);
}

void cmd_oracle(const CmdOpts& o) {
    RunConfig cfg = load_run_config(o.config_path);
    OracleResult ores =
        brute_force_solve(cfg.prefs, cfg.pp, cfg.loss, o.oracle_n, o.oracle_iters, cfg.quadrature);
    SolveReport rep = run_solve(cfg, o.method);
    DiscreteProblem prob =
        build_problem(cfg.prefs, cfg.pp, cfg.loss, o.oracle_n, cfg.quadrature);
    std::vector<double> sol = prob.project_contract(rep.contract);
    double v_sol = prob.value(sol);

    Indemnity oracle_I;
    {
        std::vector<double> knots = prob.x;
        oracle_I = Indemnity::piecewise_linear(std::move(knots), ores.slopes, 0.0);
    }
    // compare where the loss carries mass; cells past the 1e-4 quantile get
    // no ascent signal and would dominate the sup with unconverged slopes
    double hi = prob.x.back();
    if (cfg.loss.has_density()) hi = std::min(hi, cfg.loss.quantile(1e-4));
    double dist = 0.0;
    for (int i = 0; i <= 2000; ++i) {
        double x = hi * i / 2000.0;
        dist = std::max(dist, std::abs(oracle_I(x) - rep.contract(x)));
    }

    json j;
    j["value_oracle"] = ores.value;
    j["value_solver_on_grid"] = v_sol;
    j["value_gap"] = ores.value - v_sol;
    j["contract_distance"] = dist;
    j["oracle_grad_sup"] = ores.grad_sup;
    j["oracle_iterations"] = ores.iterations;
    j["solver_regime"] = regime_name(rep.regime);
    if (o.gradcheck > 0) {
        std::mt19937_64 rng(o.seed);
        std::uniform_real_distribution<double> U(0.05, 0.95);
        double worst = 0.0;
        for (int r = 0; r < o.gradcheck; ++r) {
            std::vector<double> s(prob.segments());
            for (auto& v : s) v = U(rng);
            worst = std::max(worst,
                             gradient_check(cfg.prefs, cfg.pp, cfg.loss, s, 1e-6, cfg.quadrature));
        }
        j["gradcheck_max_err"] = worst;
        j["gradcheck_points"] = o.gradcheck;
    }
    emit(j, o.out_path);
}

void cmd_orders(const CmdOpts& o) {
    std::ifstream in(o.config_path);
    if (!in) throw ConfigError("cannot open config file: " + o.config_path);
    json doc = json::parse(in);
    const json& ob = doc.contains("orders") ? doc.at("orders") : doc;
    if (!ob.is_object() || !ob.contains("j1") || !ob.contains("j2"))
        throw ConfigError("orders needs 'j1' and 'j2' distortion entries");
    Distortion j1 = distortion_from_json(ob.at("j1"));
    Distortion j2 = distortion_from_json(ob.at("j2"));
    int grid_n = ob.value("grid_n", 2000);

    OrderResult fsd = check_order(j1, j2, StochOrder::FSD, grid_n);
    OrderResult hr = check_order(j1, j2, StochOrder::HR, grid_n);
    OrderResult lr = check_order(j1, j2, StochOrder::LR, grid_n);
    json j;
    j["fsd"] = fsd.holds;
    j["hr"] = hr.holds;
    j["lr"] = lr.holds;
    if (!fsd.holds && fsd.fails_at)
        j["fails_at"] = *fsd.fails_at;
    else if (!hr.holds && hr.fails_at)
        j["fails_at"] = *hr.fails_at;
    else if (!lr.holds && lr.fails_at)
        j["fails_at"] = *lr.fails_at;
    else
        j["fails_at"] = nullptr;
    emit(j, o.out_path);
}

struct SweepAxis {
    std::string path;
    std::vector<double> values;
};

void set_by_path(json& doc, const std::string& path, double v) {
    json* cur = &doc;
    size_t start = 0;
    while (true) {
        size_t dot = path.find('.', start);
        std::string comp = path.substr(start, dot == std::string::npos ? dot : dot - start);
        if (comp.empty()) throw ConfigError("sweep: empty component in path '" + path + "'");
        if (dot == std::string::npos) {
            (*cur)[comp] = v;
            return;
        }
        cur = &(*cur)[comp];
        start = dot + 1;
    }
}

void cmd_sweep(const CmdOpts& o) {
    RunConfig base = load_run_config(o.config_path);
    const json& raw = base.raw;
    if (!raw.contains("sweep") || !raw.at("sweep").is_array() || raw.at("sweep").empty())
        throw ConfigError("sweep needs a non-empty 'sweep' array in the config");
    const json& sw = raw.at("sweep");
    if (sw.size() > 2) throw ConfigError("sweep supports at most two parameters");

    std::vector<SweepAxis> axes;
    for (const auto& a : sw) {
        SweepAxis ax;
        ax.path = a.at("path").get<std::string>();
        double from = a.at("from").get<double>();
        double to = a.at("to").get<double>();
        double step = a.at("step").get<double>();
        if (!(step > 0.0)) throw ConfigError("sweep: step must be positive");
        for (double v = from; v <= to + step * 1e-9; v += step) ax.values.push_back(v);
        axes.push_back(std::move(ax));
    }
    size_t n1 = axes[0].values.size();
    size_t n2 = axes.size() > 1 ? axes[1].values.size() : 1;
    size_t cells = n1 * n2;
    if (cells > 100000) throw ConfigError("sweep: more than 1e5 cells requested");

    std::ostringstream header;
    header << axes[0].path;
    if (axes.size() > 1) header << ',' << axes[1].path;
    header << ",regime,d_star,slope,premium,rdeu_value,residual";

    std::vector<std::string> rows(cells);
    std::atomic<size_t> next{0};
    auto worker = [&]() {
        while (true) {
            size_t idx = next.fetch_add(1);
            if (idx >= cells) return;
            double v1 = axes[0].values[idx / n2];
            double v2 = axes.size() > 1 ? axes[1].values[idx % n2] : 0.0;
            json doc = raw;
            doc.erase("sweep");
            set_by_path(doc, axes[0].path, v1);
            if (axes.size() > 1) set_by_path(doc, axes[1].path, v2);
            std::ostringstream row;
            row << fmt(v1);
            if (axes.size() > 1) row << ',' << fmt(v2);
            try {
                RunConfig cfg = parse_run_config(doc);
                SolveReport rep = run_solve(cfg, o.method);
                row << ',' << regime_name(rep.regime) << ',' << fmt(rep.d_star) << ','
                    << fmt(rep.slope_interior) << ',' << fmt(rep.premium) << ','
                    << fmt(rep.rdeu) << ',' << fmt(rep.residual);
            } catch (const std::exception&) {
                row << ",error,nan,nan,nan,nan,nan";
            }
            rows[idx] = row.str();
        }
    };

    unsigned hw = std::thread::hardware_concurrency();
    size_t nthreads = hw ? hw : 4;
    if (const char* env = std::getenv("RISKMETRIC_THREADS")) {
        long cap = std::strtol(env, nullptr, 10);
        if (cap > 0) nthreads = std::min<size_t>(nthreads, static_cast<size_t>(cap));
    }
    nthreads = std::max<size_t>(1, std::min(nthreads, cells ? cells : 1));
    std::vector<std::thread> pool;
    for (size_t t = 0; t + 1 < nthreads; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();

    if (o.out_path.empty()) {
        std::cout << header.str() << "\n";
        for (const auto& r : rows) std::cout << r << "\n";
    } else {
        std::ofstream out(o.out_path);
        if (!out) throw ConfigError("cannot write output file: " + o.out_path);
        out << header.str() << "\n";
        for (const auto& r : rows) out << r << "\n";
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"distortion-deviation premia and optimal indemnity contracts"};
    app.require_subcommand(1);
    CmdOpts o;

    auto add_common = [&](CLI::App* sub, bool csv = false) {
        sub->add_option("--config", o.config_path, "JSON run configuration")->required();
        sub->add_option("--out", o.out_path, "output path (default: stdout)");
        if (csv) sub->add_option("--csv", o.csv_path, "write the marginal-gain curves as CSV");
    };

    CLI::App* c_premium = app.add_subcommand("premium", "premium of a contract, with its split");
    add_common(c_premium);
    CLI::App* c_eval = app.add_subcommand("evaluate", "distorted expected utility of a contract");
    add_common(c_eval);
    CLI::App* c_solve = app.add_subcommand("solve", "solve for the optimal contract");
    add_common(c_solve, true);
    c_solve->add_option("--method", o.method,
                        "auto|general|deductible|max_limit|diml|power_exponential|"
                        "dualpower_exponential|gini_exponential");
    CLI::App* c_verify = app.add_subcommand("verify", "optimality residual of a contract");
    add_common(c_verify, true);
    c_verify->add_option("--report", o.report_path, "take the contract from a solve report");
    CLI::App* c_oracle = app.add_subcommand("oracle", "compare against the brute-force optimizer");
    add_common(c_oracle);
    c_oracle->add_option("--n", o.oracle_n, "oracle grid segments");
    c_oracle->add_option("--iters", o.oracle_iters, "max ascent iterations");
    c_oracle->add_option("--gradcheck", o.gradcheck, "also check gradients at K random points");
    c_oracle->add_option("--seed", o.seed, "seed for randomized checks");
    c_oracle->add_option("--method", o.method, "solver routing, as in solve");
    CLI::App* c_orders = app.add_subcommand("orders", "stochastic-order checks for a pair");
    add_common(c_orders);
    CLI::App* c_sweep = app.add_subcommand("sweep", "solve across a parameter grid, CSV output");
    add_common(c_sweep);
    c_sweep->add_option("--method", o.method, "solver routing, as in solve");

    c_premium->callback([&] { cmd_premium(o); });
    c_eval->callback([&] { cmd_evaluate(o); });
    c_solve->callback([&] { cmd_solve(o); });
    c_verify->callback([&] { cmd_verify(o); });
    c_oracle->callback([&] { cmd_oracle(o); });
    c_orders->callback([&] { cmd_orders(o); });
    c_sweep->callback([&] { cmd_sweep(o); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const json::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const DomainError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const PreconditionError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const QuadratureError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
