#include "riskmetric/oracle.hpp"

#include <algorithm>
#include <cmath>

#include "riskmetric/quadrature.hpp"

namespace riskmetric {

namespace {

// Gauss-Legendre 5 on [-1, 1]
const double kGLx[5] = {-0.9061798459386640, -0.5384693101056831, 0.0, 0.5384693101056831,
                        0.9061798459386640};
const double kGLw[5] = {0.2369268850561891, 0.4786286704993665, 0.5688888888888889,
                        0.4786286704993665, 0.2369268850561891};

double clamp01(double v) { return std::min(1.0, std::max(0.0, v)); }

std::vector<double> oracle_grid(const LossModel& m, int n) {
    double x_max = m.has_density() ? m.quantile(1e-6) : m.support_bound();
    if (!(x_max > 0.0)) x_max = std::max(m.mean(), 1e-3);
    std::vector<double> g;
    const double R = 50.0;
    for (int i = 0; i <= n; ++i)
        g.push_back(x_max * (std::pow(R, static_cast<double>(i) / n) - 1.0) / (R - 1.0));
    for (const auto& a : m.atoms())
        if (a.x > 0.0 && a.x < x_max) g.push_back(a.x);
    std::sort(g.begin(), g.end());
    g.erase(std::unique(g.begin(), g.end(),
                        [](double p, double q) { return std::abs(p - q) <= 1e-12 * (1.0 + std::abs(p)); }),
            g.end());
    if (std::abs(g.back() - x_max) > 1e-12 * (1.0 + x_max)) g.push_back(x_max);
    return g;
}

} // namespace

double DiscreteProblem::premium_of(const std::vector<double>& slopes) const {
    double pi = 0.0;
    for (size_t i = 0; i < slopes.size(); ++i) pi += slopes[i] * w_tk[i];
    return pi;
}

double DiscreteProblem::value(const std::vector<double>& slopes) const {
    const int n = segments();
    double pi = premium_of(slopes);
    std::vector<double> cumI(static_cast<size_t>(n) + 1, 0.0);
    for (int i = 0; i < n; ++i) cumI[i + 1] = cumI[i] + slopes[i] * (x[i + 1] - x[i]);
    double v = 0.0;
    for (size_t k = 0; k < node_x.size(); ++k) {
        int c = node_cell[k];
        double I = cumI[c] + slopes[c] * (node_x[k] - x[c]);
        v += node_w[k] * u.u(wealth - (node_x[k] - I) - pi);
    }
    return v;
}

std::vector<double> DiscreteProblem::gradient(const std::vector<double>& slopes) const {
    const int n = segments();
    double pi = premium_of(slopes);
    std::vector<double> cumI(static_cast<size_t>(n) + 1, 0.0);
    for (int i = 0; i < n; ++i) cumI[i + 1] = cumI[i] + slopes[i] * (x[i + 1] - x[i]);

    std::vector<double> cell_wu(n, 0.0), cell_wu_off(n, 0.0);
    double total_wu = 0.0;
    for (size_t k = 0; k < node_x.size(); ++k) {
        int c = node_cell[k];
        double I = cumI[c] + slopes[c] * (node_x[k] - x[c]);
        double wu = node_w[k] * u.uprime(wealth - (node_x[k] - I) - pi);
        cell_wu[c] += wu;
        cell_wu_off[c] += wu * (node_x[k] - x[c]);
        total_wu += wu;
    }
    std::vector<double> suf(static_cast<size_t>(n) + 1, 0.0);
    for (int i = n - 1; i >= 0; --i) suf[i] = suf[i + 1] + cell_wu[i];

    std::vector<double> g(n);
    for (int i = 0; i < n; ++i) {
        double len = x[i + 1] - x[i];
        g[i] = len * suf[i + 1] + cell_wu_off[i] - w_tk[i] * total_wu;
    }
    return g;
}

std::vector<double> DiscreteProblem::hessian_diag(const std::vector<double>& slopes) const {
    const int n = segments();
    double pi = premium_of(slopes);
    std::vector<double> cumI(static_cast<size_t>(n) + 1, 0.0);
    for (int i = 0; i < n; ++i) cumI[i + 1] = cumI[i] + slopes[i] * (x[i + 1] - x[i]);

    std::vector<double> c0(n, 0.0), c1(n, 0.0), c2(n, 0.0);
    double t0 = 0.0;
    for (size_t k = 0; k < node_x.size(); ++k) {
        int c = node_cell[k];
        double I = cumI[c] + slopes[c] * (node_x[k] - x[c]);
        double wu2 = node_w[k] * u.usecond(wealth - (node_x[k] - I) - pi);
        double off = node_x[k] - x[c];
        c0[c] += wu2;
        c1[c] += wu2 * off;
        c2[c] += wu2 * off * off;
        t0 += wu2;
    }
    std::vector<double> suf(static_cast<size_t>(n) + 1, 0.0);
    for (int i = n - 1; i >= 0; --i) suf[i] = suf[i + 1] + c0[i];

    // sum of wu2 * (dI/ds_i - W_i)^2 over nodes, split by node position
    std::vector<double> h(n);
    for (int i = 0; i < n; ++i) {
        double len = x[i + 1] - x[i];
        double W = w_tk[i];
        double beyond = (len - W) * (len - W) * suf[i + 1];
        double inside = c2[i] - 2.0 * W * c1[i] + W * W * c0[i];
        double before = W * W * (t0 - suf[i + 1] - c0[i]);
        h[i] = beyond + inside + before;
    }
    return h;
}

std::vector<double> DiscreteProblem::project_contract(const Indemnity& I) const {
    std::vector<double> s(segments());
    for (int i = 0; i < segments(); ++i)
        s[i] = clamp01((I(x[i + 1]) - I(x[i])) / (x[i + 1] - x[i]));
    return s;
}

DiscreteProblem build_problem(const BuyerPreferences& prefs, const PremiumPrinciple& pp,
                              const LossModel& m, int n, const QuadratureConfig& qcfg) {
    if (n < 2) throw ConfigError("oracle needs at least 2 segments");
    pp.validate();
    DiscreteProblem P;
    P.u = prefs.utility;
    P.wealth = prefs.wealth;
    P.x = oracle_grid(m, n);
    const int N = P.segments();
    P.s.assign(N, 0.5);
    P.prob.resize(N);
    P.w_tk.resize(N);
    P.b_inc.resize(N);

    Distortion tkd = pp.tk();
    Distortion tbd = prefs.tb();
    QuadratureConfig cfg = qcfg;
    cfg.abs_tol = 1e-13;
    cfg.rel_tol = 1e-11;

    for (int i = 0; i < N; ++i) {
        double a = P.x[i], b = P.x[i + 1];
        P.prob[i] = m.survival(a) - m.survival(b);
        P.w_tk[i] = integrate(
            [&](double t) { return tkd(clamp01(m.survival(t))); }, a, b, cfg);
        P.b_inc[i] = tbd(clamp01(m.survival(a))) - tbd(clamp01(m.survival(b)));
        if (m.has_density()) {
            double mid = 0.5 * (a + b);
            double half[2][2] = {{a, mid}, {mid, b}};
            for (auto& hrange : half) {
                double c = 0.5 * (hrange[0] + hrange[1]);
                double r = 0.5 * (hrange[1] - hrange[0]);
                for (int k = 0; k < 5; ++k) {
                    double xx = c + r * kGLx[k];
                    double wq = r * kGLw[k] * tbd.deriv(clamp01(m.survival(xx))) * m.density(xx);
                    if (wq <= 0.0) continue;
                    P.node_x.push_back(xx);
                    P.node_w.push_back(wq);
                    P.node_cell.push_back(i);
                }
            }
        }
    }
    for (const auto& a : m.atoms()) {
        if (a.x > P.x.back() + 1e-12 * (1.0 + P.x.back())) continue;
        double S = clamp01(m.survival(a.x));
        double wq = tbd(std::min(1.0, S + a.p)) - tbd(S);
        if (!(wq > 0.0)) continue;
        auto it = std::upper_bound(P.x.begin(), P.x.end(), a.x);
        int c = static_cast<int>(it - P.x.begin()) - 1;
        if (c >= N) c = N - 1;
        if (c < 0) c = 0;
        P.node_x.push_back(a.x);
        P.node_w.push_back(wq);
        P.node_cell.push_back(c);
    }
    return P;
}

OracleResult brute_force_solve(const BuyerPreferences& prefs, const PremiumPrinciple& pp,
                               const LossModel& m, int n, int iters,
                               const QuadratureConfig& qcfg) {
    DiscreteProblem P = build_problem(prefs, pp, m, n, qcfg);
    const int N = P.segments();
    std::vector<double> s(N, 0.5);
    double v = P.value(s);

    OracleResult best;
    best.slopes = s;
    best.value = v;

    for (int it = 1; it <= iters; ++it) {
        best.iterations = it;
        std::vector<double> g = P.gradient(s);
        std::vector<double> h = P.hessian_diag(s);
        double hmax = 0.0;
        for (double hv : h) hmax = std::max(hmax, std::abs(hv));
        std::vector<double> dir(N);
        for (int i = 0; i < N; ++i) {
            double prec = hmax > 1e-14 ? std::max(std::abs(h[i]), 1e-3 * hmax) : 1.0;
            dir[i] = g[i] / prec;
        }
        // projected gradient sup norm (stationarity measure)
        double pg = 0.0;
        for (int i = 0; i < N; ++i) {
            if (s[i] <= 0.0 && g[i] < 0.0) continue;
            if (s[i] >= 1.0 && g[i] > 0.0) continue;
            pg = std::max(pg, std::abs(g[i]));
        }
        best.grad_sup = pg;
        if (pg <= 1e-12 * std::max(1.0, std::abs(v))) break;

        double t = 1.0;
        bool accepted = false;
        for (int bt = 0; bt < 45; ++bt) {
            std::vector<double> cand(N);
            double dot = 0.0;
            for (int i = 0; i < N; ++i) {
                cand[i] = clamp01(s[i] + t * dir[i]);
                dot += g[i] * (cand[i] - s[i]);
            }
            double vc = P.value(cand);
            if (vc >= v + 1e-4 * dot && vc > v) {
                s = std::move(cand);
                v = vc;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if (v > best.value) {
            best.value = v;
            best.slopes = s;
        }
        if (!accepted) break; // no ascent direction left at this resolution
    }
    return best;
}

TinyResult exhaustive_tiny(const BuyerPreferences& prefs, const PremiumPrinciple& pp,
                           const LossModel& m, int slope_levels, const QuadratureConfig& qcfg) {
    if (m.kind() != LossKind::Discrete)
        throw ConfigError("exhaustive oracle requires a discrete loss");
    if (static_cast<int>(m.atoms().size()) > 3)
        throw ConfigError("exhaustive oracle limited to 3 atoms");
    if (slope_levels < 2 || slope_levels > 101)
        throw ConfigError("exhaustive oracle limited to slope grids between 2 and 101 levels");
    pp.validate();

    std::vector<double> grid{0.0};
    for (const auto& a : m.atoms())
        if (a.x > 0.0) grid.push_back(a.x);
    if (grid.size() == 1) grid.push_back(1.0); // lone atom at zero: one vacuous segment
    std::sort(grid.begin(), grid.end());

    DiscreteProblem P;
    P.u = prefs.utility;
    P.wealth = prefs.wealth;
    P.x = grid;
    const int N = P.segments();
    P.s.assign(N, 0.0);
    P.prob.resize(N);
    P.w_tk.resize(N);
    P.b_inc.resize(N);
    Distortion tkd = pp.tk();
    Distortion tbd = prefs.tb();
    QuadratureConfig cfg = qcfg;
    cfg.abs_tol = 1e-14;
    cfg.rel_tol = 1e-12;
    for (int i = 0; i < N; ++i) {
        double a = P.x[i], b = P.x[i + 1];
        P.prob[i] = m.survival(a) - m.survival(b);
        P.w_tk[i] = integrate([&](double t) { return tkd(clamp01(m.survival(t))); }, a, b, cfg);
        P.b_inc[i] = tbd(clamp01(m.survival(a))) - tbd(clamp01(m.survival(b)));
    }
    for (const auto& a : m.atoms()) {
        double S = clamp01(m.survival(a.x));
        double wq = tbd(std::min(1.0, S + a.p)) - tbd(S);
        auto it = std::upper_bound(P.x.begin(), P.x.end(), a.x);
        int c = static_cast<int>(it - P.x.begin()) - 1;
        if (c >= N) c = N - 1;
        if (c < 0) c = 0;
        P.node_x.push_back(a.x);
        P.node_w.push_back(wq);
        P.node_cell.push_back(c);
    }

    TinyResult out;
    std::vector<int> idx(N, 0);
    std::vector<double> s(N, 0.0);
    bool first = true;
    const int tie_cap = 256;
    while (true) {
        for (int i = 0; i < N; ++i) s[i] = static_cast<double>(idx[i]) / (slope_levels - 1);
        double v = P.value(s);
        if (first || v > out.value + 1e-12 * (1.0 + std::abs(out.value))) {
            out.value = v;
            out.slopes = s;
            out.tie_count = 1;
            out.ties.clear();
            out.ties.push_back(s);
            first = false;
        } else if (v >= out.value - 1e-12 * (1.0 + std::abs(out.value))) {
            ++out.tie_count;
            if (static_cast<int>(out.ties.size()) < tie_cap) out.ties.push_back(s);
        }
        int j = 0;
        while (j < N && ++idx[j] == slope_levels) idx[j++] = 0;
        if (j == N) break;
    }
    return out;
}

double gradient_check(const BuyerPreferences& prefs, const PremiumPrinciple& pp,
                      const LossModel& m, const std::vector<double>& s, double h,
                      const QuadratureConfig& qcfg) {
    if (s.empty()) throw ConfigError("gradient check needs a non-empty slope vector");
    for (double v : s)
        if (!(v > h && v < 1.0 - h))
            throw ConfigError("gradient check requires interior slopes (in (h, 1-h))");
    DiscreteProblem P = build_problem(prefs, pp, m, static_cast<int>(s.size()), qcfg);
    // build_problem may enrich the grid with atom knots; tile the vector if so
    std::vector<double> sv = s;
    if (P.segments() != static_cast<int>(s.size())) {
        sv.resize(P.segments());
        for (size_t i = 0; i < sv.size(); ++i) sv[i] = s[i % s.size()];
    }
    std::vector<double> ga = P.gradient(sv);
    double gnorm = 0.0;
    for (double g : ga) gnorm = std::max(gnorm, std::abs(g));
    double err = 0.0;
    std::vector<double> sp = sv, sm = sv;
    for (size_t i = 0; i < sv.size(); ++i) {
        sp[i] = sv[i] + h;
        sm[i] = sv[i] - h;
        double fd = (P.value(sp) - P.value(sm)) / (2.0 * h);
        err = std::max(err, std::abs(ga[i] - fd));
        sp[i] = sv[i];
        sm[i] = sv[i];
    }
    return err / std::max(gnorm, 1e-300);
}

} // namespace riskmetric
