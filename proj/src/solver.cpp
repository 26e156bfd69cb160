#include "riskmetric/solver.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include "riskmetric/quadrature.hpp"

namespace riskmetric {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double clip01(double v) { return std::min(1.0, std::max(0.0, v)); }

// expm1(x)/x, continuous through x = 0
double em1r(double x) { return x == 0.0 ? 1.0 : std::expm1(x) / x; }

std::vector<double> merge_points(std::vector<double> a, const std::vector<double>& b, double hi) {
    for (double v : b)
        if (v > 0.0 && v < hi && std::isfinite(v)) a.push_back(v);
    std::sort(a.begin(), a.end());
    a.erase(std::unique(a.begin(), a.end(),
                        [](double x, double y) { return std::abs(x - y) <= 1e-12 * (1.0 + std::abs(x)); }),
            a.end());
    return a;
}

// Everything the iterations share: cached transforms, the decision grid, and
// the numerator/denominator machinery behind the marginal function L.
struct Workspace {
    const BuyerPreferences& prefs;
    const PremiumPrinciple& pp;
    const LossModel& model;
    SolverConfig scfg;
    QuadratureConfig qcfg;
    Distortion tk, tb;
    bool density;
    double x_max = 0.0, x_end = 0.0;
    std::vector<double> base;

    Workspace(const BuyerPreferences& prefs_, const PremiumPrinciple& pp_, const LossModel& m_,
              const SolverConfig& s, const QuadratureConfig& q)
        : prefs(prefs_), pp(pp_), model(m_), scfg(s), qcfg(q), tk(pp_.tk()), tb(prefs_.tb()) {
        scfg.validate();
        qcfg.validate();
        density = model.has_density();
        if (density) {
            x_max = model.quantile(1e-6);
            if (!(x_max > 0.0)) x_max = std::max(model.mean(), 1e-3);
            x_end = std::isfinite(model.support_bound()) ? model.quantile(1e-12)
                                                         : model.quantile(1e-30);
            x_end = std::max(x_end, x_max);
        } else {
            x_max = x_end = model.support_bound();
        }
        const int n = scfg.grid_n;
        const double R = 50.0; // geometric stretch: fine cells near 0, coarse in the tail
        base.reserve(static_cast<size_t>(n) + 4);
        for (int i = 0; i <= n; ++i)
            base.push_back(x_max * (std::pow(R, static_cast<double>(i) / n) - 1.0) / (R - 1.0));
        std::vector<double> extra;
        for (const auto& a : model.atoms()) extra.push_back(a.x);
        base = merge_points(std::move(base), extra, x_max);
        if (std::abs(base.back() - x_max) > 1e-12 * (1.0 + x_max)) base.push_back(x_max);
    }

    double premium_of(const Indemnity& I, bool tight) const {
        QuadratureConfig c = qcfg;
        if (tight) {
            c.abs_tol = 1e-13;
            c.rel_tol = 1e-12;
            c.max_subdivisions = 1 << 17;
        } else {
            c.abs_tol = 1e-8;
            c.rel_tol = 1e-7;
        }
        return premium(pp, I, model, c);
    }

    std::function<double(double)> weight_fn(const Indemnity& I, double pi) const {
        const Utility u = prefs.utility;
        const double w = prefs.wealth;
        const double lower = u.domain_lower();
        return [this, I, pi, u, w, lower](double x) -> double {
            double f = model.density(x);
            if (!(f > 0.0)) return 0.0;
            double S = std::min(1.0, std::max(0.0, model.survival(x)));
            double arg = w - (x - I(x)) - pi;
            if (!(arg > lower)) u.require_in_domain(arg);
            return u.uprime(arg) * tb.deriv(S) * f;
        };
    }

    static double cell_int(const std::function<double(double)>& f, double a, double b, double rel) {
        if (!(b > a)) return 0.0;
        QuadratureConfig c;
        c.abs_tol = 1e-300;
        c.rel_tol = rel;
        c.max_subdivisions = 1 << 14;
        return integrate(f, a, b, c);
    }

    struct LGrid {
        std::vector<double> xs, mid;
        std::vector<double> tail_b, tail_m, L_b, L_m, tkS_b;
        std::vector<double> suff_half; // suffix sums of half-cell integrals (+ extension)
        std::vector<double> atomsuf;   // suffix sums of atom weights by boundary index
        double denom = 0.0;
        double pi = 0.0;
    };

    LGrid eval(const Indemnity& I, double pi, const std::vector<double>& xs, double rel_cell) const {
        const int N = static_cast<int>(xs.size()) - 1;
        LGrid G;
        G.xs = xs;
        G.pi = pi;
        G.mid.resize(N);
        for (int i = 0; i < N; ++i) G.mid[i] = 0.5 * (xs[i] + xs[i + 1]);

        auto wfn = weight_fn(I, pi);
        std::vector<double> hs(2 * static_cast<size_t>(N), 0.0);
        if (density) {
            for (int i = 0; i < N; ++i) {
                hs[2 * i] = cell_int(wfn, xs[i], G.mid[i], rel_cell);
                hs[2 * i + 1] = cell_int(wfn, G.mid[i], xs[i + 1], rel_cell);
            }
        }
        double ext_total = 0.0;
        if (density && x_end > xs.back()) {
            double h = std::max(xs[N] - xs[N - 1], 1e-8 * (1.0 + x_end));
            double x0 = xs.back();
            double rel_ext = std::max(rel_cell, 1e-9);
            while (x0 < x_end) {
                double x1 = std::min(x_end, x0 + h);
                ext_total += cell_int(wfn, x0, x1, rel_ext);
                x0 = x1;
                h *= 1.4;
            }
        }
        G.suff_half.assign(2 * static_cast<size_t>(N) + 1, 0.0);
        G.suff_half[2 * N] = ext_total;
        for (int j = 2 * N - 1; j >= 0; --j) G.suff_half[j] = G.suff_half[j + 1] + hs[j];

        std::vector<double> add(static_cast<size_t>(N) + 1, 0.0);
        const Utility& u = prefs.utility;
        for (const auto& a : model.atoms()) {
            auto it = std::lower_bound(xs.begin(), xs.end(), a.x - 1e-9 * (1.0 + a.x));
            if (it == xs.end() || std::abs(*it - a.x) > 1e-9 * (1.0 + a.x)) continue; // beyond grid
            size_t j = static_cast<size_t>(it - xs.begin());
            double S = std::min(1.0, std::max(0.0, model.survival(a.x)));
            double jump = tb(std::min(1.0, S + a.p)) - tb(S);
            add[j] += u.uprime(prefs.wealth - (a.x - I(a.x)) - pi) * jump;
        }
        G.atomsuf.assign(static_cast<size_t>(N) + 2, 0.0);
        for (int j = N; j >= 0; --j) G.atomsuf[j] = G.atomsuf[j + 1] + add[j];

        G.tail_b.resize(N + 1);
        G.tail_m.resize(N);
        G.L_b.resize(N + 1);
        G.L_m.resize(N);
        G.tkS_b.resize(N + 1);
        G.denom = G.suff_half[0] + G.atomsuf[0];
        if (!(G.denom > 0.0)) throw DomainError("objective weight integral is not positive");
        for (int i = 0; i <= N; ++i) {
            G.tail_b[i] = G.suff_half[2 * i] + G.atomsuf[i + 1];
            G.tkS_b[i] = tk(std::min(1.0, std::max(0.0, model.survival(xs[i]))));
            G.L_b[i] = G.tail_b[i] / G.denom - G.tkS_b[i];
        }
        for (int i = 0; i < N; ++i) {
            G.tail_m[i] = G.suff_half[2 * i + 1] + G.atomsuf[i + 1];
            G.L_m[i] = G.tail_m[i] / G.denom -
                       tk(std::min(1.0, std::max(0.0, model.survival(G.mid[i]))));
        }
        return G;
    }

    // L at an off-grid point, reusing the suffix sums of an existing grid.
    double L_point(const LGrid& G, const Indemnity& I, double pi, double t) const {
        t = std::min(std::max(t, 0.0), G.xs.back());
        auto it = std::upper_bound(G.xs.begin(), G.xs.end(), t);
        size_t i = it == G.xs.begin() ? 0 : static_cast<size_t>(it - G.xs.begin()) - 1;
        if (i >= G.xs.size() - 1) i = G.xs.size() - 2;
        double part = density ? cell_int(weight_fn(I, pi), t, G.xs[i + 1], 1e-12) : 0.0;
        double tail = part + G.suff_half[2 * (i + 1)] + G.atomsuf[i + 1];
        return tail / G.denom - tk(std::min(1.0, std::max(0.0, model.survival(t))));
    }

    double penalty(const LGrid& G, const Indemnity& I) const {
        const double band = scfg.L_zero_band;
        double r = 0.0;
        auto one = [&](double L, double s) {
            if (L > band) r = std::max(r, std::abs(1.0 - s));
            else if (L < -band) r = std::max(r, std::abs(s));
        };
        for (size_t i = 0; i < G.xs.size(); ++i) one(G.L_b[i], I.slope(G.xs[i]));
        for (size_t i = 0; i < G.mid.size(); ++i) one(G.L_m[i], I.slope(G.mid[i]));
        return r;
    }

    double residual_of(const Indemnity& I) const {
        std::vector<double> xs = merge_points(base, I.breakpoints(), x_max);
        double pi = premium_of(I, true);
        LGrid G = eval(I, pi, xs, 1e-12);
        return penalty(G, I);
    }
};

struct Stage1Out {
    std::vector<double> slopes;
    double ext = 0.5;
    int iters = 0;
    bool converged = false;
};

Stage1Out stage1(const Workspace& ws) {
    const auto& xs = ws.base;
    const int N = static_cast<int>(xs.size()) - 1;
    const double band = ws.scfg.L_zero_band;
    Stage1Out st;
    st.slopes.assign(N, 0.5);
    double omega = ws.scfg.omega;
    double prev_change = kInf;
    int streak = 0;
    for (int it = 1; it <= ws.scfg.max_iter; ++it) {
        st.iters = it;
        Indemnity I = project_to_Ic(xs, st.slopes, st.ext);
        double pi = ws.premium_of(I, false);
        Workspace::LGrid G = ws.eval(I, pi, xs, 1e-7);
        double change = 0.0;
        auto relax = [&](double cur, double L) {
            double tgt = cur; // inside the band the previous slope stands
            if (L > band) tgt = 1.0;
            else if (L < -band) tgt = 0.0;
            double nxt = cur + omega * (tgt - cur);
            change = std::max(change, std::abs(nxt - cur));
            return nxt;
        };
        for (int i = 0; i < N; ++i) st.slopes[i] = relax(st.slopes[i], G.L_m[i]);
        st.ext = relax(st.ext, G.L_b[N]);
        if (change < ws.scfg.tol) {
            st.converged = true;
            break;
        }
        if (change > prev_change) {
            if (++streak >= 3) {
                omega = std::max(0.01, 0.5 * omega);
                streak = 0;
            }
        } else {
            streak = 0;
        }
        prev_change = change;
    }
    return st;
}

// ---- interior refinement: the marginal-rate construction -------------------

struct Candidate {
    Indemnity I;
    double d = 0.0;
    double msat = kInf;
};

std::optional<Candidate> build_candidate(const Workspace& ws, double pi, double ups) {
    const Utility u = ws.prefs.utility;
    const double w = ws.prefs.wealth;
    const Distortion tk = ws.tk, tb = ws.tb;
    const LossModel mdl = ws.model;
    if (!(ups > 0.0)) return std::nullopt;

    auto ell = [tk, tb, mdl](double x) -> double {
        double S = std::min(1.0, std::max(0.0, mdl.survival(x)));
        double dn = tb.deriv(S);
        if (!(dn > 0.0)) return kInf;
        return tk.deriv(S) / dn;
    };
    auto eta = [ell, u, w, pi, ups](double x) -> double {
        double l = ell(x);
        if (!std::isfinite(l) || !(l > 0.0)) return kNaN;
        return x - w + pi + u.inv_uprime(l * ups);
    };
    auto slope_raw = [ell, tk, tb, mdl, u, ups](double x) -> double {
        double S = std::min(1.0, std::max(0.0, mdl.survival(x)));
        double f = mdl.density(x);
        double tbp = tb.deriv(S);
        if (!(tbp > 0.0)) return 0.0;
        double l = tk.deriv(S) / tbp;
        double lp = -f * (tk.deriv2(S) * tbp - tk.deriv(S) * tb.deriv2(S)) / (tbp * tbp);
        double us = u.usecond(u.inv_uprime(l * ups));
        return 1.0 + ups * lp / us;
    };

    // probe points: decision grid plus a geometric reach into the far tail
    std::vector<double> probes = ws.base;
    {
        double h = std::max(ws.base.back() - ws.base[ws.base.size() - 2], 1e-6);
        double x0 = ws.base.back();
        while (x0 < ws.x_end) {
            x0 = std::min(ws.x_end, x0 + h);
            probes.push_back(x0);
            h *= 1.4;
        }
    }

    // coverage starts at the last upward zero of eta: a non-monotone eta can
    // open with a spurious positive stretch whose falling side is infeasible
    double e0 = eta(probes[0]);
    if (std::isnan(e0)) return std::nullopt;
    double e_prev = e0;
    double d = kNaN;
    for (size_t i = 1; i < probes.size(); ++i) {
        double e = eta(probes[i]);
        if (std::isnan(e)) return std::nullopt;
        if (e_prev < 0.0 && e >= 0.0)
            d = bisect_root(eta, probes[i - 1], probes[i], e_prev, e,
                            1e-14 * (1.0 + probes[i]));
        e_prev = e;
    }
    if (std::isnan(d)) {
        if (e0 < 0.0) return std::nullopt; // no coverage starts inside the horizon
        d = 0.0;
    }

    double msat = kInf;
    {
        double s_prev = kNaN;
        double x_prev = d;
        for (double x : probes) {
            if (x <= d) continue;
            double s = slope_raw(x);
            if (s <= 0.0) {
                if (std::isnan(s_prev)) {
                    msat = x;
                } else {
                    msat = bisect_root(slope_raw, x_prev, x, s_prev, s, 1e-13 * (1.0 + x));
                }
                break;
            }
            s_prev = s;
            x_prev = x;
        }
    }

    // saturation of the unit-slope bound: fall back to a piecewise projection
    bool saturated = false;
    {
        double hi = std::min(msat, ws.x_max);
        for (int i = 1; i <= 96 && !saturated; ++i) {
            double x = d + (hi - d) * i / 97.0;
            if (x <= d) continue;
            if (eta(x) > 0.0 && eta(x) < x && slope_raw(x) > 1.0 + 1e-6) saturated = true;
        }
    }
    if (saturated) {
        std::vector<double> knots{0.0};
        for (double x : ws.base)
            if (x > 1e-14) knots.push_back(x);
        knots = merge_points(std::move(knots), {d, msat}, ws.x_max * (1.0 + 1e-9));
        std::vector<double> slopes;
        for (size_t i = 0; i + 1 < knots.size(); ++i) {
            double xm = 0.5 * (knots[i] + knots[i + 1]);
            double s;
            if (xm <= d || xm >= msat) s = 0.0;
            else if (eta(xm) >= xm) s = 1.0;
            else s = clip01(slope_raw(xm));
            slopes.push_back(s);
        }
        double ext = ws.x_max < msat ? clip01(slope_raw(ws.x_max)) : 0.0;
        Candidate c;
        c.I = project_to_Ic(knots, std::move(slopes), ext);
        c.d = d;
        c.msat = msat;
        return c;
    }

    DimlInterior di;
    di.family = "general";
    di.params = {{"d", d}, {"m", msat}, {"pi", pi}, {"upsilon", ups}};
    di.value = [eta](double x) { return std::max(0.0, std::min(x, eta(x))); };
    di.slope = [eta, slope_raw](double x) {
        double e = eta(x);
        if (!(e > 0.0)) return 0.0;
        if (e >= x) return 1.0;
        return clip01(slope_raw(x));
    };
    Candidate c;
    c.d = d;
    c.msat = msat;
    c.I = Indemnity::diml(d, msat, std::move(di), pi, ups);
    return c;
}

struct Stage2Out {
    Indemnity I;
    double pi = 0.0, ups = 0.0, d = 0.0, msat = kInf;
    int iters = 0;
    bool converged = false;
};

bool stage2_admissible(const Workspace& ws) {
    if (!ws.prefs.utility.strictly_concave() || !ws.density) return false;
    for (const auto& a : ws.model.atoms())
        if (a.x > 0.0) return false;
    for (size_t i = 1; i + 1 < ws.base.size(); i += 7) {
        double S = ws.model.survival(ws.base[i]);
        if (!(ws.tb.deriv(S) > 0.0) || !(ws.tk.deriv(S) > 0.0)) return false;
    }
    return true;
}

std::optional<Stage2Out> stage2(const Workspace& ws, double pi0, double ups0) {
    double pi = pi0, ups = ups0;
    Stage2Out out;
    for (int it = 1; it <= 200; ++it) {
        out.iters = it;
        auto cand = build_candidate(ws, pi, ups);
        if (!cand) return std::nullopt;
        double pin = ws.premium_of(cand->I, true);
        std::vector<double> xs = merge_points(ws.base, {cand->d, cand->msat}, ws.x_max);
        Workspace::LGrid G = ws.eval(cand->I, pin, xs, 1e-12);
        double upn = G.denom;
        bool conv = std::abs(pin - pi) <= 1e-12 * (1.0 + std::abs(pin)) &&
                    std::abs(upn - ups) <= 1e-12 * (1.0 + std::abs(upn));
        if (it > 30) { // slow oscillation: average the updates
            pin = 0.5 * (pi + pin);
            upn = 0.5 * (ups + upn);
        }
        pi = pin;
        ups = upn;
        if (conv) {
            out.converged = true;
            break;
        }
    }
    auto fin = build_candidate(ws, pi, ups);
    if (!fin) return std::nullopt;
    out.I = fin->I;
    out.d = fin->d;
    out.msat = fin->msat;
    out.pi = pi;
    out.ups = ups;
    return out;
}

// ---- bang-bang knot polish --------------------------------------------------

struct Stage3Out {
    Indemnity I;
    int iters = 0;
    bool converged = false;
    double d = kNaN, m = kInf;
};

// Sign pattern of L across cells, collapsing cells inside the zero band.
std::vector<int> sign_pattern(const Workspace::LGrid& G, double band, int* zero_cells) {
    std::vector<int> pat;
    *zero_cells = 0;
    for (double L : G.L_m) {
        int s = L > band ? 1 : (L < -band ? -1 : 0);
        if (s == 0) {
            ++*zero_cells;
            continue;
        }
        if (pat.empty() || pat.back() != s) pat.push_back(s);
    }
    return pat;
}

std::optional<Stage3Out> stage3(const Workspace& ws, const Indemnity& raw,
                                const Workspace::LGrid& Graw) {
    const double band = ws.scfg.L_zero_band;
    int zero_cells = 0;
    std::vector<int> pat = sign_pattern(Graw, band, &zero_cells);
    if (pat.empty()) return std::nullopt;
    if (zero_cells > static_cast<int>(Graw.L_m.size()) / 4) return std::nullopt; // plateau-heavy
    const bool full_p = pat == std::vector<int>{1};
    const bool zero_p = pat == std::vector<int>{-1};
    const bool ded_p = pat == std::vector<int>{-1, 1};
    const bool lim_p = pat == std::vector<int>{1, -1};
    const bool dml_p = pat == std::vector<int>{-1, 1, -1};
    if (!(full_p || zero_p || ded_p || lim_p || dml_p)) return std::nullopt;

    Stage3Out out;
    if (full_p || zero_p) {
        out.I = full_p ? Indemnity::full() : Indemnity::zero();
        out.iters = 1;
        out.converged = true;
        return out;
    }

    // initial knots from the raw grid's sign changes
    auto locate = [&](const Workspace::LGrid& G, const Indemnity& I, double pi,
                      std::vector<double>& knots) -> bool {
        knots.clear();
        int prev = 0;
        double prev_t = G.mid.empty() ? 0.0 : G.mid[0];
        for (size_t i = 0; i < G.mid.size(); ++i) {
            double L = G.L_m[i];
            int s = L > band ? 1 : (L < -band ? -1 : 0);
            if (s == 0) continue;
            if (prev != 0 && s != prev) {
                auto f = [&](double t) { return ws.L_point(G, I, pi, t); };
                double flo = ws.L_point(G, I, pi, prev_t);
                double fhi = ws.L_point(G, I, pi, G.mid[i]);
                if ((flo < 0) == (fhi < 0)) return false;
                knots.push_back(bisect_root(f, prev_t, G.mid[i], flo, fhi,
                                            1e-13 * (1.0 + G.mid[i])));
            }
            prev = s;
            prev_t = G.mid[i];
        }
        return knots.size() == (dml_p ? 2u : 1u);
    };

    std::vector<double> knots;
    if (!locate(Graw, raw, Graw.pi, knots)) return std::nullopt;

    auto build = [&](const std::vector<double>& k) -> Indemnity {
        if (ded_p) return Indemnity::deductible(k[0]);
        if (lim_p) return Indemnity::max_limit(k[0]);
        return Indemnity::piecewise_linear({0.0, k[0], k[1]}, {0.0, 1.0}, 0.0);
    };

    for (int it = 1; it <= 40; ++it) {
        out.iters = it;
        Indemnity I = build(knots);
        double pi = ws.premium_of(I, true);
        std::vector<double> xs = merge_points(ws.base, knots, ws.x_max);
        Workspace::LGrid G = ws.eval(I, pi, xs, 1e-12);
        std::vector<double> next;
        if (!locate(G, I, pi, next)) return std::nullopt;
        double delta = 0.0;
        for (size_t j = 0; j < knots.size(); ++j)
            delta = std::max(delta, std::abs(next[j] - knots[j]) / (1.0 + std::abs(next[j])));
        knots = next;
        if (delta < 1e-11) {
            out.converged = true;
            break;
        }
    }
    out.I = build(knots);
    out.d = ded_p || dml_p ? knots[0] : kNaN;
    out.m = lim_p ? knots[0] : (dml_p ? knots[1] : kInf);
    return out;
}

SolveReport finish_report(const Workspace& ws, const Indemnity& I, std::string path, int iters,
                          bool converged) {
    SolveReport r;
    r.contract = I;
    r.solver_path = std::move(path);
    r.iterations = iters;
    r.converged = converged;
    r.premium = ws.premium_of(I, true);
    RdeuResult rv = rdeu_value_checked(ws.prefs, I, r.premium, ws.model, ws.qcfg);
    r.rdeu = rv.value;
    r.rdeu_divergent = rv.divergent;
    std::vector<double> xs = merge_points(ws.base, I.breakpoints(), ws.x_max);
    Workspace::LGrid G = ws.eval(I, r.premium, xs, 1e-12);
    r.residual = ws.penalty(G, I);
    r.upsilon = G.denom;
    r.regime = classify(I, 1e-3, ws.x_max);
    switch (I.kind()) {
    case ContractKind::Deductible:
        r.d_star = I.d();
        break;
    case ContractKind::DeductibleCoinsurance:
        r.d_star = I.d();
        r.slope_interior = I.alpha();
        break;
    case ContractKind::MaxLimit:
        r.m_limit = I.m();
        break;
    case ContractKind::Diml:
        r.d_star = I.d();
        r.m_limit = I.m();
        break;
    default:
        break;
    }
    if (ws.prefs.utility.strictly_concave()) {
        UniquenessResult uq = uniqueness_check(ws.pp, ws.model);
        r.unique = uq.unique;
        r.unique_reason = uq.reason;
    } else {
        r.unique = false;
        r.unique_reason = "uniqueness criterion requires strictly concave utility";
    }
    r.theta = ws.pp.theta;
    r.grid_n = ws.scfg.grid_n;
    return r;
}

} // namespace

MarginalFunction compute_L(const Indemnity& I, const BuyerPreferences& prefs,
                           const PremiumPrinciple& pp, const LossModel& m,
                           const SolverConfig& scfg, const QuadratureConfig& qcfg) {
    pp.validate();
    prefs.validate(scfg.allow_nonconvex_b);
    Workspace ws(prefs, pp, m, scfg, qcfg);
    std::vector<double> xs = merge_points(ws.base, I.breakpoints(), ws.x_max);
    double pi = ws.premium_of(I, true);
    Workspace::LGrid G = ws.eval(I, pi, xs, 1e-12);
    MarginalFunction out;
    out.t = G.xs;
    out.L = G.L_b;
    out.tk_S = G.tkS_b;
    out.tail_ratio.resize(G.tail_b.size());
    for (size_t i = 0; i < G.tail_b.size(); ++i) out.tail_ratio[i] = G.tail_b[i] / G.denom;
    out.t_mid = G.mid;
    out.L_mid = G.L_m;
    out.denominator = G.denom;
    out.pi = pi;
    return out;
}

double verify_optimality(const Indemnity& I, const BuyerPreferences& prefs,
                         const PremiumPrinciple& pp, const LossModel& m,
                         const SolverConfig& scfg, const QuadratureConfig& qcfg) {
    pp.validate();
    prefs.validate(scfg.allow_nonconvex_b);
    Workspace ws(prefs, pp, m, scfg, qcfg);
    return ws.residual_of(I);
}

bool solve_full_check(const PremiumPrinciple& pp, const Distortion& b, const LossModel& m) {
    pp.validate();
    Distortion tkd = pp.tk();
    Distortion tbd = buyer_tb(b);
    double S0 = m.survival(0.0);
    for (int i = 0; i <= 1000; ++i) {
        double p = S0 * i / 1000.0;
        if (tkd(p) > tbd(p) + 1e-10) return false;
    }
    return true;
}

SolveReport solve_general(const BuyerPreferences& prefs, const PremiumPrinciple& pp,
                          const LossModel& m, const SolverConfig& scfg,
                          const QuadratureConfig& qcfg) {
    pp.validate();
    prefs.validate(scfg.allow_nonconvex_b);
    Workspace ws(prefs, pp, m, scfg, qcfg);

    Stage1Out s1 = stage1(ws);
    Indemnity chosen = project_to_Ic(ws.base, s1.slopes, s1.ext);
    double pi_raw = ws.premium_of(chosen, true);
    Workspace::LGrid Graw = ws.eval(chosen, pi_raw, ws.base, 1e-12);
    double best_res = ws.penalty(Graw, chosen);
    std::string path = "general:damped_fixed_point";
    int iters = s1.iters;
    bool conv = s1.converged;
    double d_star = kNaN, m_lim = kInf;

    if (auto p3 = stage3(ws, chosen, Graw)) {
        double r = ws.residual_of(p3->I);
        if (r <= best_res + 1e-12) {
            chosen = p3->I;
            best_res = r;
            path += "+knot_polish";
            iters += p3->iters;
            conv = p3->converged;
            d_star = p3->d;
            m_lim = p3->m;
        }
    }
    if (stage2_admissible(ws)) {
        double pi0 = ws.premium_of(chosen, true);
        std::vector<double> xs0 = merge_points(ws.base, chosen.breakpoints(), ws.x_max);
        double ups0 = ws.eval(chosen, pi0, xs0, 1e-10).denom;
        if (auto s2 = stage2(ws, pi0, ups0)) {
            double r = ws.residual_of(s2->I);
            if (r <= best_res + 1e-12) {
                chosen = s2->I;
                best_res = r;
                path += "+interior_refine";
                iters += s2->iters;
                conv = s2->converged;
                d_star = s2->d;
                m_lim = s2->msat;
            }
        }
    }

    SolveReport rep = finish_report(ws, chosen, path, iters, conv);
    if (std::isnan(rep.d_star) && !std::isnan(d_star)) rep.d_star = d_star;
    if (!std::isfinite(rep.m_limit) && std::isfinite(m_lim)) rep.m_limit = m_lim;
    return rep;
}

SolveReport solve_deductible(const BuyerPreferences& prefs, const PremiumPrinciple& pp,
                             const LossModel& m, const SolverConfig& scfg,
                             const QuadratureConfig& qcfg) {
    pp.validate();
    prefs.validate(scfg.allow_nonconvex_b);
    if (pp.theta < 0.0)
        throw PreconditionError("deductible route requires a non-negative loading");
    Workspace ws(prefs, pp, m, scfg, qcfg);
    OrderResult hr = check_order(ws.tk, ws.tb, StochOrder::HR, 2001);
    if (!hr.holds)
        throw PreconditionError(
            "premium weight must precede buyer weight in hazard-ratio order; use the general solver");
    double S0 = m.survival(0.0);
    for (int i = 1; i <= 1000; ++i) {
        double p0 = S0 * (i - 1) / 1000.0, p1 = S0 * i / 1000.0;
        if (!(ws.tk(p1) > ws.tk(p0)))
            throw PreconditionError("premium weight must be strictly increasing below S_X(0)");
    }

    QuadratureConfig tight = qcfg;
    tight.abs_tol = 1e-15;
    tight.rel_tol = 1e-12;
    tight.max_subdivisions = 1 << 17;
    const Utility& u = prefs.utility;
    auto J = [&](double d) {
        Indemnity I = Indemnity::deductible(d);
        double pi = premium(pp, I, m, tight);
        double ups = marginal_weight(prefs, I, pi, m, -1.0, tight);
        double Sd = std::min(1.0, std::max(0.0, m.survival(d)));
        double arg = prefs.wealth - d - pi;
        u.require_in_domain(arg);
        return u.uprime(arg) * ws.tb(Sd) - ups * ws.tk(Sd);
    };

    double j0 = J(0.0);
    int evals = 1;
    SolveReport rep;
    if (j0 >= 0.0) {
        rep = finish_report(ws, Indemnity::deductible(0.0), "deductible:threshold_scan", evals, true);
        rep.d_star = 0.0;
        return rep;
    }
    double d_cap = m.quantile(1e-10);
    double lo = 0.0, flo = j0, hi = 1.0;
    double fhi = J(hi);
    ++evals;
    while (fhi < 0.0 && hi < d_cap) {
        lo = hi;
        flo = fhi;
        hi = std::min(d_cap, 2.0 * hi);
        fhi = J(hi);
        ++evals;
    }
    if (fhi < 0.0) {
        rep = finish_report(ws, Indemnity::zero(), "deductible:threshold_scan", evals, true);
        rep.d_star = kInf;
        return rep;
    }
    double d = bisect_root(J, lo, hi, flo, fhi, 1e-12);
    evals += 44;
    rep = finish_report(ws, Indemnity::deductible(d), "deductible:threshold_scan", evals, true);
    rep.d_star = d;
    return rep;
}

SolveReport solve_max_limit(const PremiumPrinciple& pp, const Distortion& b, const LossModel& m,
                            const SolverConfig& scfg, const QuadratureConfig& qcfg,
                            const BuyerPreferences* prefs) {
    pp.validate();
    if (pp.theta < 0.0)
        throw PreconditionError("maximum-limit route requires a non-negative loading");
    BuyerPreferences lp = prefs ? *prefs : BuyerPreferences{Utility::linear(), b, 0.0};
    lp.validate(scfg.allow_nonconvex_b);
    if (!lp.utility.is_linear())
        throw PreconditionError("maximum-limit route requires linear utility");
    Distortion tbd = buyer_tb(lp.b);
    Distortion tkd = pp.tk();
    OrderResult hr = check_order(tbd, tkd, StochOrder::HR, 2001);
    if (!hr.holds)
        throw PreconditionError(
            "buyer weight must precede premium weight in hazard-ratio order; use the general solver");

    Workspace ws(lp, pp, m, scfg, qcfg);
    auto Lf = [&](double t) {
        double S = std::min(1.0, std::max(0.0, m.survival(t)));
        return tbd(S) - tkd(S);
    };
    double t0 = 1e-9 * (1.0 + ws.x_max);
    double f_prev = Lf(t0);
    SolveReport rep;
    if (f_prev <= 0.0) {
        rep = finish_report(ws, Indemnity::zero(), "max_limit:crossing_scan", 1, true);
        rep.m_limit = 0.0;
        return rep;
    }
    double m_lim = kInf, t_prev = t0;
    for (size_t i = 1; i < ws.base.size(); ++i) {
        double t = ws.base[i];
        double f = Lf(t);
        if (f <= 0.0) {
            m_lim = bisect_root(Lf, t_prev, t, f_prev, f, 1e-14 * (1.0 + t));
            break;
        }
        t_prev = t;
        f_prev = f;
    }
    if (!std::isfinite(m_lim)) {
        rep = finish_report(ws, Indemnity::full(), "max_limit:crossing_scan", 1, true);
        return rep;
    }
    rep = finish_report(ws, Indemnity::max_limit(m_lim), "max_limit:crossing_scan", 1, true);
    rep.m_limit = m_lim;
    return rep;
}

SolveReport solve_diml(const BuyerPreferences& prefs, const PremiumPrinciple& pp,
                       const LossModel& m, const SolverConfig& scfg,
                       const QuadratureConfig& qcfg) {
    pp.validate();
    prefs.validate(scfg.allow_nonconvex_b);
    if (pp.theta < 0.0)
        throw PreconditionError("deductible-with-limit route requires a non-negative loading");
    if (!prefs.utility.strictly_concave())
        throw PreconditionError("deductible-with-limit route requires strictly concave utility");
    Workspace ws(prefs, pp, m, scfg, qcfg);
    if (!ws.density)
        throw PreconditionError("deductible-with-limit route needs a continuous loss component");
    for (const auto& a : m.atoms())
        if (a.x > 0.0)
            throw PreconditionError("deductible-with-limit route allows an atom only at zero");
    OrderResult lr = check_order(ws.tb, ws.tk, StochOrder::LR, 2001);
    if (!lr.holds)
        throw PreconditionError(
            "buyer weight must precede premium weight in likelihood-ratio order");

    // sampled shape conditions for the marginal rate
    const int K = 512;
    std::vector<double> lv(K + 1), xv(K + 1);
    for (int i = 0; i <= K; ++i) {
        double x = ws.x_max * i / K;
        double S = std::min(1.0, std::max(0.0, m.survival(x)));
        double dn = ws.tb.deriv(S);
        if (!(dn > 0.0)) throw PreconditionError("buyer weight derivative vanishes on the grid");
        xv[i] = x;
        lv[i] = ws.tk.deriv(S) / dn;
    }
    bool inc = true, concave = true, ln_concave = true;
    for (int i = 1; i <= K; ++i)
        if (lv[i] < lv[i - 1] * (1.0 - 1e-10) - 1e-12) inc = false;
    for (int i = 1; i < K; ++i) {
        double d2 = lv[i + 1] - 2.0 * lv[i] + lv[i - 1];
        if (d2 > 1e-8 * std::max(1.0, std::abs(lv[i]))) concave = false;
        double g2 = std::log(lv[i + 1]) - 2.0 * std::log(lv[i]) + std::log(lv[i - 1]);
        if (g2 > 1e-8 * std::max(1.0, std::abs(std::log(lv[i])))) ln_concave = false;
    }
    const Utility& u = prefs.utility;
    bool route_a = u.third_derivative_nonneg() && inc && concave;
    bool route_b = u.hara_family() && inc && ln_concave;
    if (!route_a && !route_b)
        throw PreconditionError("marginal-rate shape conditions fail on the grid");

    Indemnity full = Indemnity::full();
    double pi0 = ws.premium_of(full, true);
    double ups0 = ws.eval(full, pi0, ws.base, 1e-10).denom;
    auto s2 = stage2(ws, pi0, ups0);
    if (!s2)
        throw PreconditionError("interior construction found no coverage threshold");
    SolveReport rep = finish_report(ws, s2->I, "diml:marginal_rate", s2->iters, s2->converged);
    rep.d_star = s2->d;
    rep.m_limit = s2->msat;
    rep.upsilon = s2->ups;
    return rep;
}

// ---- closed-form exponential families ---------------------------------------

double power_exponential_G(double d, double gamma, double lambda, double c, double theta,
                           double q) {
    double a = gamma - lambda;
    double E = std::exp(a * d);
    return E * std::pow(q, 1.0 - c) * std::exp(lambda * c * d) -
           (1.0 + theta) * q * ((E - c) + lambda * c * d * em1r(a * d)) - c * (1.0 + theta);
}

double dualpower_exponential_G(double d, double gamma, double lambda, double c, double theta,
                               double q) {
    double A = 1.0 - q * std::exp(-lambda * d);
    double a = gamma - lambda;
    return std::exp(gamma * d) * ((1.0 + theta) * std::pow(A, c) - theta) -
           c * (1.0 + theta) * std::pow(A, c - 1.0) *
               ((1.0 - q) + q * lambda * d * em1r(a * d));
}

double gini_exponential_G(double d, double gamma, double lambda, double alpha, double theta,
                          double q) {
    double e = std::exp(-lambda * d);
    double A2 = (1.0 + theta) + alpha * (1.0 - 2.0 * q * e);
    double a = gamma - lambda;
    return std::exp(gamma * d) * (1.0 - alpha * q * q * e * e) -
           A2 * (1.0 + q * gamma * d * em1r(a * d));
}

namespace {

// Bracketed bisection followed by a derivative polish; G is increasing past
// its last sign change and G(0) <= 0 in every family.
double root_of_G(const std::function<double(double)>& G,
                 const std::function<double(double)>& Gp) {
    double g0 = G(0.0);
    if (g0 >= 0.0) return 0.0;
    double lo = 0.0, flo = g0, hi = 1.0;
    double fhi = G(hi);
    while (fhi < 0.0) {
        lo = hi;
        flo = fhi;
        hi *= 2.0;
        if (hi > 1e7) throw DomainError("deductible root not bracketed");
        fhi = G(hi);
    }
    double d = bisect_root(G, lo, hi, flo, fhi, 1e-12);
    for (int i = 0; i < 2; ++i) {
        double gp = Gp(d);
        if (!(std::abs(gp) > 0.0)) break;
        double step = G(d) / gp;
        double nd = d - step;
        if (nd >= lo && nd <= hi) d = nd;
    }
    return d;
}

void require_family_params(double gamma, double lambda, double theta, double q, double w) {
    if (!(gamma > 0.0) || !(lambda > 0.0))
        throw ConfigError("risk aversion and loss rate must be positive");
    if (!(theta >= 0.0)) throw ConfigError("loading must be non-negative");
    if (!(q > 0.0 && q <= 1.0)) throw ConfigError("claim probability must lie in (0, 1]");
    if (!std::isfinite(w)) throw ConfigError("wealth must be finite");
}

} // namespace

SolveReport solve_power_exponential(double gamma, double lambda, double c, double theta, double q,
                                    double w, std::optional<double> a_buyer,
                                    const SolverConfig& scfg, const QuadratureConfig& qcfg) {
    require_family_params(gamma, lambda, theta, q, w);
    if (!(c > 0.0 && c < 1.0)) throw ConfigError("power exponent must lie in (0, 1)");
    Distortion b = Distortion::identity();
    double qt = q, lt = lambda, ct = c;
    if (a_buyer) {
        double a = *a_buyer;
        if (!(c < a && a < 1.0))
            throw ConfigError("buyer exponent must lie strictly between the power exponent and 1");
        b = Distortion::convex_dual_power(a);
        qt = std::pow(q, a);
        lt = lambda * a;
        ct = c / a;
    }
    PremiumPrinciple pp = canonical_decompose(Distortion::power(theta, c), Distortion::zero());
    BuyerPreferences prefs{Utility::cara(gamma), b, w};
    LossModel mdl = LossModel::zero_inflated_exponential(q, lambda);
    Workspace ws(prefs, pp, mdl, scfg, qcfg);

    if (lt * (1.0 - ct) >= gamma) {
        SolveReport rep = finish_report(ws, Indemnity::zero(), "power_exponential:zero_regime", 0, true);
        rep.d_star = kInf;
        rep.slope_interior = 0.0;
        return rep;
    }
    double alpha = 1.0 - lt * (1.0 - ct) / gamma;
    auto G = [&](double d) { return power_exponential_G(d, gamma, lt, ct, theta, qt); };
    auto Gp = [&](double d) {
        double a = gamma - lt;
        return (a + lt * ct) * std::exp(a * d) *
               (std::pow(qt, 1.0 - ct) * std::exp(lt * ct * d) - (1.0 + theta) * qt);
    };
    double d = root_of_G(G, Gp);
    SolveReport rep = finish_report(ws, Indemnity::deductible_coinsurance(d, alpha),
                                    "power_exponential:closed_form", 0, true);
    rep.d_star = d;
    rep.slope_interior = alpha;
    rep.g_residual = std::abs(G(d));
    return rep;
}

SolveReport solve_dualpower_exponential(double gamma, double lambda, double c, double theta,
                                        double q, double w, const SolverConfig& scfg,
                                        const QuadratureConfig& qcfg) {
    require_family_params(gamma, lambda, theta, q, w);
    if (!(c > 1.0)) throw ConfigError("dual-power exponent must exceed 1");
    PremiumPrinciple pp = canonical_decompose(Distortion::dual_power(theta, c), Distortion::zero());
    BuyerPreferences prefs{Utility::cara(gamma), Distortion::identity(), w};
    LossModel mdl = LossModel::zero_inflated_exponential(q, lambda);

    if (!(gamma * (1.0 - q) > q * lambda * (c - 1.0))) {
        SolveReport rep = solve_general(prefs, pp, mdl, scfg, qcfg);
        rep.solver_path = "dualpower_exponential:general_fallback(" + rep.solver_path + ")";
        return rep;
    }
    Workspace ws(prefs, pp, mdl, scfg, qcfg);
    auto G = [&](double d) { return dualpower_exponential_G(d, gamma, lambda, c, theta, q); };
    auto Gp = [&](double d) {
        double h = 1e-7 * (1.0 + std::abs(d));
        return (G(d + h) - G(std::max(0.0, d - h))) / (d - h >= 0.0 ? 2.0 * h : h);
    };
    double d = root_of_G(G, Gp);
    auto A = [q, lambda](double x) { return 1.0 - q * std::exp(-lambda * x); };
    DimlInterior di;
    di.family = "dual_power";
    di.params = {{"gamma", gamma}, {"lambda", lambda}, {"c", c},
                 {"theta", theta}, {"q", q},           {"d", d}};
    di.value = [A, d, c, gamma](double x) {
        return x - d - (c - 1.0) / gamma * std::log(A(x) / A(d));
    };
    di.slope = [A, q, lambda, c, gamma](double x) {
        return 1.0 - (c - 1.0) / gamma * q * lambda * std::exp(-lambda * x) / A(x);
    };
    Indemnity tmp = Indemnity::diml(d, kInf, di, 0.0, 0.0);
    double pi = ws.premium_of(tmp, true);
    std::vector<double> xs = merge_points(ws.base, {d}, ws.x_max);
    double ups = ws.eval(tmp, pi, xs, 1e-12).denom;
    Indemnity I = Indemnity::diml(d, kInf, di, pi, ups);
    SolveReport rep = finish_report(ws, I, "dualpower_exponential:closed_form", 0, true);
    rep.d_star = d;
    rep.g_residual = std::abs(G(d));
    return rep;
}

SolveReport solve_gini_exponential(double gamma, double lambda, double alpha, double theta,
                                   double q, double w, const SolverConfig& scfg,
                                   const QuadratureConfig& qcfg) {
    require_family_params(gamma, lambda, theta, q, w);
    if (!(alpha > 0.0 && alpha <= 1.0)) throw ConfigError("gini weight must lie in (0, 1]");
    PremiumPrinciple pp{theta, Distortion::gini(alpha)};
    pp.validate();
    BuyerPreferences prefs{Utility::cara(gamma), Distortion::identity(), w};
    LossModel mdl = LossModel::zero_inflated_exponential(q, lambda);

    if (!(gamma * ((1.0 + theta) + alpha * (1.0 - 2.0 * q)) > 2.0 * alpha * q * lambda)) {
        SolveReport rep = solve_general(prefs, pp, mdl, scfg, qcfg);
        rep.solver_path = "gini_exponential:general_fallback(" + rep.solver_path + ")";
        return rep;
    }
    Workspace ws(prefs, pp, mdl, scfg, qcfg);
    auto G = [&](double d) { return gini_exponential_G(d, gamma, lambda, alpha, theta, q); };
    auto Gp = [&](double d) {
        double h = 1e-7 * (1.0 + std::abs(d));
        return (G(d + h) - G(std::max(0.0, d - h))) / (d - h >= 0.0 ? 2.0 * h : h);
    };
    double d = root_of_G(G, Gp);
    auto B = [q, lambda, alpha, theta](double x) {
        return (1.0 + theta) + alpha * (1.0 - 2.0 * q * std::exp(-lambda * x));
    };
    DimlInterior di;
    di.family = "gini";
    di.params = {{"gamma", gamma}, {"lambda", lambda}, {"alpha", alpha},
                 {"theta", theta}, {"q", q},           {"d", d}};
    di.value = [B, d, gamma](double x) { return x - d - std::log(B(x) / B(d)) / gamma; };
    di.slope = [B, q, lambda, alpha, gamma](double x) {
        return 1.0 - 2.0 * alpha * q * lambda * std::exp(-lambda * x) / (gamma * B(x));
    };
    Indemnity tmp = Indemnity::diml(d, kInf, di, 0.0, 0.0);
    double pi = ws.premium_of(tmp, true);
    std::vector<double> xs = merge_points(ws.base, {d}, ws.x_max);
    double ups = ws.eval(tmp, pi, xs, 1e-12).denom;
    Indemnity I = Indemnity::diml(d, kInf, di, pi, ups);
    SolveReport rep = finish_report(ws, I, "gini_exponential:closed_form", 0, true);
    rep.d_star = d;
    rep.g_residual = std::abs(G(d));
    return rep;
}

UniquenessResult uniqueness_check(const PremiumPrinciple& pp, const LossModel& m) {
    UniquenessResult r;
    if (pp.theta != 0.0) {
        r.unique = true;
        r.reason = "nonzero proportional loading pins the coverage level";
    } else if (m.ess_inf() <= 0.0) {
        r.unique = true;
        r.reason = "zero loading but the loss has no gap above zero";
    } else {
        r.unique = false;
        r.reason = "zero loading with loss bounded away from zero: flat indemnity shifts below "
                   "the smallest loss are value-neutral";
    }
    return r;
}

Indemnity rebuild_interior_contract(const BuyerPreferences& prefs, const PremiumPrinciple& pp,
                                    const LossModel& m, double d, double m_limit, double pi,
                                    double upsilon) {
    if (!(upsilon > 0.0)) throw ConfigError("interior contract needs a positive weight integral");
    const Utility u = prefs.utility;
    const double w = prefs.wealth;
    const Distortion tk = pp.tk();
    const Distortion tb = prefs.tb();
    const LossModel mdl = m;
    const double ups = upsilon;

    auto ell = [tk, tb, mdl](double x) -> double {
        double S = std::min(1.0, std::max(0.0, mdl.survival(x)));
        double dn = tb.deriv(S);
        if (!(dn > 0.0)) return kInf;
        return tk.deriv(S) / dn;
    };
    auto eta = [ell, u, w, pi, ups](double x) -> double {
        double l = ell(x);
        if (!std::isfinite(l) || !(l > 0.0)) return kNaN;
        return x - w + pi + u.inv_uprime(l * ups);
    };
    auto slope_raw = [ell, tk, tb, mdl, u, ups](double x) -> double {
        double S = std::min(1.0, std::max(0.0, mdl.survival(x)));
        double f = mdl.density(x);
        double tbp = tb.deriv(S);
        if (!(tbp > 0.0)) return 0.0;
        double l = tk.deriv(S) / tbp;
        double lp = -f * (tk.deriv2(S) * tbp - tk.deriv(S) * tb.deriv2(S)) / (tbp * tbp);
        double us = u.usecond(u.inv_uprime(l * ups));
        return 1.0 + ups * lp / us;
    };

    DimlInterior di;
    di.family = "general";
    di.params = {{"d", d}, {"m", m_limit}, {"pi", pi}, {"upsilon", ups}};
    di.value = [eta](double x) { return std::max(0.0, std::min(x, eta(x))); };
    di.slope = [eta, slope_raw](double x) {
        double e = eta(x);
        if (!(e > 0.0)) return 0.0;
        if (e >= x) return 1.0;
        return clip01(slope_raw(x));
    };
    return Indemnity::diml(d, m_limit, std::move(di), pi, ups);
}

} // namespace riskmetric
