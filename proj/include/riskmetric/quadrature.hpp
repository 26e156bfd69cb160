#ifndef RISKMETRIC_QUADRATURE_HPP
#define RISKMETRIC_QUADRATURE_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include "riskmetric/errors.hpp"

namespace riskmetric {

struct QuadratureConfig {
    double abs_tol = 1e-10;
    double rel_tol = 1e-9;
    int max_subdivisions = 1 << 16;
    double tail_mass = 1e-12; // truncation quantile for infinite supports

    void validate() const {
        if (!(abs_tol > 0) || !(rel_tol > 0) || max_subdivisions <= 0 || !(tail_mass > 0))
            throw ConfigError("quadrature config: all fields must be strictly positive");
    }
};

namespace detail {

// One adaptive-Simpson panel. Children inherit half the error budget.
template <class F>
double simpson_adaptive(F&& f, double a, double b, double fa, double fm, double fb,
                        double whole, double tol, int* budget, double* achieved) {
    double m = 0.5 * (a + b);
    double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    double flm = f(lm), frm = f(rm);
    double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    double delta = left + right - whole;
    if (!std::isfinite(delta))
        throw QuadratureError("integrand is not finite inside a panel", left + right,
                              std::abs(delta));
    if (std::abs(delta) <= 15.0 * tol || (b - a) < 1e-14 * (1.0 + std::abs(a))) {
        *achieved += std::abs(delta) / 15.0;
        return left + right + delta / 15.0;
    }
    if (--(*budget) <= 0)
        throw QuadratureError("adaptive quadrature exceeded max subdivisions",
                              left + right + delta / 15.0, std::abs(delta));
    return simpson_adaptive(f, a, m, fa, flm, fm, left, 0.5 * tol, budget, achieved) +
           simpson_adaptive(f, m, b, fm, frm, fb, right, 0.5 * tol, budget, achieved);
}

} // namespace detail

// Adaptive composite Simpson on [a, b]. Throws QuadratureError when the
// subdivision budget runs out before tolerances are met.
template <class F>
double integrate(F&& f, double a, double b, const QuadratureConfig& cfg) {
    if (!(b > a)) return 0.0;
    double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
    double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    double tol = std::max(cfg.abs_tol, cfg.rel_tol * std::abs(whole));
    int budget = cfg.max_subdivisions;
    double achieved = 0.0;
    return detail::simpson_adaptive(f, a, b, fa, fm, fb, whole, tol, &budget, &achieved);
}

// Same, but forces panel boundaries at the given interior split points
// (atom locations, distortion kinks, contract knots).
template <class F>
double integrate_split(F&& f, double a, double b, std::vector<double> splits,
                       const QuadratureConfig& cfg) {
    if (!(b > a)) return 0.0;
    splits.push_back(a);
    splits.push_back(b);
    std::sort(splits.begin(), splits.end());
    splits.erase(std::unique(splits.begin(), splits.end(),
                             [&](double x, double y) { return std::abs(x - y) <= 1e-14 * (1.0 + std::abs(x)); }),
                 splits.end());
    double total = 0.0;
    for (size_t i = 0; i + 1 < splits.size(); ++i) {
        double lo = std::max(a, splits[i]), hi = std::min(b, splits[i + 1]);
        if (hi > lo) total += integrate(f, lo, hi, cfg);
    }
    return total;
}

struct TailResult {
    double value = 0.0;
    bool divergent = false;
};

// Integrates f over [start, inf) by geometric blocks, stopping once a block
// contributes negligibly. Marks the result divergent when block magnitudes
// fail to decay.
template <class F>
TailResult integrate_tail(F&& f, double start, double step_hint, const QuadratureConfig& cfg) {
    TailResult r;
    double h = std::max(step_hint, 1e-6);
    double x = start;
    double prev_block = 0.0;
    int stalls = 0;
    for (int blk = 0; blk < 400; ++blk) {
        double piece;
        try {
            piece = integrate(f, x, x + h, cfg);
        } catch (const QuadratureError&) {
            // a block that cannot be resolved out here is growth, not noise
            r.divergent = true;
            return r;
        }
        if (!std::isfinite(piece)) {
            r.divergent = true;
            return r;
        }
        r.value += piece;
        x += h;
        h *= 1.5;
        double mag = std::abs(piece);
        if (mag <= std::max(cfg.abs_tol * 1e-3, std::abs(r.value) * 1e-14)) return r;
        if (blk > 4 && mag >= 0.9 * prev_block) {
            if (++stalls >= 8) {
                r.divergent = true;
                return r;
            }
        } else {
            stalls = 0;
        }
        prev_block = mag;
    }
    r.divergent = true;
    return r;
}

// Root of a continuous f on [lo, hi] with f(lo), f(hi) of opposite sign.
template <class F>
double bisect_root(F&& f, double lo, double hi, double flo, double fhi, double xtol) {
    if (flo == 0.0) return lo;
    if (fhi == 0.0) return hi;
    for (int i = 0; i < 200 && (hi - lo) > xtol; ++i) {
        double mid = 0.5 * (lo + hi);
        double fm = f(mid);
        if (fm == 0.0) return mid;
        if ((fm < 0) == (flo < 0)) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

// Golden-section minimizer for a unimodal f on [lo, hi].
template <class F>
double golden_min(F&& f, double lo, double hi, double xtol) {
    const double invphi = 0.6180339887498949;
    double a = lo, b = hi;
    double c = b - invphi * (b - a), d = a + invphi * (b - a);
    double fc = f(c), fd = f(d);
    while (b - a > xtol) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - invphi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + invphi * (b - a);
            fd = f(d);
        }
    }
    return 0.5 * (a + b);
}

} // namespace riskmetric

#endif
