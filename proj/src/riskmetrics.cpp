#include "riskmetric/riskmetrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace riskmetric {

namespace {

// split points for integrals of j(S_X(t)) dt: atoms plus kink preimages
std::vector<double> survival_splits(const Distortion& j, const LossModel& m, double hi) {
    std::vector<double> s;
    for (const auto& a : m.atoms()) s.push_back(a.x);
    for (double p : j.kink_points()) {
        double t = m.quantile(p);
        if (std::isfinite(t) && t > 0.0 && t < hi) s.push_back(t);
    }
    return s;
}

} // namespace

double rho(const Distortion& j, const LossModel& m, const QuadratureConfig& cfg) {
    cfg.validate();
    auto integrand = [&](double t) { return j(m.survival(t)); };
    double hi = std::min(m.support_bound(), m.quantile(cfg.tail_mass));
    double total = 0.0;
    if (hi > 0.0) total = integrate_split(integrand, 0.0, hi, survival_splits(j, m, hi), cfg);
    if (!std::isfinite(m.support_bound())) {
        TailResult tail = integrate_tail(integrand, hi, std::max(1.0, 0.05 * hi), cfg);
        if (tail.divergent)
            throw QuadratureError("distortion integral diverges in the tail", total + tail.value,
                                  std::numeric_limits<double>::infinity());
        total += tail.value;
    }
    return total;
}

double rho_discrete(const Distortion& j, const std::vector<double>& values,
                    const std::vector<double>& probs) {
    if (values.size() != probs.size() || values.empty())
        throw ConfigError("discrete variable needs matching values/probabilities");
    double tot = std::accumulate(probs.begin(), probs.end(), 0.0);
    if (std::abs(tot - 1.0) > 1e-9) throw ConfigError("probabilities must sum to 1");

    std::vector<size_t> idx(values.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](size_t a, size_t b) { return values[a] < values[b]; });

    // distinct sorted values with survival levels just above each
    std::vector<double> v, surv;
    double s = 1.0;
    for (size_t r = 0; r < idx.size(); ++r) {
        double val = values[idx[r]];
        s -= probs[idx[r]];
        if (!v.empty() && val == v.back())
            surv.back() = s;
        else {
            v.push_back(val);
            surv.push_back(s);
        }
    }
    double j1 = j.at1();
    double total = 0.0;
    // negative side below the smallest value: S = 1, j(1) - j(1) = 0
    for (size_t i = 0; i + 1 < v.size(); ++i) {
        double a = v[i], b = v[i + 1];
        double lvl = std::max(surv[i], 0.0);
        double ja = j(std::min(lvl, 1.0));
        if (b <= 0.0) {
            total += (ja - j1) * (b - a);
        } else if (a >= 0.0) {
            total += ja * (b - a);
        } else {
            total += (ja - j1) * (0.0 - a) + ja * b;
        }
    }
    // from the largest value outward: S = 0 on (v_max, inf), j(0) = 0;
    // if v_max < 0 the stretch (v_max, 0) has S = 0 and contributes -j1 * len
    if (v.back() < 0.0) total += (0.0 - j1) * (0.0 - v.back());
    // if v_min > 0, the stretch (0, v_min) has S = 1: contributes j(1) * len
    if (v.front() > 0.0) total += j1 * v.front();
    return total;
}

double premium(const PremiumPrinciple& pp, const Indemnity& I, const LossModel& m,
               const QuadratureConfig& cfg) {
    cfg.validate();
    Distortion tk = pp.tk();
    auto integrand = [&](double t) { return I.slope(t) * tk(m.survival(t)); };
    double hi = std::min(m.support_bound(), m.quantile(cfg.tail_mass));
    std::vector<double> splits = survival_splits(tk, m, hi);
    for (double b : I.breakpoints()) splits.push_back(b);
    double total = hi > 0.0 ? integrate_split(integrand, 0.0, hi, splits, cfg) : 0.0;
    if (!std::isfinite(m.support_bound())) {
        TailResult tail = integrate_tail(integrand, hi, std::max(1.0, 0.05 * hi), cfg);
        if (tail.divergent)
            throw QuadratureError("premium integral diverges in the tail", total + tail.value,
                                  std::numeric_limits<double>::infinity());
        total += tail.value;
    }
    return total;
}

PremiumSplit premium_split(const PremiumPrinciple& pp, const Indemnity& I, const LossModel& m,
                           const QuadratureConfig& cfg) {
    PremiumSplit out;
    PremiumPrinciple loading_only{pp.theta, Distortion::zero()};
    PremiumPrinciple deviation_only{-1.0 + 1e-16, Distortion::zero()};
    out.loading_part = premium(loading_only, I, m, cfg);
    // deviation part: integral of I' * k(S_X)
    Distortion k = pp.k;
    auto integrand = [&](double t) { return I.slope(t) * k(m.survival(t)); };
    double hi = std::min(m.support_bound(), m.quantile(cfg.tail_mass));
    std::vector<double> splits = survival_splits(k, m, hi);
    for (double b : I.breakpoints()) splits.push_back(b);
    out.deviation_part = hi > 0.0 ? integrate_split(integrand, 0.0, hi, splits, cfg) : 0.0;
    if (!std::isfinite(m.support_bound())) {
        TailResult tail = integrate_tail(integrand, hi, std::max(1.0, 0.05 * hi), cfg);
        out.deviation_part += tail.value;
    }
    out.total = out.loading_part + out.deviation_part;
    return out;
}

double premium_discrete(const PremiumPrinciple& pp, const std::vector<double>& values,
                        const std::vector<double>& probs) {
    double mean = 0.0;
    for (size_t i = 0; i < values.size(); ++i) mean += values[i] * probs[i];
    return (1.0 + pp.theta) * mean + rho_discrete(pp.k, values, probs);
}

GiniCheck gini_cross_check(const LossModel& m, long n_samples, std::uint64_t seed,
                           const QuadratureConfig& cfg) {
    GiniCheck out;
    out.rho_value = rho(Distortion::gini(), m, cfg);
    std::mt19937_64 rng(seed);
    double sum = 0.0, sumsq = 0.0;
    for (long i = 0; i < n_samples; ++i) {
        double y1 = m.sample(rng);
        double y2 = m.sample(rng);
        double d = 0.5 * std::abs(y1 - y2);
        sum += d;
        sumsq += d * d;
    }
    out.mc_value = sum / n_samples;
    double var = std::max(0.0, sumsq / n_samples - out.mc_value * out.mc_value);
    double se = std::sqrt(var / n_samples);
    out.z_score = se > 0.0 ? (out.mc_value - out.rho_value) / se : 0.0;
    return out;
}

double mean_median_numeric(const LossModel& m, const QuadratureConfig& cfg) {
    // E|Y - y| = y + E[Y] - 2 * integral of S over [0, y]
    double mean = m.mean();
    auto mad = [&](double y) {
        double tail = integrate([&](double t) { return m.survival(t); }, 0.0, y, cfg);
        return y + mean - 2.0 * tail;
    };
    double hi = std::min(m.support_bound(), m.quantile(0.01));
    double y_star = golden_min(mad, 0.0, std::max(hi, 1e-9), 1e-9);
    return mad(y_star);
}

} // namespace riskmetric
