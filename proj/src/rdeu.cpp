#include "riskmetric/rdeu.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace riskmetric {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

Utility Utility::linear() { return Utility(); }

Utility Utility::cara(double gamma) {
    if (!(gamma > 0.0)) throw ConfigError("CARA coefficient must be positive");
    Utility u;
    u.kind_ = UtilityKind::Cara;
    u.gamma_ = gamma;
    return u;
}

Utility Utility::crra(double eta) {
    if (!(eta > 0.0)) throw ConfigError("CRRA coefficient must be positive");
    Utility u;
    u.kind_ = UtilityKind::Crra;
    u.a_ = eta;
    return u;
}

Utility Utility::hara(double a, double m) {
    if (!(a >= 0.0)) throw ConfigError("HARA slope must be non-negative");
    if (a == 0.0 && !(m > 0.0)) throw ConfigError("HARA with a=0 needs positive m");
    Utility u;
    if (a == 0.0) return cara(1.0 / m); // constant absolute risk aversion limit
    u.kind_ = UtilityKind::Hara;
    u.a_ = a;
    u.m_ = m;
    return u;
}

double Utility::u(double x) const {
    switch (kind_) {
    case UtilityKind::Linear:
        return x;
    case UtilityKind::Cara:
        return (1.0 - std::exp(-gamma_ * x)) / gamma_;
    case UtilityKind::Crra: {
        require_in_domain(x);
        double eta = a_;
        if (std::abs(eta - 1.0) < 1e-14) return std::log(x);
        return (std::pow(x, 1.0 - eta) - 1.0) / (1.0 - eta);
    }
    case UtilityKind::Hara: {
        require_in_domain(x);
        double base = a_ * x + m_;
        if (std::abs(a_ - 1.0) < 1e-14) return std::log(base);
        return std::pow(base, 1.0 - 1.0 / a_) / (a_ - 1.0);
    }
    }
    return x;
}

double Utility::uprime(double x) const {
    switch (kind_) {
    case UtilityKind::Linear:
        return 1.0;
    case UtilityKind::Cara:
        return std::exp(-gamma_ * x);
    case UtilityKind::Crra:
        require_in_domain(x);
        return std::pow(x, -a_);
    case UtilityKind::Hara:
        require_in_domain(x);
        return std::pow(a_ * x + m_, -1.0 / a_);
    }
    return 1.0;
}

double Utility::usecond(double x) const {
    switch (kind_) {
    case UtilityKind::Linear:
        return 0.0;
    case UtilityKind::Cara:
        return -gamma_ * std::exp(-gamma_ * x);
    case UtilityKind::Crra:
        require_in_domain(x);
        return -a_ * std::pow(x, -a_ - 1.0);
    case UtilityKind::Hara:
        require_in_domain(x);
        return -std::pow(a_ * x + m_, -1.0 / a_ - 1.0);
    }
    return 0.0;
}

double Utility::inv_uprime(double y) const {
    if (!(y > 0.0)) throw DomainError("marginal utility target must be positive");
    switch (kind_) {
    case UtilityKind::Linear:
        throw DomainError("linear utility has no invertible marginal");
    case UtilityKind::Cara:
        return -std::log(y) / gamma_;
    case UtilityKind::Crra:
        return std::pow(y, -1.0 / a_);
    case UtilityKind::Hara:
        return (std::pow(y, -a_) - m_) / a_;
    }
    return 0.0;
}

double Utility::inv_u(double v) const {
    switch (kind_) {
    case UtilityKind::Linear:
        return v;
    case UtilityKind::Cara: {
        double arg = 1.0 - gamma_ * v;
        if (!(arg > 0.0)) throw DomainError("value outside the range of the utility");
        return -std::log(arg) / gamma_;
    }
    case UtilityKind::Crra: {
        double eta = a_;
        if (std::abs(eta - 1.0) < 1e-14) return std::exp(v);
        double arg = 1.0 + (1.0 - eta) * v;
        if (!(arg > 0.0)) throw DomainError("value outside the range of the utility");
        return std::pow(arg, 1.0 / (1.0 - eta));
    }
    case UtilityKind::Hara: {
        double arg = v * (a_ - 1.0);
        if (std::abs(a_ - 1.0) < 1e-14) return (std::exp(v) - m_) / a_;
        if (!(arg > 0.0)) throw DomainError("value outside the range of the utility");
        return (std::pow(arg, 1.0 / (1.0 - 1.0 / a_)) - m_) / a_;
    }
    }
    return v;
}

double Utility::domain_lower() const {
    switch (kind_) {
    case UtilityKind::Linear:
    case UtilityKind::Cara:
        return -kInf;
    case UtilityKind::Crra:
        return 0.0;
    case UtilityKind::Hara:
        return -m_ / a_;
    }
    return -kInf;
}

void Utility::require_in_domain(double x) const {
    if (x > domain_lower()) return;
    std::ostringstream os;
    os << "utility undefined at wealth level " << x;
    throw DomainError(os.str());
}

void BuyerPreferences::validate(bool allow_nonconvex_b) const {
    BuyerDual bd{b};
    bd.validate(allow_nonconvex_b);
}

namespace {

// shared kernel: integral of weight(x) over the continuous part plus
// b-increment sums over atoms, restricted to x > t (t < 0 means everything)
struct BuyerMeasureIntegral {
    const BuyerPreferences& prefs;
    const Indemnity& I;
    double pi;
    const LossModel& m;
    const QuadratureConfig& cfg;

    template <class G>
    double over_tail(double t, G&& g, bool* divergent = nullptr) const {
        Distortion tb = prefs.tb();
        double total = 0.0;
        for (const auto& a : m.atoms()) {
            if (a.x <= t) continue;
            double s_at = m.survival(a.x);
            double dbw = tb(s_at + a.p) - tb(s_at); // = b(F(a)) - b(F(a-))
            total += dbw * g(a.x);
        }
        if (!m.has_density()) return total;

        auto integrand = [&](double x) {
            double s = m.survival(x);
            return g(x) * tb.deriv(s) * m.density(x);
        };
        double lo = std::max(t, 0.0);
        double hi = std::min(m.support_bound(), m.quantile(cfg.tail_mass));
        if (hi > lo) {
            std::vector<double> splits = I.breakpoints();
            for (double p : prefs.b.kink_points()) splits.push_back(m.quantile(p));
            total += integrate_split(integrand, lo, hi, splits, cfg);
        }
        if (!std::isfinite(m.support_bound())) {
            double hint = std::max(1.0, 0.05 * std::max(hi, 1.0));
            TailResult tail = integrate_tail(integrand, std::max(lo, hi), hint, cfg);
            total += tail.value;
            if (tail.divergent) {
                if (divergent)
                    *divergent = true;
                else
                    throw QuadratureError("buyer-measure integral diverges in the tail", total, kInf);
            }
        }
        return total;
    }
};

} // namespace

RdeuResult rdeu_value_checked(const BuyerPreferences& prefs, const Indemnity& I, double pi,
                              const LossModel& m, const QuadratureConfig& cfg) {
    cfg.validate();
    const Utility& u = prefs.utility;
    double w = prefs.wealth;
    BuyerMeasureIntegral kern{prefs, I, pi, m, cfg};
    RdeuResult r;
    r.value = kern.over_tail(
        -1.0, [&](double x) { return u.u(w - (x - I(x)) - pi); }, &r.divergent);
    if (r.divergent) r.value = -kInf;
    return r;
}

double rdeu_value(const BuyerPreferences& prefs, const Indemnity& I, double pi,
                  const LossModel& m, const QuadratureConfig& cfg) {
    RdeuResult r = rdeu_value_checked(prefs, I, pi, m, cfg);
    if (r.divergent)
        throw QuadratureError("rank-dependent expected utility diverges", r.value, kInf);
    return r.value;
}

double marginal_weight(const BuyerPreferences& prefs, const Indemnity& I, double pi,
                       const LossModel& m, double t, const QuadratureConfig& cfg) {
    cfg.validate();
    const Utility& u = prefs.utility;
    double w = prefs.wealth;
    BuyerMeasureIntegral kern{prefs, I, pi, m, cfg};
    return kern.over_tail(t, [&](double x) { return u.uprime(w - (x - I(x)) - pi); });
}

} // namespace riskmetric
