#include "riskmetric/distortion.hpp"

#include <algorithm>
#include <cmath>

namespace riskmetric {

namespace {
void check_prob(double p) {
    if (!(p >= 0.0 && p <= 1.0)) throw DomainError("probability argument outside [0,1]");
}
} // namespace

double DistortionTerm::eval(double p) const {
    switch (kind) {
    case TermKind::Linear:
        return coef * p;
    case TermKind::Power:
        return coef * std::pow(p, c);
    case TermKind::DualPower:
        return coef * (1.0 - std::pow(1.0 - p, c));
    case TermKind::Gini:
        return coef * p * (1.0 - p);
    case TermKind::MeanMedian:
        return coef * std::min(p, 1.0 - p);
    }
    return 0.0;
}

double DistortionTerm::deriv(double p) const {
    switch (kind) {
    case TermKind::Linear:
        return coef;
    case TermKind::Power:
        return coef * c * std::pow(p, c - 1.0);
    case TermKind::DualPower:
        return coef * c * std::pow(1.0 - p, c - 1.0);
    case TermKind::Gini:
        return coef * (1.0 - 2.0 * p);
    case TermKind::MeanMedian:
        // left derivative at the kink p = 1/2
        return coef * (p <= 0.5 ? 1.0 : -1.0);
    }
    return 0.0;
}

double DistortionTerm::deriv2(double p) const {
    switch (kind) {
    case TermKind::Linear:
        return 0.0;
    case TermKind::Power:
        return coef * c * (c - 1.0) * std::pow(p, c - 2.0);
    case TermKind::DualPower:
        return -coef * c * (c - 1.0) * std::pow(1.0 - p, c - 2.0);
    case TermKind::Gini:
        return -2.0 * coef;
    case TermKind::MeanMedian:
        return 0.0;
    }
    return 0.0;
}

DistortionTerm DistortionTerm::dual() const {
    // p -> term(1) - term(1-p)
    switch (kind) {
    case TermKind::Linear:
        return {TermKind::Linear, coef, 0.0};
    case TermKind::Power:
        return {TermKind::DualPower, coef, c};
    case TermKind::DualPower:
        return {TermKind::Power, coef, c};
    case TermKind::Gini:
        return {TermKind::Gini, -coef, 0.0};
    case TermKind::MeanMedian:
        return {TermKind::MeanMedian, -coef, 0.0};
    }
    return *this;
}

double DistortionTerm::at1() const {
    switch (kind) {
    case TermKind::Linear:
        return coef;
    case TermKind::Power:
    case TermKind::DualPower:
        return coef;
    case TermKind::Gini:
    case TermKind::MeanMedian:
        return 0.0;
    }
    return 0.0;
}

Distortion Distortion::zero() { return Distortion(); }

Distortion Distortion::identity() { return linear(1.0); }

Distortion Distortion::linear(double slope) {
    Distortion d;
    d.terms_.push_back({TermKind::Linear, slope, 0.0});
    return d;
}

Distortion Distortion::power(double theta, double c) {
    if (!(c > 0.0 && c < 1.0)) throw ConfigError("power distortion requires exponent in (0,1)");
    if (!(theta > -1.0)) throw ConfigError("loading must exceed -1");
    Distortion d;
    d.terms_.push_back({TermKind::Power, 1.0 + theta, c});
    return d;
}

Distortion Distortion::dual_power(double theta, double c) {
    if (!(c > 1.0)) throw ConfigError("dual-power distortion requires exponent > 1");
    if (!(theta > -1.0)) throw ConfigError("loading must exceed -1");
    Distortion d;
    d.terms_.push_back({TermKind::DualPower, 1.0 + theta, c});
    return d;
}

Distortion Distortion::gini(double alpha) {
    Distortion d;
    if (alpha != 0.0) d.terms_.push_back({TermKind::Gini, alpha, 0.0});
    return d;
}

Distortion Distortion::mean_median(double alpha) {
    Distortion d;
    if (alpha != 0.0) d.terms_.push_back({TermKind::MeanMedian, alpha, 0.0});
    return d;
}

Distortion Distortion::linear_plus_gini(double theta, double alpha) {
    if (!(alpha >= 0.0)) throw ConfigError("deviation weight must be non-negative");
    return linear(1.0 + theta).plus(gini(alpha));
}

Distortion Distortion::linear_plus_mean_median(double theta, double alpha) {
    if (!(alpha >= 0.0)) throw ConfigError("deviation weight must be non-negative");
    return linear(1.0 + theta).plus(mean_median(alpha));
}

Distortion Distortion::convex_dual_power(double a) {
    if (!(a > 0.0 && a < 1.0)) throw ConfigError("buyer exponent must lie in (0,1)");
    Distortion d;
    // 1 - (1-p)^a with a < 1 is convex increasing from 0 to 1
    d.terms_.push_back({TermKind::DualPower, 1.0, a});
    return d;
}

Distortion Distortion::tabulated(std::vector<double> knots, std::vector<double> values) {
    if (knots.size() != values.size() || knots.size() < 2)
        throw ConfigError("tabulated distortion needs matching knots/values, at least two");
    for (size_t i = 0; i + 1 < knots.size(); ++i)
        if (!(knots[i] < knots[i + 1])) throw ConfigError("tabulated knots must be strictly increasing");
    if (std::abs(knots.front()) > 1e-15 || std::abs(knots.back() - 1.0) > 1e-15)
        throw ConfigError("tabulated knots must span [0,1]");
    if (std::abs(values.front()) > 1e-12) throw ConfigError("distortion must vanish at 0");
    Distortion d;
    d.tab_knots_ = std::move(knots);
    d.tab_values_ = std::move(values);
    return d;
}

double Distortion::tab_eval(double p) const {
    auto it = std::upper_bound(tab_knots_.begin(), tab_knots_.end(), p);
    size_t i = static_cast<size_t>(std::max<std::ptrdiff_t>(1, it - tab_knots_.begin()));
    if (i >= tab_knots_.size()) i = tab_knots_.size() - 1;
    double x0 = tab_knots_[i - 1], x1 = tab_knots_[i];
    double w = (p - x0) / (x1 - x0);
    return tab_values_[i - 1] * (1.0 - w) + tab_values_[i] * w;
}

double Distortion::tab_deriv(double p) const {
    // left derivative: segment ending at p when p is a knot
    auto it = std::lower_bound(tab_knots_.begin(), tab_knots_.end(), p);
    size_t i = static_cast<size_t>(it - tab_knots_.begin());
    if (i == 0) i = 1;
    if (i >= tab_knots_.size()) i = tab_knots_.size() - 1;
    return (tab_values_[i] - tab_values_[i - 1]) / (tab_knots_[i] - tab_knots_[i - 1]);
}

double Distortion::operator()(double p) const {
    check_prob(p);
    double v = 0.0;
    for (const auto& t : terms_) v += t.eval(p);
    if (!tab_knots_.empty()) v += tab_eval(p);
    return v;
}

double Distortion::deriv(double p) const {
    check_prob(p);
    double v = 0.0;
    for (const auto& t : terms_) v += t.deriv(p);
    if (!tab_knots_.empty()) v += tab_deriv(p);
    return v;
}

double Distortion::deriv2(double p) const {
    check_prob(p);
    double v = 0.0;
    for (const auto& t : terms_) v += t.deriv2(p);
    return v;
}

double Distortion::at1() const {
    double v = 0.0;
    for (const auto& t : terms_) v += t.at1();
    if (!tab_knots_.empty()) v += tab_values_.back();
    return v;
}

Distortion Distortion::dual() const {
    Distortion d;
    for (const auto& t : terms_) d.terms_.push_back(t.dual());
    if (!tab_knots_.empty()) {
        double top = tab_values_.back();
        std::vector<double> k, v;
        for (size_t i = tab_knots_.size(); i-- > 0;) {
            k.push_back(1.0 - tab_knots_[i]);
            v.push_back(top - tab_values_[i]);
        }
        d.tab_knots_ = std::move(k);
        d.tab_values_ = std::move(v);
    }
    d.consolidate();
    return d;
}

Distortion Distortion::plus(const Distortion& other) const {
    Distortion d = *this;
    for (const auto& t : other.terms_) d.terms_.push_back(t);
    if (!other.tab_knots_.empty()) {
        if (!d.tab_knots_.empty()) throw ConfigError("cannot combine two tabulated distortions");
        d.tab_knots_ = other.tab_knots_;
        d.tab_values_ = other.tab_values_;
    }
    d.consolidate();
    return d;
}

Distortion Distortion::plus_linear(double slope) const { return plus(linear(slope)); }

Distortion Distortion::scaled(double factor) const {
    Distortion d;
    if (factor == 0.0) return d;
    for (auto t : terms_) {
        t.coef *= factor;
        d.terms_.push_back(t);
    }
    if (!tab_knots_.empty()) {
        d.tab_knots_ = tab_knots_;
        d.tab_values_ = tab_values_;
        for (auto& v : d.tab_values_) v *= factor;
    }
    return d;
}

void Distortion::consolidate() {
    // merge linear terms so exact cancellations stay exact
    double lin = 0.0;
    std::vector<DistortionTerm> rest;
    for (const auto& t : terms_) {
        if (t.kind == TermKind::Linear)
            lin += t.coef;
        else if (t.coef != 0.0)
            rest.push_back(t);
    }
    terms_ = std::move(rest);
    if (lin != 0.0) terms_.insert(terms_.begin(), {TermKind::Linear, lin, 0.0});
}

namespace {
template <class Pred>
bool sampled_second_diff(const Distortion& j, int n, Pred pred) {
    // three-point test on the uniform grid, scaled tolerance
    double prev2 = j(0.0), prev1 = j(1.0 / (n - 1));
    for (int i = 2; i < n; ++i) {
        double p = static_cast<double>(i) / (n - 1);
        double cur = j(p);
        if (!pred(prev2, prev1, cur)) return false;
        prev2 = prev1;
        prev1 = cur;
    }
    return true;
}
} // namespace

bool Distortion::concave_sampled(int n, double tol) const {
    return sampled_second_diff(*this, n, [tol](double a, double b, double c) {
        return b >= 0.5 * (a + c) - tol;
    });
}

bool Distortion::convex_sampled(int n, double tol) const {
    return sampled_second_diff(*this, n, [tol](double a, double b, double c) {
        return b <= 0.5 * (a + c) + tol;
    });
}

bool Distortion::nonnegative_sampled(int n, double tol) const {
    for (int i = 0; i < n; ++i) {
        double p = static_cast<double>(i) / (n - 1);
        if ((*this)(p) < -tol) return false;
    }
    return true;
}

bool Distortion::nondecreasing_sampled(int n, double tol) const {
    double prev = (*this)(0.0);
    for (int i = 1; i < n; ++i) {
        double p = static_cast<double>(i) / (n - 1);
        double cur = (*this)(p);
        if (cur < prev - tol) return false;
        prev = cur;
    }
    return true;
}

bool Distortion::strictly_increasing_sampled(int n) const {
    double prev = (*this)(0.0);
    for (int i = 1; i < n; ++i) {
        double p = static_cast<double>(i) / (n - 1);
        double cur = (*this)(p);
        if (!(cur > prev)) return false;
        prev = cur;
    }
    return true;
}

std::vector<double> Distortion::kink_points() const {
    std::vector<double> ks;
    for (const auto& t : terms_)
        if (t.kind == TermKind::MeanMedian) ks.push_back(0.5);
    for (size_t i = 1; i + 1 < tab_knots_.size(); ++i) ks.push_back(tab_knots_[i]);
    std::sort(ks.begin(), ks.end());
    ks.erase(std::unique(ks.begin(), ks.end()), ks.end());
    return ks;
}

void PremiumPrinciple::validate() const {
    if (!(theta > -1.0)) throw ConfigError("loading must exceed -1");
    if (std::abs(k(0.0)) > 1e-12 || std::abs(k(1.0)) > 1e-12)
        throw ConfigError("deviation distortion must vanish at 0 and 1");
    if (!k.concave_sampled()) throw ConfigError("deviation distortion must be concave");
    Distortion t = tk();
    if (!t.concave_sampled()) throw ConfigError("effective seller distortion must be concave");
    if (!t.nonnegative_sampled()) throw ConfigError("effective seller distortion must be non-negative");
}

PremiumPrinciple canonical_decompose(const Distortion& g, const Distortion& h) {
    if (!g.nondecreasing_sampled()) throw ConfigError("distortion g must be non-decreasing");
    double g1 = g.at1();
    if (!(g1 > 0.0)) throw ConfigError("g(1) must be positive for a valid principle");
    if (std::abs(h(0.0)) > 1e-12 || std::abs(h(1.0)) > 1e-12)
        throw ConfigError("h must vanish at 0 and 1");
    PremiumPrinciple pp;
    pp.theta = g1 - 1.0;
    pp.k = g.plus(h).plus_linear(-g1);
    if (!pp.k.nonnegative_sampled(1001, 1e-10))
        throw ConfigError("decomposition produced a negative deviation distortion; inputs inconsistent");
    return pp;
}

void BuyerDual::validate(bool allow_nonconvex) const {
    if (std::abs(b(0.0)) > 1e-12) throw ConfigError("buyer distortion must vanish at 0");
    if (std::abs(b(1.0) - 1.0) > 1e-12) throw ConfigError("buyer distortion must equal 1 at 1");
    if (!b.strictly_increasing_sampled()) throw ConfigError("buyer distortion must be strictly increasing");
    if (!allow_nonconvex && !b.convex_sampled())
        throw ConfigError("buyer distortion must be convex (set the non-convex override to proceed)");
}

Distortion buyer_tb(const Distortion& b) { return b.dual(); }

OrderResult check_order(const Distortion& j1, const Distortion& j2, StochOrder order, int grid_n) {
    if (grid_n < 3) throw ConfigError("order check needs grid_n >= 3");
    OrderResult res;
    res.holds = true;

    if (order == StochOrder::FSD) {
        for (int i = 0; i <= grid_n; ++i) {
            double p = static_cast<double>(i) / grid_n;
            if (j1(p) > j2(p) + 1e-10) {
                res.holds = false;
                res.fails_at = p;
                return res;
            }
        }
        return res;
    }

    // HR and LR: ratio monotone non-decreasing on the interior grid, with
    // relative slack for flat stretches.
    const double fd_step = 1.0 / grid_n;
    auto value = [&](const Distortion& j, double p) -> double {
        if (order == StochOrder::HR) return j(p);
        if (j.has_tabulated()) {
            double lo = std::max(0.0, p - fd_step), hi = std::min(1.0, p + fd_step);
            return (j(hi) - j(lo)) / (hi - lo);
        }
        return j.deriv(p);
    };

    double prev_ratio = -std::numeric_limits<double>::infinity();
    bool any_defined = false;
    for (int i = 1; i < grid_n; ++i) {
        double p = static_cast<double>(i) / grid_n;
        double den = value(j2, p);
        double num = value(j1, p);
        double ratio;
        if (den > 0.0) {
            ratio = num / den;
            any_defined = true;
        } else if (num == 0.0) {
            continue; // 0/0: uninformative point
        } else {
            ratio = std::numeric_limits<double>::infinity();
            any_defined = true;
        }
        if (ratio < prev_ratio - 1e-9 * std::max(1.0, std::abs(prev_ratio))) {
            res.holds = false;
            res.fails_at = p;
            return res;
        }
        if (ratio > prev_ratio) prev_ratio = ratio;
    }
    if (!any_defined)
        throw DomainError(order == StochOrder::HR ? "hazard-ratio order indeterminate: denominator vanishes"
                                                  : "likelihood-ratio order indeterminate: denominator derivative vanishes");
    return res;
}

} // namespace riskmetric
