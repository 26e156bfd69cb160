#include "riskmetric/contract.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace riskmetric {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
double clip01(double s) { return std::min(1.0, std::max(0.0, s)); }
} // namespace

std::string regime_name(Regime r) {
    switch (r) {
    case Regime::Zero:
        return "zero";
    case Regime::Full:
        return "full";
    case Regime::Deductible:
        return "deductible";
    case Regime::MaxLimit:
        return "max_limit";
    case Regime::DeductibleCoinsurance:
        return "deductible_coinsurance";
    case Regime::Diml:
        return "diml";
    case Regime::General:
        return "general";
    }
    return "general";
}

Indemnity Indemnity::zero() { return Indemnity(); }

Indemnity Indemnity::full() {
    Indemnity I;
    I.kind_ = ContractKind::Full;
    return I;
}

Indemnity Indemnity::deductible(double d) {
    if (!(d >= 0.0)) throw ConfigError("deductible must be non-negative");
    Indemnity I;
    I.kind_ = ContractKind::Deductible;
    I.d_ = d;
    return I;
}

Indemnity Indemnity::max_limit(double m) {
    if (!(m >= 0.0)) throw ConfigError("limit must be non-negative");
    Indemnity I;
    I.kind_ = ContractKind::MaxLimit;
    I.m_ = m;
    return I;
}

Indemnity Indemnity::deductible_coinsurance(double d, double alpha) {
    if (!(d >= 0.0)) throw ConfigError("deductible must be non-negative");
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("coinsurance slope must lie in [0,1]");
    Indemnity I;
    I.kind_ = ContractKind::DeductibleCoinsurance;
    I.d_ = d;
    I.alpha_ = alpha;
    return I;
}

Indemnity Indemnity::piecewise_linear(std::vector<double> knots, std::vector<double> slopes,
                                      double ext_slope) {
    if (knots.size() != slopes.size() + 1 || knots.empty())
        throw ConfigError("piecewise-linear contract needs n+1 knots for n slopes");
    if (std::abs(knots.front()) > 1e-15) throw ConfigError("first knot must be 0");
    for (size_t i = 0; i + 1 < knots.size(); ++i)
        if (!(knots[i] < knots[i + 1])) throw ConfigError("knots must be strictly increasing");
    for (double s : slopes)
        if (!(s >= 0.0 && s <= 1.0)) throw ConfigError("contract slope outside [0,1]");
    if (!(ext_slope >= 0.0 && ext_slope <= 1.0)) throw ConfigError("contract slope outside [0,1]");
    Indemnity I;
    I.kind_ = ContractKind::PiecewiseLinear;
    I.knots_ = std::move(knots);
    I.slopes_ = std::move(slopes);
    I.ext_slope_ = ext_slope;
    I.values_.assign(I.knots_.size(), 0.0);
    for (size_t i = 0; i + 1 < I.knots_.size(); ++i)
        I.values_[i + 1] = I.values_[i] + I.slopes_[i] * (I.knots_[i + 1] - I.knots_[i]);
    return I;
}

Indemnity Indemnity::diml(double d, double m, DimlInterior interior, double pi_star, double upsilon) {
    if (!(d >= 0.0) || !(m >= d)) throw ConfigError("deductible/limit pair must satisfy 0 <= d <= m");
    Indemnity I;
    I.kind_ = ContractKind::Diml;
    I.d_ = d;
    I.m_ = m;
    I.pi_star_ = pi_star;
    I.upsilon_ = upsilon;
    I.interior_ = std::make_shared<const DimlInterior>(std::move(interior));
    I.interior_at_m_ = std::isfinite(m) && m > d ? I.interior_->value(m) : 0.0;
    return I;
}

double Indemnity::operator()(double x) const {
    if (!(x >= 0.0)) throw DomainError("loss argument must be non-negative");
    switch (kind_) {
    case ContractKind::Zero:
        return 0.0;
    case ContractKind::Full:
        return x;
    case ContractKind::Deductible:
        return std::max(0.0, x - d_);
    case ContractKind::MaxLimit:
        return std::min(x, m_);
    case ContractKind::DeductibleCoinsurance:
        return alpha_ * std::max(0.0, x - d_);
    case ContractKind::Diml:
        if (x <= d_) return 0.0;
        if (x >= m_) return interior_at_m_;
        return std::max(0.0, interior_->value(x));
    case ContractKind::PiecewiseLinear: {
        if (x >= knots_.back()) return values_.back() + ext_slope_ * (x - knots_.back());
        auto it = std::upper_bound(knots_.begin(), knots_.end(), x);
        size_t i = static_cast<size_t>(it - knots_.begin()) - 1;
        return values_[i] + slopes_[i] * (x - knots_[i]);
    }
    }
    return 0.0;
}

double Indemnity::slope(double t) const {
    if (!(t >= 0.0)) throw DomainError("loss argument must be non-negative");
    switch (kind_) {
    case ContractKind::Zero:
        return 0.0;
    case ContractKind::Full:
        return 1.0;
    case ContractKind::Deductible:
        return t >= d_ ? 1.0 : 0.0;
    case ContractKind::MaxLimit:
        return t >= m_ ? 0.0 : 1.0;
    case ContractKind::DeductibleCoinsurance:
        return t >= d_ ? alpha_ : 0.0;
    case ContractKind::Diml:
        if (t < d_ || t >= m_) return 0.0;
        return clip01(interior_->slope(t));
    case ContractKind::PiecewiseLinear: {
        if (t >= knots_.back()) return ext_slope_;
        auto it = std::upper_bound(knots_.begin(), knots_.end(), t);
        size_t i = static_cast<size_t>(it - knots_.begin());
        if (i > 0) --i;
        return slopes_[i];
    }
    }
    return 0.0;
}

std::vector<double> Indemnity::breakpoints() const {
    switch (kind_) {
    case ContractKind::Zero:
    case ContractKind::Full:
        return {};
    case ContractKind::Deductible:
    case ContractKind::DeductibleCoinsurance:
        return d_ > 0.0 ? std::vector<double>{d_} : std::vector<double>{};
    case ContractKind::MaxLimit:
        return m_ > 0.0 ? std::vector<double>{m_} : std::vector<double>{};
    case ContractKind::Diml: {
        std::vector<double> b;
        if (d_ > 0.0) b.push_back(d_);
        if (std::isfinite(m_)) b.push_back(m_);
        return b;
    }
    case ContractKind::PiecewiseLinear:
        return std::vector<double>(knots_.begin() + 1, knots_.end());
    }
    return {};
}

Indemnity project_to_Ic(const std::vector<double>& knots, std::vector<double> raw_slopes,
                        double raw_ext_slope) {
    for (auto& s : raw_slopes) s = clip01(s);
    return Indemnity::piecewise_linear(knots, std::move(raw_slopes), clip01(raw_ext_slope));
}

namespace {

struct Run {
    int cat; // 0, 1, or 2 (interior)
    double lo, hi;
    int len;
};

Regime classify_slope_sequence(const std::vector<double>& s, double tol) {
    if (s.empty()) return Regime::Zero;
    auto cat_of = [tol](double v) { return v <= tol ? 0 : (v >= 1.0 - tol ? 1 : 2); };
    std::vector<Run> runs;
    for (double v : s) {
        int c = cat_of(v);
        if (!runs.empty() && runs.back().cat == c) {
            runs.back().lo = std::min(runs.back().lo, v);
            runs.back().hi = std::max(runs.back().hi, v);
            runs.back().len++;
        } else {
            runs.push_back({c, v, v, 1});
        }
    }
    // absorb single-cell transition runs between two larger neighbors
    bool changed = true;
    while (changed && runs.size() >= 3) {
        changed = false;
        for (size_t j = 1; j + 1 < runs.size(); ++j) {
            if (runs[j].len == 1 && runs[j - 1].len > 1 && runs[j + 1].len > 1 &&
                runs[j - 1].cat != runs[j].cat && runs[j + 1].cat != runs[j].cat) {
                runs.erase(runs.begin() + j);
                if (runs[j - 1].cat == runs[j].cat) {
                    runs[j - 1].hi = std::max(runs[j - 1].hi, runs[j].hi);
                    runs[j - 1].lo = std::min(runs[j - 1].lo, runs[j].lo);
                    runs[j - 1].len += runs[j].len;
                    runs.erase(runs.begin() + j);
                }
                changed = true;
                break;
            }
        }
    }

    std::vector<Run> mid(runs);
    bool leading0 = !mid.empty() && mid.front().cat == 0;
    if (leading0) mid.erase(mid.begin());
    bool trailing0 = !mid.empty() && mid.back().cat == 0;
    if (trailing0) mid.pop_back();

    if (mid.empty()) return Regime::Zero;
    for (const auto& r : mid)
        if (r.cat == 0) return Regime::General; // interior gap in coverage

    if (mid.size() == 1 && mid[0].cat == 1)
        return trailing0 ? (leading0 ? Regime::Diml : Regime::MaxLimit)
                         : (leading0 ? Regime::Deductible : Regime::Full);
    if (mid.size() == 1 && mid[0].cat == 2) {
        bool constant = (mid[0].hi - mid[0].lo) <= tol;
        if (constant && !trailing0) return Regime::DeductibleCoinsurance;
        return Regime::Diml;
    }
    if (mid.size() == 2 && mid[0].cat == 2 && mid[1].cat == 1) return Regime::Diml;
    return Regime::General;
}

} // namespace

Regime classify(const Indemnity& I, double tol, double x_max) {
    switch (I.kind()) {
    case ContractKind::Zero:
        return Regime::Zero;
    case ContractKind::Full:
        return Regime::Full;
    case ContractKind::Deductible:
        return I.d() <= 0.0 ? Regime::Full : Regime::Deductible;
    case ContractKind::MaxLimit:
        return I.m() <= 0.0 ? Regime::Zero : Regime::MaxLimit;
    case ContractKind::DeductibleCoinsurance:
        if (I.alpha() <= tol) return Regime::Zero;
        if (I.alpha() >= 1.0 - tol) return I.d() <= 0.0 ? Regime::Full : Regime::Deductible;
        return Regime::DeductibleCoinsurance;
    case ContractKind::PiecewiseLinear: {
        // judge the actual segment slopes so transition cells stay cells
        std::vector<double> s = I.pl_slopes();
        s.push_back(I.ext_slope());
        return classify_slope_sequence(s, tol);
    }
    case ContractKind::Diml: {
        double hi = std::isfinite(x_max) ? x_max : 10.0 * (1.0 + I.d());
        if (std::isfinite(I.m())) hi = std::max(hi, I.m() * 1.02);
        int n = 512;
        std::vector<double> s(n);
        for (int i = 0; i < n; ++i) s[i] = I.slope(hi * (i + 0.5) / n);
        return classify_slope_sequence(s, tol);
    }
    }
    return Regime::General;
}

Regime classify(const Indemnity& I, double tol) {
    return classify(I, tol, std::numeric_limits<double>::quiet_NaN());
}

} // namespace riskmetric
