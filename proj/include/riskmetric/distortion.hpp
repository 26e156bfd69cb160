#ifndef RISKMETRIC_DISTORTION_HPP
#define RISKMETRIC_DISTORTION_HPP

#include <optional>
#include <string>
#include <vector>

#include "riskmetric/errors.hpp"

namespace riskmetric {

// A distortion is stored as a sum of closed-form terms plus an optional
// tabulated part. Term-wise arithmetic keeps canonical decomposition and
// dualization exact: recomposing (1+theta)p + k(p) reproduces g+h to
// rounding error, with no resampling step in between.
enum class TermKind { Linear, Power, DualPower, Gini, MeanMedian };

struct DistortionTerm {
    TermKind kind;
    double coef; // multiplies the base shape
    double c;    // exponent for Power/DualPower, ignored otherwise

    double eval(double p) const;
    double deriv(double p) const;  // left derivative at kinks
    double deriv2(double p) const; // zero at/beyond kinks
    DistortionTerm dual() const;   // term of p -> term(1) - term(1-p)
    double at1() const;
};

class Distortion {
  public:
    Distortion() = default;

    static Distortion zero();
    static Distortion identity();
    static Distortion linear(double slope);
    static Distortion power(double theta, double c);      // (1+theta) p^c, c in (0,1)
    static Distortion dual_power(double theta, double c); // (1+theta)(1-(1-p)^c), c > 1
    static Distortion gini(double alpha = 1.0);           // alpha (p - p^2)
    static Distortion mean_median(double alpha = 1.0);    // alpha min(p, 1-p)
    static Distortion linear_plus_gini(double theta, double alpha);
    static Distortion linear_plus_mean_median(double theta, double alpha);
    static Distortion convex_dual_power(double a); // buyer b(p) = 1-(1-p)^a, a in (0,1)
    static Distortion tabulated(std::vector<double> knots, std::vector<double> values);

    double operator()(double p) const; // throws DomainError outside [0,1]
    double deriv(double p) const;      // left derivative at kinks
    double deriv2(double p) const;
    double at1() const;

    Distortion dual() const; // p -> (*this)(1) - (*this)(1 - p), exact term-wise
    Distortion plus(const Distortion& other) const;
    Distortion plus_linear(double slope) const;
    Distortion scaled(double factor) const;

    bool concave_sampled(int n = 1001, double tol = 1e-12) const;
    bool convex_sampled(int n = 1001, double tol = 1e-12) const;
    bool nonnegative_sampled(int n = 1001, double tol = 1e-12) const;
    bool nondecreasing_sampled(int n = 1001, double tol = 1e-12) const;
    bool strictly_increasing_sampled(int n = 1001) const;

    // Interior p-locations where the derivative is discontinuous
    // (mean-median kink at 1/2, tabulated knots).
    std::vector<double> kink_points() const;

    bool has_tabulated() const { return !tab_knots_.empty(); }
    const std::vector<DistortionTerm>& terms() const { return terms_; }
    const std::vector<double>& tab_knots() const { return tab_knots_; }
    const std::vector<double>& tab_values() const { return tab_values_; }

  private:
    std::vector<DistortionTerm> terms_;
    std::vector<double> tab_knots_;
    std::vector<double> tab_values_;

    double tab_eval(double p) const;
    double tab_deriv(double p) const;
    void consolidate();
};

// Canonical premium principle: pi(Y) = (1+theta) E[Y] + rho_k(Y) with k a
// concave deviation distortion, k(0) = k(1) = 0.
struct PremiumPrinciple {
    double theta = 0.0;
    Distortion k;

    Distortion tk() const { return k.plus_linear(1.0 + theta); }
    void validate() const; // throws ConfigError on a malformed principle
};

// theta = g(1) - 1, k(p) = g(p) + h(p) - (1+theta) p.
PremiumPrinciple canonical_decompose(const Distortion& g, const Distortion& h);

// Buyer-side distortion b (convex, b(0)=0, b(1)=1) and its concave dual
// tb(p) = 1 - b(1-p).
struct BuyerDual {
    Distortion b;

    // tb(p) = 1 - b(1-p); since b(1) = 1 this is exactly the term-wise dual.
    Distortion tb() const { return b.dual(); }
    void validate(bool allow_nonconvex = false) const;
};

Distortion buyer_tb(const Distortion& b);

enum class StochOrder { FSD, HR, LR };

struct OrderResult {
    bool holds = false;
    std::optional<double> fails_at;
};

// FSD: j1 <= j2 pointwise. HR: j1/j2 non-decreasing on the interior grid.
// LR: j1'/j2' non-decreasing where j2' > 0. "j1 precedes j2" in each order
// corresponds to holds == true.
OrderResult check_order(const Distortion& j1, const Distortion& j2, StochOrder order, int grid_n);

} // namespace riskmetric

#endif
