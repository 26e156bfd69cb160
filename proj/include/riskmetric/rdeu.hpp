#ifndef RISKMETRIC_RDEU_HPP
#define RISKMETRIC_RDEU_HPP

#include <string>

#include "riskmetric/contract.hpp"
#include "riskmetric/distortion.hpp"
#include "riskmetric/loss_model.hpp"
#include "riskmetric/quadrature.hpp"

namespace riskmetric {

enum class UtilityKind { Linear, Cara, Crra, Hara };

// Strictly increasing concave utilities with closed-form u, u', u'', the
// inverse of u', and the inverse of u itself (for certainty equivalents).
// CARA is normalized to u(x) = (1 - e^(-gamma x))/gamma so u(0) = 0; any
// affine renormalization leaves optimal contracts unchanged.
class Utility {
  public:
    static Utility linear();
    static Utility cara(double gamma);
    static Utility crra(double eta);        // relative risk aversion, domain x > 0
    static Utility hara(double a, double m); // absolute risk aversion 1/(a x + m)

    UtilityKind kind() const { return kind_; }
    double u(double x) const;
    double uprime(double x) const;
    double usecond(double x) const;
    double inv_uprime(double y) const; // y > 0
    double inv_u(double v) const;

    bool is_linear() const { return kind_ == UtilityKind::Linear; }
    bool strictly_concave() const { return kind_ != UtilityKind::Linear; }
    // every catalog utility with curvature has linear risk tolerance
    bool hara_family() const { return strictly_concave(); }
    bool third_derivative_nonneg() const { return true; }

    // lowest admissible wealth argument (-inf when unrestricted)
    double domain_lower() const;
    void require_in_domain(double x) const; // throws DomainError naming x

    double param_gamma() const { return gamma_; }
    double param_a() const { return a_; }
    double param_m() const { return m_; }

  private:
    UtilityKind kind_ = UtilityKind::Linear;
    double gamma_ = 0.0; // cara
    double a_ = 0.0, m_ = 0.0; // hara; crra stores eta in a_
};

struct BuyerPreferences {
    Utility utility;
    Distortion b = Distortion::identity(); // convex buyer distortion
    double wealth = 0.0;

    Distortion tb() const { return buyer_tb(b); }
    void validate(bool allow_nonconvex_b = false) const;
};

// Rank-dependent expected utility of terminal wealth w - R(X) - pi under
// the buyer distortion b. Infinite (divergent) integrals surface as a
// QuadratureError from the tail extension.
struct RdeuResult {
    double value = 0.0;
    bool divergent = false;
};

RdeuResult rdeu_value_checked(const BuyerPreferences& prefs, const Indemnity& I, double pi,
                              const LossModel& m, const QuadratureConfig& cfg);
double rdeu_value(const BuyerPreferences& prefs, const Indemnity& I, double pi,
                  const LossModel& m, const QuadratureConfig& cfg);

// Tail-weighted marginal utility: integral of u'(w - R(x) - pi) over {x > t}
// under the buyer measure db(F_X). Atoms at x = t are excluded (strict
// inequality).
double marginal_weight(const BuyerPreferences& prefs, const Indemnity& I, double pi,
                       const LossModel& m, double t, const QuadratureConfig& cfg);

} // namespace riskmetric

#endif
