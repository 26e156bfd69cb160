#ifndef RISKMETRIC_CONTRACT_HPP
#define RISKMETRIC_CONTRACT_HPP

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "riskmetric/errors.hpp"

namespace riskmetric {

enum class ContractKind { Zero, Full, Deductible, MaxLimit, DeductibleCoinsurance, Diml, PiecewiseLinear };

// Label attached by classify(); General covers anything the named families
// do not match.
enum class Regime { Zero, Full, Deductible, MaxLimit, DeductibleCoinsurance, Diml, General };

std::string regime_name(Regime r);

// Interior section of a deductible-with-limit contract on (d, m). The
// closures come either from a closed-form family or from the marginal-rate
// construction; params carries whatever is needed to rebuild them.
struct DimlInterior {
    std::function<double(double)> value;
    std::function<double(double)> slope;
    std::string family; // "power", "dual_power", "gini", "general"
    std::map<std::string, double> params;
};

// Indemnity I in I_c: I(0)=0, slopes in [0,1]. Symbolic kinds are exact;
// PiecewiseLinear covers numeric output.
class Indemnity {
  public:
    Indemnity() : kind_(ContractKind::Zero) {}

    static Indemnity zero();
    static Indemnity full();
    static Indemnity deductible(double d);
    static Indemnity max_limit(double m);
    static Indemnity deductible_coinsurance(double d, double alpha);
    static Indemnity piecewise_linear(std::vector<double> knots, std::vector<double> slopes,
                                      double ext_slope);
    static Indemnity diml(double d, double m, DimlInterior interior, double pi_star, double upsilon);

    double operator()(double x) const;
    double slope(double t) const; // right slope at knots

    ContractKind kind() const { return kind_; }
    // finite breakpoints where the slope may jump (integration split points)
    std::vector<double> breakpoints() const;

    double d() const { return d_; }
    double m() const { return m_; }
    double alpha() const { return alpha_; }
    double pi_star() const { return pi_star_; }
    double upsilon() const { return upsilon_; }
    const DimlInterior* interior() const { return interior_ ? interior_.get() : nullptr; }
    const std::vector<double>& pl_knots() const { return knots_; }
    const std::vector<double>& pl_slopes() const { return slopes_; }
    double ext_slope() const { return ext_slope_; }

  private:
    ContractKind kind_;
    double d_ = 0.0, m_ = 0.0, alpha_ = 0.0;
    double pi_star_ = 0.0, upsilon_ = 0.0;
    std::shared_ptr<const DimlInterior> interior_;
    double interior_at_m_ = 0.0;
    std::vector<double> knots_, slopes_, values_; // PiecewiseLinear
    double ext_slope_ = 0.0;
};

// Clips raw per-segment slopes into [0,1] and assembles the contract.
Indemnity project_to_Ic(const std::vector<double>& knots, std::vector<double> raw_slopes,
                        double raw_ext_slope);

// Pattern-matches the slope profile against the named families. x_max bounds
// the region examined for non-piecewise kinds.
Regime classify(const Indemnity& I, double tol, double x_max);
Regime classify(const Indemnity& I, double tol = 1e-3);

} // namespace riskmetric

#endif
