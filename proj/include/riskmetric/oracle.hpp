#ifndef RISKMETRIC_ORACLE_HPP
#define RISKMETRIC_ORACLE_HPP

#include <vector>

#include "riskmetric/contract.hpp"
#include "riskmetric/rdeu.hpp"

namespace riskmetric {

// Discretized insured's problem: maximize the distorted expected utility of
// terminal wealth over per-cell slopes in [0,1]. Built independently of the
// solver so the two can certify each other.
struct DiscreteProblem {
    std::vector<double> x;     // n+1 cell boundaries, x[0] = 0
    std::vector<double> prob;  // physical probability carried by each cell
    std::vector<double> s;     // current slope iterate
    std::vector<double> w_tk;  // premium weight per cell: integral of tk(S_X)
    std::vector<double> b_inc; // buyer-measure increment per cell

    // quadrature nodes of the buyer measure (atoms enter with exact weights)
    std::vector<double> node_x, node_w;
    std::vector<int> node_cell;

    Utility u;
    double wealth = 0.0;

    int segments() const { return static_cast<int>(x.size()) - 1; }
    double premium_of(const std::vector<double>& slopes) const;
    double value(const std::vector<double>& slopes) const;
    std::vector<double> gradient(const std::vector<double>& slopes) const;
    std::vector<double> hessian_diag(const std::vector<double>& slopes) const;
    // exact cell-average slopes of a contract, for like-for-like comparisons
    std::vector<double> project_contract(const Indemnity& I) const;
};

DiscreteProblem build_problem(const BuyerPreferences& prefs, const PremiumPrinciple& pp,
                              const LossModel& m, int n, const QuadratureConfig& qcfg);

struct OracleResult {
    std::vector<double> slopes;
    double value = 0.0;
    int iterations = 0;
    double grad_sup = 0.0; // sup norm of the projected gradient at the end
};

// Projected gradient ascent with a diagonal preconditioner and Armijo
// backtracking; the objective is concave, so the best iterate is a global
// optimum at grid resolution.
OracleResult brute_force_solve(const BuyerPreferences& prefs, const PremiumPrinciple& pp,
                               const LossModel& m, int n, int iters,
                               const QuadratureConfig& qcfg);

struct TinyResult {
    std::vector<double> slopes;
    double value = 0.0;
    int tie_count = 0;
    std::vector<std::vector<double>> ties; // capped sample of tied optima
};

// Full enumeration over slope_levels^segments combinations for discrete
// losses with at most 3 atoms; reports value ties (non-uniqueness witness).
TinyResult exhaustive_tiny(const BuyerPreferences& prefs, const PremiumPrinciple& pp,
                           const LossModel& m, int slope_levels, const QuadratureConfig& qcfg);

// Max relative error (normalized by the sup norm of the analytic gradient)
// between analytic and centered finite-difference gradients at s.
double gradient_check(const BuyerPreferences& prefs, const PremiumPrinciple& pp,
                      const LossModel& m, const std::vector<double>& s, double h,
                      const QuadratureConfig& qcfg);

} // namespace riskmetric

#endif
