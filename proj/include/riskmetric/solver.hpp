#ifndef RISKMETRIC_SOLVER_HPP
#define RISKMETRIC_SOLVER_HPP

#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "riskmetric/contract.hpp"
#include "riskmetric/rdeu.hpp"
#include "riskmetric/riskmetrics.hpp"

namespace riskmetric {

struct SolverConfig {
    int grid_n = 400;
    double omega = 0.3;    // damping for the fixed-point iteration
    double tol = 1e-6;     // sup-norm slope change
    int max_iter = 500;
    double L_zero_band = 1e-7;
    bool allow_nonconvex_b = false;

    void validate() const {
        if (grid_n < 2 || !(omega > 0.0 && omega <= 1.0) || !(tol > 0.0) || max_iter < 1 ||
            !(L_zero_band > 0.0))
            throw ConfigError("solver config: positive fields required, damping in (0,1]");
    }
};

// The marginal gain function of coverage at threshold t: the contract is
// optimal exactly when slope(t)=0 where L(t)<0 and slope(t)=1 where L(t)>0.
struct MarginalFunction {
    std::vector<double> t;
    std::vector<double> L;
    std::vector<double> tail_ratio; // numerator / denominator
    std::vector<double> tk_S;
    std::vector<double> t_mid;
    std::vector<double> L_mid;
    double denominator = 0.0; // the Upsilon constant
    double pi = 0.0;
};

struct SolveReport {
    Indemnity contract;
    double premium = 0.0;
    double rdeu = 0.0;
    bool rdeu_divergent = false;
    double residual = 0.0;
    Regime regime = Regime::General;
    bool unique = true;
    std::string unique_reason;
    int iterations = 0;
    std::string solver_path;
    bool converged = true;

    // diagnostics
    double d_star = std::numeric_limits<double>::quiet_NaN();
    double m_limit = std::numeric_limits<double>::infinity();
    double slope_interior = std::numeric_limits<double>::quiet_NaN();
    double upsilon = std::numeric_limits<double>::quiet_NaN();
    double g_residual = std::numeric_limits<double>::quiet_NaN(); // |G(d*)| for closed-form roots
    double theta = 0.0;
    int grid_n = 0;
};

struct UniquenessResult {
    bool unique = false;
    std::string reason;
};

MarginalFunction compute_L(const Indemnity& I, const BuyerPreferences& prefs,
                           const PremiumPrinciple& pp, const LossModel& m,
                           const SolverConfig& scfg, const QuadratureConfig& qcfg);

// sup over the grid of |slope|*1{L < -band} + |1-slope|*1{L > band}
double verify_optimality(const Indemnity& I, const BuyerPreferences& prefs,
                         const PremiumPrinciple& pp, const LossModel& m,
                         const SolverConfig& scfg, const QuadratureConfig& qcfg);

// Full insurance is optimal iff tk <= tb on [0, S_X(0)].
bool solve_full_check(const PremiumPrinciple& pp, const Distortion& b, const LossModel& m);

SolveReport solve_general(const BuyerPreferences& prefs, const PremiumPrinciple& pp,
                          const LossModel& m, const SolverConfig& scfg,
                          const QuadratureConfig& qcfg);

// Pure deductible when tk precedes tb in hazard-ratio order: d* is the first
// point where the normalized marginal gain turns non-negative.
SolveReport solve_deductible(const BuyerPreferences& prefs, const PremiumPrinciple& pp,
                             const LossModel& m, const SolverConfig& scfg,
                             const QuadratureConfig& qcfg);

// Linear utility with tb preceding tk in hazard-ratio order: coverage up to
// the point where tb(S_X) - tk(S_X) changes sign.
SolveReport solve_max_limit(const PremiumPrinciple& pp, const Distortion& b, const LossModel& m,
                            const SolverConfig& scfg, const QuadratureConfig& qcfg,
                            const BuyerPreferences* prefs = nullptr);

// Deductible with (possibly infinite) maximum limit from the marginal-rate
// construction, for likelihood-ratio ordered distortions.
SolveReport solve_diml(const BuyerPreferences& prefs, const PremiumPrinciple& pp,
                       const LossModel& m, const SolverConfig& scfg, const QuadratureConfig& qcfg);

// Closed-form families: CARA utility, zero-inflated exponential loss.
SolveReport solve_power_exponential(double gamma, double lambda, double c, double theta, double q,
                                    double w, std::optional<double> a_buyer,
                                    const SolverConfig& scfg, const QuadratureConfig& qcfg);
SolveReport solve_dualpower_exponential(double gamma, double lambda, double c, double theta,
                                        double q, double w, const SolverConfig& scfg,
                                        const QuadratureConfig& qcfg);
SolveReport solve_gini_exponential(double gamma, double lambda, double alpha, double theta,
                                   double q, double w, const SolverConfig& scfg,
                                   const QuadratureConfig& qcfg);

// Optimal contract is unique iff theta != 0 or ess inf X = 0 (strictly
// concave utility).
UniquenessResult uniqueness_check(const PremiumPrinciple& pp, const LossModel& m);

// Rebuilds the interior section of a generic deductible-with-limit contract
// from its stored constants (JSON round trips).
Indemnity rebuild_interior_contract(const BuyerPreferences& prefs, const PremiumPrinciple& pp,
                                    const LossModel& m, double d, double m_limit, double pi,
                                    double upsilon);

// Root equations for the closed-form deductibles (exposed for tests).
double power_exponential_G(double d, double gamma, double lambda, double c, double theta, double q);
double dualpower_exponential_G(double d, double gamma, double lambda, double c, double theta,
                               double q);
double gini_exponential_G(double d, double gamma, double lambda, double alpha, double theta,
                          double q);

} // namespace riskmetric

#endif
