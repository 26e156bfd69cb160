#ifndef RISKMETRIC_RISKMETRICS_HPP
#define RISKMETRIC_RISKMETRICS_HPP

#include <cstdint>
#include <vector>

#include "riskmetric/contract.hpp"
#include "riskmetric/distortion.hpp"
#include "riskmetric/loss_model.hpp"
#include "riskmetric/quadrature.hpp"

namespace riskmetric {

// Signed Choquet integral of X under distortion j. X >= 0 reduces it to
// the integral of j(S_X) over [0, inf); atoms and distortion kinks become
// quadrature split points.
double rho(const Distortion& j, const LossModel& m, const QuadratureConfig& cfg);

// Exact signed Choquet integral of a finite discrete random variable whose
// values may be negative (needed for translation properties). Probabilities
// must sum to 1.
double rho_discrete(const Distortion& j, const std::vector<double>& values,
                    const std::vector<double>& probs);

// Distortion-deviation premium of I(X) through the quantile-side formula
// pi = integral of I'(t) * [(1+theta) S_X(t) + k(S_X(t))] dt.
double premium(const PremiumPrinciple& pp, const Indemnity& I, const LossModel& m,
               const QuadratureConfig& cfg);

struct PremiumSplit {
    double total = 0.0;
    double loading_part = 0.0;   // (1+theta) E[I(X)]
    double deviation_part = 0.0; // rho_k(I(X))
};
PremiumSplit premium_split(const PremiumPrinciple& pp, const Indemnity& I, const LossModel& m,
                           const QuadratureConfig& cfg);

// Exact premium of a discrete random variable Y (not necessarily of the
// form I(X)): (1+theta) E[Y] + rho_k(Y).
double premium_discrete(const PremiumPrinciple& pp, const std::vector<double>& values,
                        const std::vector<double>& probs);

struct GiniCheck {
    double rho_value = 0.0;
    double mc_value = 0.0;
    double z_score = 0.0;
};

// Quadrature value of the Gini deviation against the Monte Carlo estimate
// of half the mean absolute difference of an i.i.d. pair.
GiniCheck gini_cross_check(const LossModel& m, long n_samples, std::uint64_t seed,
                           const QuadratureConfig& cfg);

// Numeric minimum over y of E|Y - y| (golden section), the defining form of
// the mean-median deviation.
double mean_median_numeric(const LossModel& m, const QuadratureConfig& cfg);

} // namespace riskmetric

#endif
