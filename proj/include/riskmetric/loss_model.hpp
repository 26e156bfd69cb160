#ifndef RISKMETRIC_LOSS_MODEL_HPP
#define RISKMETRIC_LOSS_MODEL_HPP

#include <random>
#include <vector>

#include "riskmetric/errors.hpp"

namespace riskmetric {

enum class LossKind { ZeroInflatedExponential, Discrete, TruncatedDensity };

// Distribution of the non-negative loss X. Survival is right-continuous;
// quantile follows the infimum convention S^{-1}(p) = inf{t : S(t) <= p}.
class LossModel {
  public:
    struct Atom {
        double x;
        double p;
    };

    // point mass 1-q at 0, density q*lambda*e^(-lambda x) on x > 0
    static LossModel zero_inflated_exponential(double q, double lambda);
    static LossModel discrete(std::vector<double> xs, std::vector<double> ps);
    // point mass 1-q at 0 plus a piecewise-linear density on (0, M]; the
    // table is rescaled so the continuous part carries mass q
    static LossModel truncated_density(double q, std::vector<double> xs, std::vector<double> fs);

    LossKind kind() const { return kind_; }
    double survival(double x) const; // P(X > x)
    double cdf(double x) const { return 1.0 - survival(x); }
    double quantile(double p) const;
    double mean() const;
    double ess_inf() const;
    double support_bound() const; // finite M or +inf
    bool has_density() const;
    double density(double x) const; // continuous part only
    double mass_at_zero() const;
    const std::vector<Atom>& atoms() const { return atoms_; }
    double sample(std::mt19937_64& rng) const;

    // model parameters (ZeroInflatedExponential)
    double q() const { return q_; }
    double lambda() const { return lambda_; }

  private:
    LossModel() = default;
    LossKind kind_ = LossKind::ZeroInflatedExponential;
    double q_ = 1.0, lambda_ = 1.0;
    std::vector<Atom> atoms_;          // all point masses, sorted by x
    std::vector<double> dx_, dp_;      // discrete support and probabilities
    std::vector<double> tx_, tf_;      // density table (truncated kind)
    std::vector<double> tcum_;         // cumulative continuous mass up to tx_[i]
    double mean_ = 0.0;
};

} // namespace riskmetric

#endif
