#include "doctest.h"

#include <cmath>
#include <random>

#include "riskmetric/loss_model.hpp"
#include "riskmetric/quadrature.hpp"

using namespace riskmetric;

TEST_CASE("zero-inflated exponential survival and moments") {
    LossModel m = LossModel::zero_inflated_exponential(0.5, 2.0);
    CHECK(m.survival(0.0) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(m.survival(-1.0) == doctest::Approx(1.0));
    CHECK(m.survival(1.0) == doctest::Approx(0.06766764161830635).epsilon(1e-14));
    CHECK(m.mean() == doctest::Approx(0.25).epsilon(1e-14));
    CHECK(m.mass_at_zero() == doctest::Approx(0.5));
    CHECK(m.ess_inf() == 0.0);
    CHECK(std::isinf(m.support_bound()));
    CHECK(m.has_density());
    CHECK(m.density(1.0) == doctest::Approx(0.5 * 2.0 * std::exp(-2.0)).epsilon(1e-14));

    CHECK_THROWS_AS(LossModel::zero_inflated_exponential(1.5, 1.0), ConfigError);
    CHECK_THROWS_AS(LossModel::zero_inflated_exponential(0.5, -1.0), ConfigError);
}

TEST_CASE("quantile is the generalized inverse of survival") {
    LossModel m = LossModel::zero_inflated_exponential(0.7, 1.3);
    for (double p : {0.9, 0.7, 0.5, 0.2, 0.05, 1e-4}) {
        double t = m.quantile(p);
        // infimum convention: S(t) <= p and S(t - eps) > p for t > 0
        CHECK(m.survival(t) <= p + 1e-12);
        if (t > 1e-9) CHECK(m.survival(t * (1 - 1e-9) - 1e-12) >= p - 1e-9);
    }
    CHECK(m.quantile(0.75) == 0.0); // inside the atom at zero
}

TEST_CASE("mean equals the integral of the survival function") {
    for (auto m : {LossModel::zero_inflated_exponential(0.9, 1.0),
                   LossModel::zero_inflated_exponential(0.4, 2.5)}) {
        QuadratureConfig qc;
        double tail = m.quantile(1e-14);
        double got = integrate([&](double t) { return m.survival(t); }, 0.0, tail, qc);
        CHECK(got == doctest::Approx(m.mean()).epsilon(1e-8));
    }
}

TEST_CASE("discrete models carry exact atoms") {
    LossModel m = LossModel::discrete({0.0, 2.0, 3.0}, {0.25, 0.5, 0.25});
    CHECK(m.survival(0.0) == doctest::Approx(0.75));
    CHECK(m.survival(1.9) == doctest::Approx(0.75));
    CHECK(m.survival(2.0) == doctest::Approx(0.25));
    CHECK(m.survival(3.0) == doctest::Approx(0.0));
    CHECK(m.mean() == doctest::Approx(1.75));
    CHECK(m.ess_inf() == 0.0);
    CHECK(m.support_bound() == doctest::Approx(3.0));
    CHECK(!m.has_density());
    CHECK(m.atoms().size() == 3);
    CHECK(m.quantile(0.3) == doctest::Approx(2.0));
    CHECK(m.quantile(0.25) == doctest::Approx(2.0)); // infimum convention at the jump
    CHECK(m.quantile(0.2) == doctest::Approx(3.0));

    CHECK_THROWS_AS(LossModel::discrete({0.0, 1.0}, {0.5, 0.4}), ConfigError);
    CHECK_THROWS_AS(LossModel::discrete({-1.0, 1.0}, {0.5, 0.5}), ConfigError);
}

TEST_CASE("truncated density tables renormalize and integrate") {
    LossModel m = LossModel::truncated_density(0.8, {0.0, 1.0, 2.0}, {1.0, 1.0, 1.0});
    CHECK(m.mass_at_zero() == doctest::Approx(0.2).epsilon(1e-12));
    CHECK(m.survival(0.0) == doctest::Approx(0.8).epsilon(1e-12));
    CHECK(m.survival(1.0) == doctest::Approx(0.4).epsilon(1e-12));
    CHECK(m.survival(2.0) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(m.support_bound() == doctest::Approx(2.0));
    CHECK(m.density(0.5) == doctest::Approx(0.4).epsilon(1e-12));
    CHECK(m.mean() == doctest::Approx(0.8 * 1.0).epsilon(1e-12));
    CHECK(m.quantile(0.4) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("sampling matches the distribution in law") {
    LossModel m = LossModel::zero_inflated_exponential(0.6, 1.5);
    std::mt19937_64 rng(42);
    const int n = 200000;
    double sum = 0.0;
    int zeros = 0;
    for (int i = 0; i < n; ++i) {
        double x = m.sample(rng);
        sum += x;
        if (x == 0.0) ++zeros;
    }
    double mean_hat = sum / n;
    // loose four-sigma bands
    CHECK(std::abs(mean_hat - m.mean()) < 4.0 * 0.7 / std::sqrt(double(n)));
    CHECK(std::abs(zeros / double(n) - 0.4) < 4.0 * 0.5 / std::sqrt(double(n)));
}
