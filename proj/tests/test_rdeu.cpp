#include "doctest.h"

#include <cmath>

#include "riskmetric/rdeu.hpp"

using namespace riskmetric;

namespace {
const QuadratureConfig qc;
}

TEST_CASE("utility closed forms and inverses round-trip") {
    Utility cara = Utility::cara(2.0);
    CHECK(cara.u(0.0) == doctest::Approx(0.0));
    CHECK(cara.uprime(0.5) == doctest::Approx(std::exp(-1.0)).epsilon(1e-14));
    CHECK(cara.usecond(0.5) == doctest::Approx(-2.0 * std::exp(-1.0)).epsilon(1e-14));
    for (double x : {-1.0, 0.0, 0.7, 3.0}) {
        CHECK(cara.inv_uprime(cara.uprime(x)) == doctest::Approx(x).epsilon(1e-12));
        CHECK(cara.inv_u(cara.u(x)) == doctest::Approx(x).epsilon(1e-12));
    }

    Utility crra = Utility::crra(2.0);
    CHECK(crra.uprime(2.0) == doctest::Approx(0.25).epsilon(1e-14));
    CHECK(crra.inv_uprime(0.25) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK_THROWS_AS(crra.u(-1.0), DomainError);
    CHECK(crra.domain_lower() == doctest::Approx(0.0));

    Utility lin = Utility::linear();
    CHECK(lin.u(3.0) == doctest::Approx(3.0));
    CHECK(lin.uprime(100.0) == doctest::Approx(1.0));
    CHECK(lin.is_linear());
    CHECK(!lin.strictly_concave());

    Utility hara = Utility::hara(0.5, 1.0);
    for (double x : {0.0, 1.0, 4.0}) {
        double h = 1e-6;
        double fd = (hara.u(x + h) - hara.u(x - h)) / (2 * h);
        CHECK(hara.uprime(x) == doctest::Approx(fd).epsilon(1e-7));
    }
    CHECK(hara.inv_uprime(hara.uprime(2.0)) == doctest::Approx(2.0).epsilon(1e-10));
}

TEST_CASE("full coverage pays the certain premium-adjusted wealth") {
    BuyerPreferences prefs{Utility::cara(1.5), Distortion::convex_dual_power(0.6), 4.0};
    LossModel m = LossModel::zero_inflated_exponential(0.8, 1.0);
    double pi = 1.1;
    RdeuResult r = rdeu_value_checked(prefs, Indemnity::full(), pi, m, qc);
    CHECK(!r.divergent);
    CHECK(r.value == doctest::Approx(prefs.utility.u(4.0 - pi)).epsilon(1e-10));
}

TEST_CASE("no coverage under an exponential loss has a closed-form value") {
    // E[u(w - X)] with u exponential at unit rate, X exponential at rate 2:
    // 1 - e^{-w} E[e^X] = 1 - 2 e^{-5}
    BuyerPreferences prefs{Utility::cara(1.0), Distortion::identity(), 5.0};
    LossModel m = LossModel::zero_inflated_exponential(1.0, 2.0);
    QuadratureConfig tight;
    tight.abs_tol = 1e-13;
    tight.rel_tol = 1e-12;
    RdeuResult r = rdeu_value_checked(prefs, Indemnity::zero(), 0.0, m, tight);
    CHECK(!r.divergent);
    CHECK(r.value == doctest::Approx(0.986524106001829).epsilon(1e-11));
    CHECK(rdeu_value(prefs, Indemnity::zero(), 0.0, m, tight) == doctest::Approx(r.value));
}

TEST_CASE("a heavier loss tail than the utility curvature diverges") {
    BuyerPreferences prefs{Utility::cara(2.0), Distortion::identity(), 5.0};
    LossModel m = LossModel::zero_inflated_exponential(1.0, 1.0);
    RdeuResult r = rdeu_value_checked(prefs, Indemnity::zero(), 0.0, m, qc);
    CHECK(r.divergent);
}

TEST_CASE("tail-weighted marginal utility reduces to the dual distortion under full cover") {
    BuyerPreferences prefs{Utility::cara(1.0), Distortion::convex_dual_power(0.5), 3.0};
    LossModel m = LossModel::zero_inflated_exponential(0.9, 1.0);
    double pi = 0.8;
    Distortion tb = prefs.tb();
    double up = prefs.utility.uprime(3.0 - pi);
    for (double t : {0.3, 1.0, 2.5}) {
        double got = marginal_weight(prefs, Indemnity::full(), pi, m, t, qc);
        CHECK(got == doctest::Approx(up * tb(m.survival(t))).epsilon(1e-8));
    }
    // t = -1 includes the atom at zero: the full buyer mass
    double total = marginal_weight(prefs, Indemnity::full(), pi, m, -1.0, qc);
    CHECK(total == doctest::Approx(up).epsilon(1e-8));
}

TEST_CASE("atoms sitting exactly at the threshold are excluded") {
    BuyerPreferences prefs{Utility::cara(1.0), Distortion::identity(), 5.0};
    LossModel m = LossModel::discrete({0.0, 1.0, 2.0}, {0.2, 0.5, 0.3});
    Indemnity I = Indemnity::zero();
    double up1 = prefs.utility.uprime(4.0);
    double up2 = prefs.utility.uprime(3.0);
    double at_half = marginal_weight(prefs, I, 0.0, m, 0.5, qc);
    CHECK(at_half == doctest::Approx(0.5 * up1 + 0.3 * up2).epsilon(1e-12));
    double at_one = marginal_weight(prefs, I, 0.0, m, 1.0, qc);
    CHECK(at_one == doctest::Approx(0.3 * up2).epsilon(1e-12));
}

TEST_CASE("preference validation polices the buyer distortion") {
    BuyerPreferences ok{Utility::cara(1.0), Distortion::convex_dual_power(0.7), 2.0};
    ok.validate();
    BuyerPreferences bad{Utility::cara(1.0), Distortion::power(0.0, 0.5), 2.0};
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad.validate(true);
}
