#include "doctest.h"

#include <cmath>

#include "riskmetric/distortion.hpp"

using namespace riskmetric;

TEST_CASE("catalog shapes evaluate to their closed forms") {
    Distortion g = Distortion::power(0.1, 0.5);
    CHECK(g(0.25) == doctest::Approx(1.1 * 0.5).epsilon(1e-14));
    CHECK(g(0.0) == 0.0);
    CHECK(g.at1() == doctest::Approx(1.1));

    Distortion dp = Distortion::dual_power(0.0, 2.0);
    CHECK(dp(0.5) == doctest::Approx(0.75).epsilon(1e-14));
    CHECK(dp.deriv(0.5) == doctest::Approx(1.0).epsilon(1e-12));

    Distortion gi = Distortion::gini(0.4);
    CHECK(gi(0.5) == doctest::Approx(0.1).epsilon(1e-14));
    CHECK(gi(1.0) == doctest::Approx(0.0));

    Distortion mm = Distortion::mean_median(1.0);
    CHECK(mm(0.3) == doctest::Approx(0.3));
    CHECK(mm(0.7) == doctest::Approx(0.3));
    CHECK(mm.kink_points().size() == 1);
    CHECK(mm.kink_points()[0] == doctest::Approx(0.5));

    CHECK_THROWS_AS(gi(1.5), DomainError);
    CHECK_THROWS_AS(gi(-0.1), DomainError);
}

TEST_CASE("derivatives match finite differences on smooth shapes") {
    for (const Distortion& j :
         {Distortion::power(0.2, 0.7), Distortion::dual_power(0.1, 3.0), Distortion::gini(0.8),
          Distortion::linear_plus_gini(0.05, 0.4)}) {
        for (double p : {0.1, 0.3, 0.6, 0.9}) {
            double h = 1e-6;
            double fd = (j(p + h) - j(p - h)) / (2 * h);
            CHECK(j.deriv(p) == doctest::Approx(fd).epsilon(1e-6));
            double fd2 = (j(p + h) - 2 * j(p) + j(p - h)) / (h * h);
            CHECK(j.deriv2(p) == doctest::Approx(fd2).epsilon(1e-3));
        }
    }
}

TEST_CASE("dual is an exact term-wise involution") {
    Distortion b = Distortion::convex_dual_power(0.5);
    Distortion tb = b.dual();
    for (double p : {0.0, 0.1, 0.37, 0.5, 0.9, 1.0})
        CHECK(tb(p) == doctest::Approx(1.0 - b(1.0 - p)).epsilon(1e-15));
    Distortion back = tb.dual();
    for (double p : {0.2, 0.8}) CHECK(back(p) == doctest::Approx(b(p)).epsilon(1e-15));

    // dual of the concave power shape is handled exactly too
    Distortion g = Distortion::power(0.0, 0.5);
    Distortion gd = g.dual();
    for (double p : {0.1, 0.5, 0.95})
        CHECK(gd(p) == doctest::Approx(1.0 - std::sqrt(1.0 - p)).epsilon(1e-14));
}

TEST_CASE("canonical decomposition recovers theta and a vanishing deviation part") {
    Distortion g = Distortion::power(0.1, 0.5);
    Distortion h = Distortion::zero();
    PremiumPrinciple pp = canonical_decompose(g, h);
    CHECK(pp.theta == doctest::Approx(0.1).epsilon(1e-14));
    CHECK(pp.k(0.0) == doctest::Approx(0.0));
    CHECK(pp.k(1.0) == doctest::Approx(0.0).epsilon(1e-14));
    // recomposing gives back g + h
    Distortion tk = pp.tk();
    for (double p : {0.05, 0.3, 0.77, 1.0})
        CHECK(tk(p) == doctest::Approx(g(p) + h(p)).epsilon(1e-13));
}

TEST_CASE("decomposing a symmetric deviation pair keeps the loading at zero") {
    // h(p) = p - p^2 has h(1) = 0, so all the loading comes from g
    Distortion g = Distortion::identity();
    Distortion h = Distortion::gini(1.0);
    PremiumPrinciple pp = canonical_decompose(g, h);
    CHECK(pp.theta == doctest::Approx(0.0));
    for (double p : {0.2, 0.5, 0.8})
        CHECK(pp.k(p) == doctest::Approx(p - p * p).epsilon(1e-13));
    pp.validate();
}

TEST_CASE("principle validation rejects a non-concave deviation part") {
    PremiumPrinciple pp;
    pp.theta = 0.1;
    pp.k = Distortion::gini(-0.5); // convex bump
    CHECK_THROWS_AS(pp.validate(), ConfigError);
}

TEST_CASE("buyer-side validation enforces convexity unless overridden") {
    BuyerDual bd{Distortion::convex_dual_power(0.5)};
    bd.validate(); // concave-dual shape comes from a convex b
    BuyerDual bad{Distortion::power(0.0, 0.5)};
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad.validate(true); // explicit override allows it
}

TEST_CASE("tabulated distortions interpolate and differentiate") {
    Distortion t = Distortion::tabulated({0.0, 0.5, 1.0}, {0.0, 0.8, 1.0});
    CHECK(t(0.25) == doctest::Approx(0.4));
    CHECK(t(0.75) == doctest::Approx(0.9));
    CHECK(t.deriv(0.25) == doctest::Approx(1.6));
    CHECK(t.deriv(0.75) == doctest::Approx(0.4));
    CHECK(t.kink_points().size() == 1);
    CHECK_THROWS_AS(Distortion::tabulated({0.0, 1.0}, {0.0}), ConfigError);
    CHECK_THROWS_AS(Distortion::tabulated({0.1, 1.0}, {0.0, 1.0}), ConfigError);
}

TEST_CASE("hazard-ratio order: scaled copies are always comparable") {
    Distortion j1 = Distortion::gini(0.3);
    Distortion j2 = Distortion::gini(0.6);
    OrderResult r = check_order(j1, j2, StochOrder::HR, 2000);
    CHECK(r.holds); // constant ratio
    OrderResult r2 = check_order(j2, j1, StochOrder::HR, 2000);
    CHECK(r2.holds);
}

TEST_CASE("first-order check is a pointwise comparison with a witness") {
    Distortion j1 = Distortion::linear(0.9);
    Distortion j2 = Distortion::identity();
    CHECK(check_order(j1, j2, StochOrder::FSD, 1000).holds);
    OrderResult r = check_order(j2, j1, StochOrder::FSD, 1000);
    CHECK(!r.holds);
    CHECK(r.fails_at.has_value());
}

TEST_CASE("likelihood-ratio order implies hazard-ratio order on the catalog") {
    // tk proportional to p against the concave dual of a convex power
    Distortion tk = Distortion::linear(1.2);
    Distortion tb = Distortion::convex_dual_power(0.5).dual();
    OrderResult lr = check_order(tk, tb, StochOrder::LR, 2000);
    OrderResult hr = check_order(tk, tb, StochOrder::HR, 2000);
    CHECK(lr.holds);
    CHECK(hr.holds);

    // and hazard-ratio order plus endpoint domination implies first-order
    if (tk.at1() <= tb.at1())
        CHECK(check_order(tk, tb, StochOrder::FSD, 2000).holds);
}

TEST_CASE("hazard-ratio comparison of loading against a gini deviation") {
    // tk(p) = 1.05 p + 0.4 (p - p^2) over identity: tk/p = 1.45 - 0.4 p
    // decreases, so the identity precedes tk but not conversely
    Distortion tk = Distortion::linear(1.05).plus(Distortion::gini(0.4));
    Distortion tb = Distortion::identity();
    CHECK(check_order(tb, tk, StochOrder::HR, 2000).holds);
    CHECK(check_order(tk, tb, StochOrder::HR, 2000).holds == false);
}

TEST_CASE("order checks on a flat pair raise an indeterminate-domain error") {
    Distortion z = Distortion::zero();
    CHECK_THROWS_AS(check_order(z, Distortion::zero(), StochOrder::HR, 100), DomainError);
}
