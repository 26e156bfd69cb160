#include "doctest.h"

#include <cmath>

#include "riskmetric/solver.hpp"

using namespace riskmetric;

namespace {
const QuadratureConfig qc;
const SolverConfig sc;

BuyerPreferences cara_prefs(double gamma, double w) {
    return BuyerPreferences{Utility::cara(gamma), Distortion::identity(), w};
}
} // namespace

TEST_CASE("marginal gain under full cover reduces to the distortion gap") {
    BuyerPreferences prefs{Utility::cara(1.0), Distortion::convex_dual_power(0.5), 3.0};
    PremiumPrinciple pp{0.2, Distortion::zero()};
    LossModel m = LossModel::zero_inflated_exponential(0.9, 1.5);
    MarginalFunction mf = compute_L(Indemnity::full(), prefs, pp, m, sc, qc);
    Distortion tb = prefs.tb();
    Distortion tk = pp.tk();
    REQUIRE(mf.t.size() > 10);
    for (size_t i = 0; i < mf.t.size(); i += 7) {
        double S = m.survival(mf.t[i]);
        CHECK(mf.L[i] == doctest::Approx(tb(S) - tk(S)).epsilon(5e-7).scale(1.0));
    }
}

TEST_CASE("marginal gain of no cover matches its exponential closed form") {
    // loss rate 2, premium weight (1+theta) p^c with c = 1/2, unit curvature
    double lambda = 2.0, cpow = 0.5, gamma = 1.0, theta = 0.1, q = 0.9, w = 3.0;
    BuyerPreferences prefs = cara_prefs(gamma, w);
    PremiumPrinciple pp = canonical_decompose(Distortion::power(theta, cpow), Distortion::zero());
    LossModel m = LossModel::zero_inflated_exponential(q, lambda);
    MarginalFunction mf = compute_L(Indemnity::zero(), prefs, pp, m, sc, qc);
    auto closed = [&](double t) {
        return q * lambda * std::exp(-(lambda - gamma) * t) / (lambda - (1.0 - q) * gamma) -
               (1.0 + theta) * std::pow(q, cpow) * std::exp(-lambda * cpow * t);
    };
    CHECK(closed(0.0) == doctest::Approx(-0.0961832068).epsilon(1e-7));
    CHECK(closed(0.5) == doctest::Approx(-0.0583380639).epsilon(1e-7));
    CHECK(closed(1.5) == doctest::Approx(-0.0214613743).epsilon(1e-7));
    CHECK(closed(3.0) == doctest::Approx(-0.0047886799).epsilon(1e-7));
    for (size_t i = 0; i < mf.t.size(); ++i) {
        if (mf.t[i] > 3.5) break;
        CHECK(mf.L[i] == doctest::Approx(closed(mf.t[i])).epsilon(1e-6).scale(0.01));
    }
    // everywhere negative marginal gain: no cover is optimal, full cover is
    // maximally wrong
    CHECK(verify_optimality(Indemnity::zero(), prefs, pp, m, sc, qc) < 1e-9);
    CHECK(verify_optimality(Indemnity::full(), prefs, pp, m, sc, qc) ==
          doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("full cover is optimal exactly when the premium weight is dominated") {
    LossModel m = LossModel::zero_inflated_exponential(1.0, 1.0);
    PremiumPrinciple cheap{-0.1, Distortion::zero()};
    CHECK(solve_full_check(cheap, Distortion::identity(), m));
    PremiumPrinciple loaded{0.1, Distortion::zero()};
    CHECK(!solve_full_check(loaded, Distortion::identity(), m));

    // an atom at zero restricts the comparison to the loss's actual range
    LossModel half = LossModel::zero_inflated_exponential(0.5, 1.0);
    PremiumPrinciple pp{0.2, Distortion::zero()};
    CHECK(solve_full_check(pp, Distortion::convex_dual_power(0.5), half));
    CHECK(!solve_full_check(pp, Distortion::convex_dual_power(0.5), m));

    // and the dominated case passes verification at full cover
    BuyerPreferences prefs = cara_prefs(1.0, 3.0);
    CHECK(verify_optimality(Indemnity::full(), prefs, cheap, m, sc, qc) < 1e-9);
}

TEST_CASE("deductible route reproduces the threshold equation root") {
    BuyerPreferences prefs = cara_prefs(1.0, 10.0);
    PremiumPrinciple pp{0.2, Distortion::zero()};
    LossModel m = LossModel::zero_inflated_exponential(1.0, 1.0);
    SolveReport rep = solve_deductible(prefs, pp, m, sc, qc);
    CHECK(rep.regime == Regime::Deductible);
    CHECK(rep.d_star == doctest::Approx(0.7310493313260566).epsilon(1e-8));
    CHECK(rep.premium == doctest::Approx(0.5776842877342831).epsilon(1e-6));
    CHECK(rep.residual < 1e-6);
    CHECK(rep.unique);
}

TEST_CASE("deductible route with a curved buyer weight shifts the threshold") {
    BuyerPreferences prefs{Utility::cara(1.0), Distortion::convex_dual_power(0.5), 3.0};
    PremiumPrinciple pp{0.2, Distortion::zero()};
    LossModel m = LossModel::zero_inflated_exponential(1.0, 1.0);
    SolveReport rep = solve_deductible(prefs, pp, m, sc, qc);
    CHECK(rep.regime == Regime::Deductible);
    CHECK(rep.d_star == doctest::Approx(0.3203460115484961).epsilon(1e-7));
    CHECK(rep.residual < 1e-6);
}

TEST_CASE("deductible route refuses a mis-ordered premium weight") {
    BuyerPreferences prefs = cara_prefs(1.0, 3.0);
    // tk/tb decreasing: deviation-dominated pricing
    PremiumPrinciple pp{0.05, Distortion::gini(0.8)};
    LossModel m = LossModel::zero_inflated_exponential(1.0, 1.0);
    CHECK_THROWS_AS(solve_deductible(prefs, pp, m, sc, qc), PreconditionError);
}

TEST_CASE("maximum-limit route finds the crossing or degenerates to no cover") {
    LossModel m = LossModel::zero_inflated_exponential(1.0, 1.0);
    PremiumPrinciple pp{0.0, Distortion::mean_median(0.3)};
    SolveReport rep = solve_max_limit(pp, Distortion::identity(), m, sc, qc);
    CHECK(rep.regime == Regime::Zero);
    CHECK(rep.m_limit == doctest::Approx(0.0));
    CHECK(rep.residual < 1e-9);

    // strictly concave utility is outside this route's hypotheses
    BuyerPreferences curved = cara_prefs(1.0, 3.0);
    CHECK_THROWS_AS(solve_max_limit(pp, Distortion::identity(), m, sc, qc, &curved),
                    PreconditionError);
    PremiumPrinciple neg{-0.2, Distortion::zero()};
    CHECK_THROWS_AS(solve_max_limit(neg, Distortion::identity(), m, sc, qc), PreconditionError);
}

TEST_CASE("general solver recovers an interior maximum limit under cheap pricing") {
    // linear utility, negative loading against a gini deviation: marginal
    // gain is positive up to S(t) = 2/3 and negative beyond
    BuyerPreferences prefs{Utility::linear(), Distortion::identity(), 0.0};
    PremiumPrinciple pp = canonical_decompose(
        Distortion::linear(0.9).plus(Distortion::gini(0.3)), Distortion::zero());
    CHECK(pp.theta == doctest::Approx(-0.1).epsilon(1e-12));
    LossModel m = LossModel::zero_inflated_exponential(1.0, 1.0);
    SolveReport rep = solve_general(prefs, pp, m, sc, qc);
    CHECK(rep.regime == Regime::MaxLimit);
    CHECK(rep.m_limit == doctest::Approx(std::log(1.5)).epsilon(1e-6));
    CHECK(rep.residual < 1e-6);
    CHECK(!rep.unique); // linear utility leaves the argmax criterion silent
}

TEST_CASE("interior construction matches the closed-form threshold") {
    // dual-power premium weight over an atom-at-zero exponential
    BuyerPreferences prefs = cara_prefs(2.0, 3.0);
    PremiumPrinciple pp =
        canonical_decompose(Distortion::dual_power(0.1, 1.5), Distortion::zero());
    LossModel m = LossModel::zero_inflated_exponential(0.5, 1.0);
    SolveReport rep = solve_diml(prefs, pp, m, sc, qc);
    CHECK(rep.converged);
    CHECK(rep.d_star == doctest::Approx(0.3432472084233895).epsilon(2e-6));
    CHECK(rep.residual < 1e-4);
    CHECK(std::isinf(rep.m_limit));
}

TEST_CASE("uniqueness criterion separates loading and support gaps") {
    LossModel gap = LossModel::discrete({2.0, 3.0}, {0.5, 0.5});
    LossModel at_zero = LossModel::zero_inflated_exponential(0.5, 1.0);
    PremiumPrinciple loaded{0.1, Distortion::zero()};
    PremiumPrinciple fair{0.0, Distortion::gini(0.5)};
    CHECK(uniqueness_check(loaded, gap).unique);
    CHECK(uniqueness_check(fair, at_zero).unique);
    CHECK(!uniqueness_check(fair, gap).unique);
}
