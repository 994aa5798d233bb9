#include <cmath>

#include <gtest/gtest.h>

#include "qsk/annealed.hpp"
#include "qsk/hilbert.hpp"

using namespace qsk;

TEST(EstimateFN, WithinSandwichBoundsAndWorkerInvariant) {
    for (auto [n, lam, bb] : {std::tuple{3, 0.1, 1.0}, std::tuple{5, 0.2, 0.5}}) {
        auto p = ModelParams::dimensionless(n, lam, bb);
        auto f1 = estimate_f_n(p, 40000, 17, 1), f3 = estimate_f_n(p, 40000, 17, 3);
        EXPECT_EQ(f1.value, f3.value);
        EXPECT_EQ(f1.std_err, f3.std_err);
        EXPECT_GE(f1.value, n * p_n_of(n, bb) * lam - 3 * f1.std_err);
        EXPECT_LE(f1.value, w_n_of(n, lam, bb).value + 3 * f1.std_err);
        EXPECT_GE(f1.ess, kMinEss);
    }
    EXPECT_EQ(estimate_f_n(ModelParams::dimensionless(4, 0.0, 1.0), 10, 1).value, 0.0);
    EXPECT_THROW(estimate_f_n(ModelParams::dimensionless(4, 0.1, 1.0), 1, 1), DomainError);
}

TEST(EstimateFN, ZeroFieldGivesUnitPN) {
    auto pn = sample_p_n(4, 0.0, 100, 3);
    for (double v : pn) EXPECT_EQ(v, 1.0);
}

TEST(AnnealedFreeEnergy, TwoSpinsMatchExactFormula) {
    auto p = ModelParams::dimensionless(2, 0.15, 0.7);
    auto est = annealed_free_energy(p, 100000, 5);
    EXPECT_NEAR(est.value, f2_annealed_exact(0.15, 0.7).value, 3 * est.std_err);
}

TEST(ExpectedLogCosh, ExtendedPrecisionValues) {
    EXPECT_NEAR(expected_log_cosh(4.0).value, 2.57901131124935657660, 1e-12);
    EXPECT_NEAR(expected_log_cosh(0.5).value, 0.112912002787494475111, 1e-14);
    EXPECT_EQ(expected_log_cosh(0.0).value, 0.0);
}

TEST(KOfLambda, ExtendedPrecisionValuesAndZeroRegion) {
    auto k1 = k_of_lambda(1.0);
    EXPECT_NEAR(k1.k, 0.108361290290549427681, 1e-11);
    EXPECT_NEAR(k1.q, 0.530368392050794633, 1e-6);
    EXPECT_NEAR(k_of_lambda(0.5).k, 0.00996150649337301874, 1e-11);
    for (double lam : {0.01, 0.1, 0.25}) EXPECT_EQ(k_of_lambda(lam).k, 0.0);
    EXPECT_GT(k_of_lambda(0.251).k, 0.0);
}

TEST(KOfLambda, DerivativeIsSquaredOverlap) {
    for (double lam : {0.5, 1.0, 2.0}) {
        double h = 1e-4;
        double d = (k_of_lambda(lam + h).k - k_of_lambda(lam - h).k) / (2 * h);
        double q = sk_equation_solve(lam);
        EXPECT_NEAR(d, q * q, 1e-4);
    }
}

TEST(SKEquation, RootAgreesWithMaximizer) {
    EXPECT_NEAR(sk_equation_solve(1.0), 0.530368392050794633, 1e-12);
    EXPECT_NEAR(sk_equation_solve(0.5), 0.308982384884272775, 1e-12);
    EXPECT_NEAR(sk_equation_solve(0.5), k_of_lambda(0.5).q, 1e-6);
    EXPECT_EQ(sk_equation_solve(0.2), 0.0);
    double q = sk_equation_solve(0.8), a = std::sqrt(3.2 * q);
    double rhs = normal_expectation_even([a](double g) { return std::pow(std::tanh(a * g), 2); }).value;
    EXPECT_NEAR(q, rhs, 1e-13);
}

TEST(DeltaBounds, OrderedAndZeroFieldEdge) {
    for (double lam : {0.3, 1.0, 3.0})
        for (double bb : {0.0, 0.5, 2.0}) {
            auto d = delta_infinity_bounds(lam, bb);
            EXPECT_LE(d.lower, d.upper + 1e-12);
            EXPECT_GE(d.lower, 0.0);
            if (bb == 0.0) {
                EXPECT_EQ(d.upper, lam);
                EXPECT_GT(d.lower, 0.0);
            }
        }
}

TEST(Region, TwoByTwoGridFollowsRules) {
    RegionGrid g;
    g.inv_beta_v_min = 0.5;
    g.inv_beta_v_max = 1.5;
    g.n_inv_beta_v = 2;
    g.b_over_v_min = 0.0;
    g.b_over_v_max = 1.0;
    g.n_b_over_v = 2;
    auto pts = region_scan(g);
    ASSERT_EQ(pts.size(), 4u);
    for (const auto& p : pts) {
        if (p.inv_beta_v > 1) EXPECT_EQ(p.classification, RegionClass::zero);
        else EXPECT_NE(p.classification, RegionClass::zero);
    }
    EXPECT_EQ(pts[0].classification, RegionClass::positive);  // b = 0, beta v = 2
    EXPECT_STREQ(to_string(RegionClass::unknown), "unknown");
    g.n_b_over_v = 1;
    EXPECT_THROW(region_scan(g), DomainError);
}

TEST(Region, WorkerInvariant) {
    RegionGrid g;
    g.n_inv_beta_v = 12;
    g.n_b_over_v = 7;
    auto a = region_scan(g, 1), b = region_scan(g, 3);
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].delta_lower, b[i].delta_lower);
        EXPECT_EQ(a[i].classification, b[i].classification);
    }
}

TEST(Region, AdvisoryCurveShape) {
    auto c = advisory_curve(11);
    ASSERT_EQ(c.size(), 11u);
    EXPECT_EQ(c.front().first, 0.0);
    EXPECT_EQ(c.back().first, 1.0);
    EXPECT_NEAR(c.back().second, 0.0, 1e-15);
    for (std::size_t i = 1; i < c.size(); ++i) EXPECT_LE(c[i].second, c[i - 1].second);
}
