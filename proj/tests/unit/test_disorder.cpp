#include <cmath>

#include <gtest/gtest.h>

#include "qsk/annealed.hpp"
#include "qsk/disorder.hpp"

using namespace qsk;

namespace {

DisorderStudyConfig config(int n, double lam, double bb, int samples, std::uint64_t seed, unsigned workers = 1) {
    auto p = ModelParams::dimensionless(n, lam, bb);
    return {p, samples, seed, 0.3 * p.v / std::sqrt(static_cast<double>(n)), workers};
}

}  // namespace

TEST(AnalyzeSample, MatchesDenseCorrelations) {
    auto p = ModelParams::dimensionless(4, 0.2, 0.8);
    auto s = DisorderSample::draw(4, 3, 1);
    auto r = analyze_sample(p, s);
    auto h = build_hamiltonian(p, s);
    EXPECT_NEAR(r.zz12, gibbs_zz(h, 1.0, 1, 2), 1e-12);
    double acc = 0;
    for (int i = 1; i <= 4; ++i)
        for (int j = i + 1; j <= 4; ++j) acc += std::pow(gibbs_zz(h, 1.0, i, j), 2);
    EXPECT_NEAR(r.zz_sq_pair_mean, acc / 6, 1e-12);
    EXPECT_NEAR(r.beta_f, -spectrum(h, 1.0).log_z / 4, 1e-12);
}

TEST(SecondMomentRatio, ConstantInputAndShiftInvariance) {
    auto r = second_moment_ratio(std::vector<double>(20, 3.7));
    EXPECT_NEAR(r.value, 1.0, 1e-15);
    EXPECT_NEAR(r.std_err, 0.0, 1e-15);
    std::vector<double> a{0.1, 0.5, -0.3, 0.9}, b = a;
    for (double& v : b) v += 500;
    EXPECT_NEAR(second_moment_ratio(a).value, second_moment_ratio(b).value, 1e-12);
    // direct: mean(Z^2)/mean(Z)^2
    double s1 = 0, s2 = 0;
    for (double v : a) {
        s1 += std::exp(v);
        s2 += std::exp(2 * v);
    }
    EXPECT_NEAR(second_moment_ratio(a).value, (s2 / 4) / std::pow(s1 / 4, 2), 1e-13);
}

TEST(RunStudy, TrivialDisorderFree) {
    auto cfg = config(4, 0.0, 1.0, 50, 1);
    cfg.delta = 0.1;
    auto r = run_study(cfg);
    EXPECT_NEAR(r.second_moment_ratio.value, 1.0, 1e-12);
    EXPECT_NEAR(r.order_parameter.value, 0.0, 1e-14);
    EXPECT_EQ(r.tail_frequency.value, 0.0);
    EXPECT_EQ(r.paley_zygmund.value, 1.0);
    EXPECT_NEAR(r.quenched_mean.value, -std::log(2 * std::cosh(1.0)), 1e-12);
}

TEST(RunStudy, BoundsAndWorkerInvariance) {
    auto a = run_study(config(5, 0.125, 1.0, 400, 9, 1)), b = run_study(config(5, 0.125, 1.0, 400, 9, 3));
    EXPECT_EQ(a.quenched_mean.value, b.quenched_mean.value);
    EXPECT_EQ(a.second_moment_ratio.value, b.second_moment_ratio.value);
    EXPECT_GE(a.second_moment_ratio.value, 1 - 3 * a.second_moment_ratio.std_err);
    EXPECT_LE(a.second_moment_ratio.value, second_moment_constant(0.125) + 3 * a.second_moment_ratio.std_err);
    EXPECT_GE(a.order_parameter.value, 0.0);
    EXPECT_LE(a.order_parameter.value, 1.0);
    EXPECT_THROW(run_study(config(11, 0.1, 1.0, 20, 1)), DomainError);
    EXPECT_THROW(run_study(config(4, 0.1, 1.0, 5, 1)), DomainError);
}

TEST(RunStudy, JensenAndGapSandwich) {
    for (int n : {3, 5}) {
        double lam = 0.15, bb = 1.0;
        auto r = run_study(config(n, lam, bb, 1500, 100 + n));
        auto p = ModelParams::dimensionless(n, lam, bb);
        auto ann = annealed_free_energy(p, 100000, 200 + n);
        double s = std::hypot(r.quenched_mean.std_err, ann.std_err);
        double gap = r.quenched_mean.value - ann.value;
        EXPECT_GE(gap, -3 * s);
        EXPECT_LE(gap, g_n_of(n, lam, bb) / n - lam / n + 3 * s);
        EXPECT_GE(gap, k_of_lambda(lam).k - lam / n - log_cosh(bb) - 3 * s);
    }
}

TEST(RunStudy, GuerraBoundNearZeroField) {
    double lam = 1.0;
    double k = k_of_lambda(lam).k;
    for (int n = 4; n <= 8; ++n) {
        auto r = run_study(config(n, lam, 1e-8, 300, 300 + n));
        EXPECT_GE(r.quenched_mean.value, k - lam - kLn2 - 3 * r.quenched_mean.std_err) << n;
    }
}

TEST(OrderParameter, TrendLimits) {
    auto base = ModelParams::dimensionless(3, 0.0, 1.0);
    for (const auto& e : order_parameter_trend(base, {3, 4, 5}, 20, 1)) EXPECT_NEAR(e.value, 0.0, 1e-14);
    auto polar = order_parameter_trend(ModelParams::dimensionless(3, 0.125, 50.0), {3}, 200, 2);
    EXPECT_LT(polar[0].value, 1e-4);
    EXPECT_THROW(order_parameter_trend(base, {11}, 20, 1), DomainError);
}

TEST(Concentration, BoundFormulaAndSummability) {
    EXPECT_NEAR(concentration_bound(4, 1.0, 0.5), 2 * std::exp(-16 * 0.25 / 6), 1e-15);
    EXPECT_EQ(concentration_bound(4, 0.0, 0.5), 0.0);
    auto c = concentration_check(config(6, 0.125, 1.0, 500, 4));
    EXPECT_TRUE(c.pass);
    auto huge = config(4, 0.125, 1.0, 100, 5);
    huge.delta = 1e3;
    auto h = concentration_check(huge);
    EXPECT_EQ(h.empirical.value, 0.0);
    EXPECT_EQ(h.bound, 0.0);
    for (double d : {0.3, 1.0}) {
        auto s = summability(0.125, d);
        EXPECT_TRUE(std::isfinite(s.constant));
        EXPECT_LE(s.partial_sum, s.constant);
        double direct = 0;
        for (int n = 2; n <= 64; ++n) direct += 2 * std::exp(-n * n * d * d / (2.0 * (n - 1) * 0.5));
        EXPECT_NEAR(s.partial_sum, direct, 1e-14);
    }
}

TEST(GeneralizedSecondMoment, ExactAtNegativeGammaAndBounded) {
    auto p = ModelParams::dimensionless(3, 0.125, 1.0);
    EXPECT_NEAR(generalized_second_moment(p, -0.125, 300, 1).value, 1.0, 1e-12);
    auto g0 = generalized_second_moment(p, 0.0, 2000, 2);
    EXPECT_LE(g0.value, 1 + 3 * g0.std_err);
    auto g1 = generalized_second_moment(p, 0.1, 2000, 3);  // 4(lambda + gamma) = 0.9
    EXPECT_LE(g1.value, 1 + 3 * g1.std_err);
    auto w1 = generalized_second_moment(p, 0.0, 500, 4, 1), w3 = generalized_second_moment(p, 0.0, 500, 4, 3);
    EXPECT_EQ(w1.value, w3.value);
    EXPECT_THROW(generalized_second_moment(p, 0.2, 100, 1), DomainError);
    EXPECT_THROW(generalized_second_moment(ModelParams::dimensionless(5, 0.1, 1.0), 0.0, 100, 1), DomainError);
}

TEST(PaleyZygmund, WitnessAndConstant) {
    EXPECT_NEAR(second_moment_constant(0.125), 1.10139062980636749523, 1e-14);
    auto w = paley_zygmund_witness(ModelParams::dimensionless(6, 0.125, 1.0), 300, 6);
    EXPECT_TRUE(w.pass);
    EXPECT_NEAR(w.bound, 1 / (4 * second_moment_constant(0.125)), 1e-15);
    auto tiny = paley_zygmund_witness(ModelParams::dimensionless(4, 1e-6, 1.0), 100, 7);
    EXPECT_EQ(tiny.empirical.value, 1.0);
    EXPECT_NEAR(tiny.bound, 0.25, 1e-5);
}
