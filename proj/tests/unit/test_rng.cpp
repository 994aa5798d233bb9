#include <cmath>
#include <cstdlib>
#include <numeric>
#include <set>
#include <stdexcept>
#include <vector>

#include <gtest/gtest.h>

#include "qsk/parallel.hpp"
#include "qsk/rng.hpp"

using namespace qsk;

TEST(Stream, SameKeyGivesSameSequence) {
    Stream a(7, Domain::path, 3), b(7, Domain::path, 3);
    for (int i = 0; i < 100; ++i) EXPECT_EQ(a(), b());
}

TEST(Stream, DomainsAndIndicesAreDisjoint) {
    std::set<std::uint64_t> first;
    for (auto d : {Domain::path, Domain::ensemble, Domain::disorder, Domain::free_path, Domain::pair_system, Domain::misc})
        for (std::uint64_t i = 0; i < 50; ++i) first.insert(Stream(7, d, i)());
    EXPECT_EQ(first.size(), 300u);
}

TEST(Stream, UniformIsOpenIntervalWithRightMoments) {
    Stream s(1, Domain::misc, 0);
    const int n = 200000;
    double sum = 0, sum2 = 0;
    for (int i = 0; i < n; ++i) {
        double u = s.uniform();
        ASSERT_GT(u, 0.0);
        ASSERT_LT(u, 1.0);
        sum += u;
        sum2 += u * u;
    }
    EXPECT_NEAR(sum / n, 0.5, 5 * std::sqrt(1.0 / 12 / n));
    EXPECT_NEAR(sum2 / n, 1.0 / 3, 5 * std::sqrt(4.0 / 45 / n));
}

TEST(Stream, NormalMoments) {
    Stream s(2, Domain::misc, 0);
    const int n = 200000;
    double m1 = 0, m2 = 0, m4 = 0;
    for (int i = 0; i < n; ++i) {
        double g = s.normal();
        m1 += g;
        m2 += g * g;
        m4 += g * g * g * g;
    }
    EXPECT_NEAR(m1 / n, 0.0, 5 / std::sqrt(n));
    EXPECT_NEAR(m2 / n, 1.0, 5 * std::sqrt(2.0 / n));
    EXPECT_NEAR(m4 / n, 3.0, 5 * std::sqrt(96.0 / n));
}

TEST(ParallelFor, VisitsEveryIndexOnceForAnyWorkerCount) {
    for (unsigned w : {1u, 2u, 3u, 8u}) {
        std::vector<int> hits(1001, 0);
        parallel_for(hits.size(), w, [&](std::size_t i) { hits[i] += 1; });
        for (int h : hits) ASSERT_EQ(h, 1);
    }
}

TEST(ParallelFor, PropagatesExceptions) {
    EXPECT_THROW(parallel_for(100, 3, [](std::size_t i) {
                     if (i == 57) throw std::runtime_error("boom");
                 }),
                 std::runtime_error);
}

TEST(DefaultWorkers, HonorsEnvironment) {
    ::setenv(kWorkersEnv, "5", 1);
    EXPECT_EQ(default_workers(), 5u);
    ::unsetenv(kWorkersEnv);
    EXPECT_GE(default_workers(), 1u);
}

TEST(PairwiseSum, MatchesLongDoubleAccumulation) {
    Stream s(3, Domain::misc, 0);
    std::vector<double> x(100003);
    for (double& v : x) v = s.normal() * 1e3 + 1e-3;
    long double ref = 0;
    for (double v : x) ref += v;
    EXPECT_NEAR(pairwise_sum(x), static_cast<double>(ref), 1e-8);
    EXPECT_EQ(pairwise_sum(std::vector<double>{}), 0.0);
}

TEST(MeanVar, TwoPassReference) {
    std::vector<double> x{1, 2, 3, 4, 10};
    auto mv = mean_var(x);
    EXPECT_DOUBLE_EQ(mv.mean, 4.0);
    EXPECT_DOUBLE_EQ(mv.var, (9 + 4 + 1 + 0 + 36) / 4.0);
}

TEST(LogMeanExp, ShiftEquivarianceAndConstantInput) {
    Stream s(4, Domain::misc, 0);
    std::vector<double> x(1000), y(1000);
    for (std::size_t i = 0; i < x.size(); ++i) {
        x[i] = s.normal();
        y[i] = x[i] + 800.0;  // would overflow exp() unshifted
    }
    auto a = log_mean_exp(x), b = log_mean_exp(y);
    EXPECT_NEAR(b.value - a.value, 800.0, 1e-10);
    EXPECT_NEAR(a.std_err, b.std_err, 1e-12);
    double direct = 0;
    for (double v : x) direct += std::exp(v);
    EXPECT_NEAR(a.value, std::log(direct / x.size()), 1e-12);
    auto c = log_mean_exp(std::vector<double>(50, 2.5));
    EXPECT_DOUBLE_EQ(c.value, 2.5);
    EXPECT_DOUBLE_EQ(c.std_err, 0.0);
    EXPECT_NEAR(c.ess, 50.0, 1e-9);
}
