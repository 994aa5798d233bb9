#include <algorithm>
#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "qsk/constants.hpp"
#include "qsk/hilbert.hpp"
#include "qsk/parallel.hpp"

using namespace qsk;

namespace {

double beta_f(const ModelParams& p, const DisorderSample& s) { return -gibbs_by_parity(p, s).log_z / p.n_spins; }

ModelParams with(int n, double beta, double v, double b) {
    ModelParams p;
    p.n_spins = n;
    p.beta = beta;
    p.v = v;
    p.b = b;
    return p;
}

}  // namespace

TEST(DisorderSample, IndexingAndDeterminism) {
    auto a = DisorderSample::draw(5, 42, 7), b = DisorderSample::draw(5, 42, 7), c = DisorderSample::draw(5, 42, 8);
    EXPECT_EQ(a.couplings.size(), 10u);
    EXPECT_EQ(a.couplings, b.couplings);
    EXPECT_NE(a.couplings, c.couplings);
    // strict upper triangle, row-major
    EXPECT_EQ(DisorderSample::offset(5, 1, 2), 0u);
    EXPECT_EQ(DisorderSample::offset(5, 1, 5), 3u);
    EXPECT_EQ(DisorderSample::offset(5, 2, 3), 4u);
    EXPECT_EQ(DisorderSample::offset(5, 4, 5), 9u);
    EXPECT_DOUBLE_EQ(a.g(3, 2), a.g(2, 3));
    EXPECT_THROW(DisorderSample::from_values(3, {1.0, 2.0}), DomainError);
}

TEST(Hamiltonian, SymmetricTracelessAndCapped) {
    auto p = ModelParams::dimensionless(6, 0.3, 0.7);
    auto h = build_hamiltonian(p, DisorderSample::draw(6, 1, 0));
    EXPECT_EQ(h.dim, 64u);
    EXPECT_TRUE(h.matrix == h.matrix.transpose());
    double scale = h.matrix.diagonal().cwiseAbs().sum();
    EXPECT_LE(std::fabs(h.matrix.trace()), 64 * std::numeric_limits<double>::epsilon() * scale);
    EXPECT_THROW(build_hamiltonian(p, DisorderSample::draw(6, 1, 0), 32), DomainError);
    EXPECT_THROW(build_hamiltonian(ModelParams::dimensionless(5, 0.3, 0.7), DisorderSample::draw(6, 1, 0)), DomainError);
}

TEST(Spectrum, TwoSpinsClosedForm) {
    for (double g : {-1.3, 0.0, 0.4, 2.2}) {
        double lam = 0.35, bb = 0.8;
        auto s = spectrum(build_hamiltonian(ModelParams::dimensionless(2, lam, bb), DisorderSample::from_values(2, {g})), 1.0);
        double a = std::sqrt(2 * lam) * std::fabs(g), c = std::sqrt(2 * lam * g * g + 4 * bb * bb);
        std::vector<double> ref{-c, -a, a, c};
        std::sort(ref.begin(), ref.end());
        for (int k = 0; k < 4; ++k) EXPECT_NEAR(s.eigenvalues[k], ref[k], 1e-12);
        EXPECT_NEAR(s.log_z, std::log(2 * std::cosh(a) + 2 * std::cosh(c)), 1e-12);
    }
    // b = 0: +-(v/sqrt2) g, each twice
    auto p = with(2, 1.0, 1.5, 0.0);
    auto s = spectrum(build_hamiltonian(p, DisorderSample::from_values(2, {0.9})), 1.0);
    double e = 1.5 / std::sqrt(2.0) * 0.9;
    EXPECT_NEAR(s.eigenvalues[0], -e, 1e-14);
    EXPECT_NEAR(s.eigenvalues[1], -e, 1e-14);
    EXPECT_NEAR(s.eigenvalues[3], e, 1e-14);
}

TEST(Spectrum, TrivialPartitionFunctions) {
    for (int n = 2; n <= 8; ++n) {
        auto s = DisorderSample::draw(n, 3, n);
        EXPECT_NEAR(gibbs_by_parity(with(n, 1.0, 0.0, 0.0), s).log_z, n * kLn2, 1e-12);
        double bb = 0.9;
        EXPECT_NEAR(beta_f(with(n, 2.0, 0.0, bb / 2.0), s), -std::log(2 * std::cosh(bb)), 1e-12);
    }
    // large beta: log-sum-exp must not overflow
    auto s = spectrum(build_hamiltonian(with(3, 500.0, 2.0, 1.0), DisorderSample::draw(3, 1, 0)), 500.0);
    EXPECT_TRUE(std::isfinite(s.log_z));
}

TEST(GibbsByParity, MatchesDenseDiagonalization) {
    for (int n = 2; n <= 7; ++n)
        for (int i = 0; i < 3; ++i) {
            auto p = ModelParams::dimensionless(n, 0.2 + 0.1 * i, 0.3 + 0.5 * i);
            auto s = DisorderSample::draw(n, 77, 10 * n + i);
            auto h = build_hamiltonian(p, s);
            double lz = 0;
            auto rho = gibbs_diagonal_dense(h, 1.0, &lz);
            auto g = gibbs_by_parity(p, s);
            auto dense = spectrum(h, 1.0);
            EXPECT_NEAR(g.log_z, lz, 1e-11);
            EXPECT_NEAR(g.log_z, dense.log_z, 1e-11);
            for (std::size_t k = 0; k < rho.size(); ++k) {
                EXPECT_NEAR(g.rho[k], rho[k], 1e-12);
                EXPECT_NEAR(g.eigenvalues[k], dense.eigenvalues[k], 1e-11);
            }
            EXPECT_NEAR(zz_from_rho(g.rho, 1, 2), gibbs_zz(h, 1.0, 1, 2), 1e-12);
            EXPECT_NEAR(std::accumulate(g.rho.begin(), g.rho.end(), 0.0), 1.0, 1e-12);
        }
}

TEST(Correlations, SpinFlipSymmetryAndLimits) {
    auto p = ModelParams::dimensionless(5, 0.3, 0.6);
    auto s = DisorderSample::draw(5, 5, 0);
    auto h = build_hamiltonian(p, s);
    for (int i = 1; i <= 5; ++i) EXPECT_NEAR(gibbs_z(h, 1.0, i), 0.0, 1e-13);
    EXPECT_THROW(gibbs_zz(h, 1.0, 2, 2), DomainError);
    EXPECT_THROW(gibbs_zz(h, 1.0, 0, 2), DomainError);
    double c = gibbs_zz(h, 1.0, 2, 4);
    EXPECT_LE(std::fabs(c), 1.0);
    // v = 0: product state
    auto free = gibbs_by_parity(ModelParams::dimensionless(5, 0.0, 0.6), s);
    EXPECT_NEAR(zz_from_rho(free.rho, 1, 3), 0.0, 1e-14);
    // x-polarized limit
    auto polar = gibbs_by_parity(ModelParams::dimensionless(4, 0.3, 50.0), DisorderSample::draw(4, 5, 1));
    // first-order perturbation in v/b gives a residue of order 1/beta_b
    EXPECT_LT(std::fabs(zz_from_rho(polar.rho, 1, 2)), 0.05 / 50.0);
}

TEST(QuasiClassical, SandwichAndFieldMonotonicityPerSample) {
    for (int n = 2; n <= 6; ++n)
        for (int i = 0; i < 25; ++i) {
            double beta = 1.3, v = 0.9, b = 0.7;
            auto s = DisorderSample::draw(n, 123, 100 * n + i);
            double pp = p_of(beta * b), lc = log_cosh(beta * b);
            double classical = beta_f(with(n, beta, v, 0.0), s);
            double quantum = beta_f(with(n, beta, v, b), s);
            double reduced = beta_f(with(n, beta, pp * v, 0.0), s);
            EXPECT_LE(classical, quantum + lc + 1e-12);
            EXPECT_LE(quantum + lc, reduced + 1e-12);
            EXPECT_LE(reduced, -kLn2 + 1e-12);
            EXPECT_GE(classical - quantum, -1e-12);
            EXPECT_LE(classical - quantum, lc + 1e-12);
        }
}

TEST(TwoSpinExact, ExtendedPrecisionValues) {
    EXPECT_NEAR(f2_annealed_exact(0.2, 1.0).value, -1.18767249876604707689, 1e-12);
    EXPECT_NEAR(f2_quenched_exact(0.2, 1.0).value, -1.18171114396806374613, 1e-12);
    for (double bb : {0.3, 2.0}) {
        EXPECT_NEAR(f2_annealed_exact(0.0, bb).value, -std::log(2 * std::cosh(bb)), 1e-14);
        EXPECT_NEAR(f2_quenched_exact(0.0, bb).value, -std::log(2 * std::cosh(bb)), 1e-14);
    }
}

TEST(TwoSpinExact, JensenAndF2BelowG2) {
    for (double lam : {0.01, 0.2, 1.0, 3.0})
        for (double bb : {0.1, 1.0, 4.0}) {
            double ann = f2_annealed_exact(lam, bb).value, q = f2_quenched_exact(lam, bb).value;
            EXPECT_LE(ann, q + 1e-13);
            double f2 = lam - 2 * ann - 2 * std::log(2 * std::cosh(bb));
            EXPECT_LE(f2, g_n_of(2, lam, bb) + 1e-12) << lam << " " << bb;
        }
}

TEST(TwoSpinExact, QuenchedMatchesDisorderMonteCarlo) {
    const int n = 20000;
    double lam = 0.2, bb = 1.0;
    auto p = ModelParams::dimensionless(2, lam, bb);
    std::vector<double> f(n);
    for (int i = 0; i < n; ++i) f[i] = beta_f(p, DisorderSample::draw(2, 9, i));
    auto mv = mean_var(f);
    EXPECT_NEAR(mv.mean, f2_quenched_exact(lam, bb).value, 3 * std::sqrt(mv.var / n));
}

TEST(TwoSpinExact, SmallFieldApproachesClassicalDiagonalization) {
    const int n = 20000;
    double lam = 0.3;
    auto p = ModelParams::dimensionless(2, lam, 1e-8);
    std::vector<double> f(n);
    for (int i = 0; i < n; ++i) f[i] = beta_f(p, DisorderSample::draw(2, 10, i));
    auto mv = mean_var(f);
    EXPECT_NEAR(f2_quenched_exact(lam, 1e-8).value, mv.mean, 3 * std::sqrt(mv.var / n));
}
