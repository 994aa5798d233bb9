#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "qsk/annealed.hpp"
#include "qsk/core.hpp"
#include "qsk/hilbert.hpp"
#include "qsk/parallel.hpp"
#include "qsk/paths.hpp"
#include "qsk/rng.hpp"

namespace qsk {

struct DisorderStudyConfig {
    ModelParams params;
    int n_disorder = 2000;
    std::uint64_t seed = 1;
    double delta = 0.1;
    unsigned workers = 1;
};

struct SampleRecord {
    double log_z = 0.0;
    double beta_f = 0.0;         // beta f_N = -ln Z / N
    double zz12 = 0.0;           // <Sz_1 Sz_2>
    double zz_sq_pair_mean = 0.0;  // mean over pairs of <Sz_i Sz_j>^2
};

struct Proportion {
    double value = 0.0;
    double std_err = 0.0;
    long n = 0;
};

inline Proportion proportion(long hits, long n) {
    Proportion p;
    p.n = n;
    p.value = n > 0 ? static_cast<double>(hits) / n : 0.0;
    p.std_err = n > 0 ? std::sqrt(p.value * (1.0 - p.value) / n) : 0.0;
    return p;
}

struct DisorderStudyResult {
    EstimateWithError quenched_mean;        // beta E[f_N]
    EstimateWithError second_moment_ratio;  // E[Z^2]/E[Z]^2
    EstimateWithError order_parameter;      // E[<Sz_i Sz_j>^2], pair-averaged
    Proportion tail_frequency;              // |beta f - mean| > delta
    double tail_bound = 0.0;
    Proportion paley_zygmund;               // Z >= mean(Z)/2
    double log_mean_z = 0.0;
    std::vector<SampleRecord> samples;
};

inline SampleRecord analyze_sample(const ModelParams& params, const DisorderSample& s) {
    GibbsData g = gibbs_by_parity(params, s);
    int n = params.n_spins;
    SampleRecord r;
    r.log_z = g.log_z;
    r.beta_f = -g.log_z / n;
    r.zz12 = zz_from_rho(g.rho, 1, 2);
    double acc = 0.0;
    int pairs = 0;
    for (int i = 1; i <= n; ++i)
        for (int j = i + 1; j <= n; ++j) {
            double c = zz_from_rho(g.rho, i, j);
            acc += c * c;
            ++pairs;
        }
    r.zz_sq_pair_mean = acc / pairs;
    return r;
}

inline std::vector<SampleRecord> draw_samples(const ModelParams& params, int n_disorder, std::uint64_t seed,
                                              unsigned workers) {
    std::vector<SampleRecord> out(n_disorder);
    parallel_for(static_cast<std::size_t>(n_disorder), workers, [&](std::size_t i) {
        auto s = DisorderSample::draw(params.n_spins, seed, i);
        try {
            out[i] = analyze_sample(params, s);
        } catch (const NumericalError& ex) {
            throw NumericalError(std::string(ex.what()) + " (seed " + std::to_string(seed) + ", sample " +
                                 std::to_string(i) + ")");
        }
    });
    return out;
}

inline double concentration_bound(int n, double beta_v, double delta) {
    if (beta_v == 0.0) return 0.0;
    return 2.0 * std::exp(-static_cast<double>(n) * n * delta * delta / (2.0 * (n - 1) * beta_v * beta_v));
}

// E[Z^2]/E[Z]^2 from per-sample ln Z with delta-method error.
inline EstimateWithError second_moment_ratio(const std::vector<double>& log_z) {
    std::size_t n = log_z.size();
    double ref = pairwise_sum(log_z) / static_cast<double>(n);
    std::vector<double> z(n), z2(n);
    for (std::size_t i = 0; i < n; ++i) {
        z[i] = std::exp(log_z[i] - ref);
        z2[i] = z[i] * z[i];
    }
    double B = pairwise_sum(z) / static_cast<double>(n);
    double A = pairwise_sum(z2) / static_cast<double>(n);
    std::vector<double> infl(n);
    for (std::size_t i = 0; i < n; ++i) infl[i] = z2[i] / (B * B) - 2.0 * A * z[i] / (B * B * B);
    EstimateWithError r;
    r.value = A / (B * B);
    r.std_err = std::sqrt(mean_var(infl).var / static_cast<double>(n));
    r.n_samples = static_cast<long>(n);
    return r;
}

inline DisorderStudyResult summarize(const DisorderStudyConfig& cfg, std::vector<SampleRecord> samples) {
    const auto& p = cfg.params;
    int n = p.n_spins;
    std::size_t ns = samples.size();
    DisorderStudyResult r;
    std::vector<double> bf(ns), lz(ns), op(ns);
    for (std::size_t i = 0; i < ns; ++i) {
        bf[i] = samples[i].beta_f;
        lz[i] = samples[i].log_z;
        op[i] = samples[i].zz_sq_pair_mean;
    }
    auto mbf = mean_var(bf);
    r.quenched_mean = {mbf.mean, std::sqrt(mbf.var / ns), static_cast<long>(ns), cfg.seed, 0.0};
    auto mop = mean_var(op);
    r.order_parameter = {std::clamp(mop.mean, 0.0, 1.0), std::sqrt(mop.var / ns), static_cast<long>(ns), cfg.seed, 0.0};
    r.second_moment_ratio = second_moment_ratio(lz);
    r.second_moment_ratio.seed = cfg.seed;

    double ref = *std::max_element(lz.begin(), lz.end());
    std::vector<double> z(ns);
    for (std::size_t i = 0; i < ns; ++i) z[i] = std::exp(lz[i] - ref);
    double mean_z = pairwise_sum(z) / static_cast<double>(ns);
    r.log_mean_z = ref + std::log(mean_z);
    long pz = 0, tail = 0;
    for (std::size_t i = 0; i < ns; ++i) {
        if (z[i] >= 0.5 * mean_z) ++pz;
        if (std::fabs(bf[i] - mbf.mean) > cfg.delta) ++tail;
    }
    r.paley_zygmund = proportion(pz, static_cast<long>(ns));
    r.tail_frequency = proportion(tail, static_cast<long>(ns));
    r.tail_bound = concentration_bound(n, p.beta * p.v, cfg.delta);
    r.samples = std::move(samples);
    return r;
}

inline DisorderStudyResult run_study(const DisorderStudyConfig& cfg) {
    cfg.params.validate();
    if (cfg.params.n_spins > 10) throw DomainError("run_study: N must be <= 10");
    if (cfg.n_disorder < 10) throw DomainError("run_study: n_disorder must be >= 10");
    if (!(cfg.delta > 0)) throw DomainError("run_study: delta must be positive");
    return summarize(cfg, draw_samples(cfg.params, cfg.n_disorder, cfg.seed, cfg.workers));
}

inline std::vector<EstimateWithError> order_parameter_trend(const ModelParams& base, const std::vector<int>& n_list,
                                                            int n_disorder, std::uint64_t seed, unsigned workers = 1) {
    std::vector<EstimateWithError> out;
    for (int n : n_list) {
        if (n > 10) throw DomainError("order_parameter_trend: N must be <= 10");
        // keep lambda and beta b fixed: v does not depend on N in this parametrization
        ModelParams p = base;
        p.n_spins = n;
        auto s = draw_samples(p, n_disorder, seed + static_cast<std::uint64_t>(n), workers);
        std::vector<double> op(s.size());
        for (std::size_t i = 0; i < s.size(); ++i) op[i] = s[i].zz_sq_pair_mean;
        auto mv = mean_var(op);
        out.push_back({mv.mean, std::sqrt(mv.var / op.size()), static_cast<long>(op.size()), seed, 0.0});
    }
    return out;
}

struct ConcentrationCheck {
    Proportion empirical;
    double bound = 0.0;
    bool pass = false;
};

inline ConcentrationCheck concentration_check(const DisorderStudyConfig& cfg) {
    auto r = run_study(cfg);
    ConcentrationCheck c;
    c.empirical = r.tail_frequency;
    c.bound = r.tail_bound;
    c.pass = c.empirical.value <= c.bound + 3.0 * c.empirical.std_err;
    return c;
}

struct Summability {
    double constant = 0.0;     // 2 q^2 / (1 - q), q = exp(-delta^2/(8 lambda))
    double partial_sum = 0.0;  // sum over N in [2, n_max] of the per-N tail bounds
};

inline Summability summability(double lambda, double delta, int n_max = 64) {
    Summability s;
    double q = std::exp(-delta * delta / (8.0 * lambda));
    s.constant = 2.0 * q * q / (1.0 - q);
    double beta_v = 2.0 * std::sqrt(lambda);
    for (int n = 2; n <= n_max; ++n) s.partial_sum += concentration_bound(n, beta_v, delta);
    return s;
}

// Generalized second moment divided by exp(-2 lambda) E[Z]^2 / sqrt(1 - 4(lambda + gamma)),
// from two independent path systems and the exact sum over sign patterns eps.
inline EstimateWithError generalized_second_moment(const ModelParams& params, double gamma, std::size_t n_systems,
                                                   std::uint64_t seed, unsigned workers = 1) {
    params.validate();
    int n = params.n_spins;
    double lambda = params.lambda();
    double lb = lambda + gamma;
    if (n > 4) throw DomainError("generalized_second_moment: N must be <= 4");
    if (!(lb >= 0 && 4.0 * lb < 1.0)) throw DomainError("generalized_second_moment: need 0 <= 4(lambda+gamma) < 1");
    if (n_systems < 2) throw DomainError("generalized_second_moment: need at least two systems");
    int np = n * (n - 1) / 2;
    double bb = params.beta_b();
    // per system: pair overlaps and Z~ = exp(N lambda P_N)
    auto draw = [&](std::uint64_t which) {
        std::vector<double> a(n_systems * np), zt(n_systems);
        std::unique_ptr<CountSampler> counts;
        if (bb > 0) counts = std::make_unique<CountSampler>(bb);
        parallel_for(n_systems, workers, [&](std::size_t e) {
            Stream rng(seed, Domain::pair_system, 2 * e + which);
            std::vector<JumpPath> paths(n);
            if (counts)
                for (auto& p : paths) p = sample_even_path(*counts, rng);
            double off = 0.0;
            int k = 0;
            for (int i = 0; i < n; ++i)
                for (int j = i + 1; j < n; ++j) {
                    double v = overlap_integral(paths[i], paths[j]);
                    a[e * np + k++] = v;
                    off += v * v;
                }
            zt[e] = std::exp(lambda * (n + 2.0 * off) / n);
        });
        return std::make_pair(a, zt);
    };
    auto [a1, z1] = draw(0);
    auto [a2, z2] = draw(1);
    int n_eps = 1 << (n - 1);  // eps and -eps give the same value
    std::vector<std::vector<int>> eps_prod(n_eps, std::vector<int>(np));
    for (int mask = 0; mask < n_eps; ++mask) {
        int k = 0;
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j) {
                int ei = ((mask >> i) & 1) ? -1 : 1, ej = ((mask >> j) & 1) ? -1 : 1;
                eps_prod[mask][k++] = ei * ej;
            }
    }
    double c = 2.0 * n * lb;
    // row means u_a = mean_b h(a,b); column sums accumulated per fixed row block
    constexpr std::size_t kRowsPerBlock = 64;
    std::size_t nblocks = (n_systems + kRowsPerBlock - 1) / kRowsPerBlock;
    std::vector<double> row(n_systems, 0.0), col(n_systems, 0.0);
    std::vector<std::vector<double>> col_part(nblocks);
    parallel_for(nblocks, workers, [&](std::size_t blk) {
        std::vector<double> part(n_systems, 0.0), h(n_systems);
        std::size_t r1 = std::min(n_systems, (blk + 1) * kRowsPerBlock);
        for (std::size_t ia = blk * kRowsPerBlock; ia < r1; ++ia) {
            const double* pa = &a1[ia * np];
            for (std::size_t ib = 0; ib < n_systems; ++ib) {
                const double* pb = &a2[ib * np];
                double kern = 0.0;
                for (int mask = 0; mask < n_eps; ++mask) {
                    double s = 0.0;
                    for (int k = 0; k < np; ++k) s += eps_prod[mask][k] * pa[k] * pb[k];
                    kern += std::exp(c * (n + 2.0 * s) / (static_cast<double>(n) * n));
                }
                h[ib] = z1[ia] * z2[ib] * kern / n_eps;
                part[ib] += h[ib];
            }
            row[ia] = pairwise_sum(h) / static_cast<double>(n_systems);
        }
        col_part[blk] = std::move(part);
    });
    for (std::size_t blk = 0; blk < nblocks; ++blk)
        for (std::size_t ib = 0; ib < n_systems; ++ib) col[ib] += col_part[blk][ib];
    for (double& v : col) v /= static_cast<double>(n_systems);
    double V = pairwise_sum(row) / static_cast<double>(n_systems);
    double A = pairwise_sum(z1) / static_cast<double>(n_systems);
    double B = pairwise_sum(z2) / static_cast<double>(n_systems);
    double pref = std::sqrt(1.0 - 4.0 * lb);
    std::vector<double> ia(n_systems), ib(n_systems);
    for (std::size_t i = 0; i < n_systems; ++i) {
        ia[i] = (row[i] - V) / V - (z1[i] - A) / A;
        ib[i] = (col[i] - V) / V - (z2[i] - B) / B;
    }
    EstimateWithError r;
    r.value = pref * V / (A * B);
    double rel_var = mean_var(ia).var / n_systems + mean_var(ib).var / n_systems;
    r.std_err = r.value * std::sqrt(rel_var);
    r.n_samples = static_cast<long>(n_systems);
    r.seed = seed;
    return r;
}

// c = exp(-2 lambda)/sqrt(1 - 4 lambda)
inline double second_moment_constant(double lambda) { return std::exp(-2.0 * lambda) / std::sqrt(1.0 - 4.0 * lambda); }

struct PaleyZygmund {
    Proportion empirical;
    double bound = 0.0;  // 1/(4c)
    bool pass = false;
};

inline PaleyZygmund paley_zygmund_witness(const ModelParams& params, int n_disorder, std::uint64_t seed,
                                          unsigned workers = 1) {
    if (!(4.0 * params.lambda() < 1.0)) throw DomainError("paley_zygmund_witness: need 4 lambda < 1");
    DisorderStudyConfig cfg{params, n_disorder, seed, 1.0, workers};
    auto r = run_study(cfg);
    PaleyZygmund pz;
    pz.empirical = r.paley_zygmund;
    pz.bound = 1.0 / (4.0 * second_moment_constant(params.lambda()));
    pz.pass = pz.empirical.value >= pz.bound - 3.0 * pz.empirical.std_err;
    return pz;
}

}  // namespace qsk
