#pragma once

#include <cmath>
#include <string>
#include <vector>

#include <boost/math/tools/minima.hpp>
#include <boost/math/tools/roots.hpp>

#include "qsk/constants.hpp"
#include "qsk/core.hpp"
#include "qsk/parallel.hpp"
#include "qsk/paths.hpp"
#include "qsk/quadrature.hpp"
#include "qsk/rng.hpp"

namespace qsk {

inline constexpr double kMinEss = 100.0;

// P_N for `count` independent ensembles of N even-conditioned paths.
inline std::vector<double> sample_p_n(int n, double beta_b, std::size_t count, std::uint64_t seed, unsigned workers = 1) {
    std::vector<double> out(count, 1.0);
    if (beta_b == 0.0) return out;
    CountSampler counts(beta_b);
    parallel_for(count, workers, [&](std::size_t e) {
        Stream rng(seed, Domain::ensemble, e);
        std::vector<JumpPath> paths(n);
        for (auto& p : paths) p = sample_even_path(counts, rng);
        out[e] = p_n_functional(paths);
    });
    return out;
}

// F_N = ln < exp(N lambda P_N) >
inline EstimateWithError estimate_f_n(const ModelParams& params, std::size_t ensemble_count, std::uint64_t seed,
                                      unsigned workers = 1) {
    params.validate();
    if (ensemble_count < 2) throw DomainError("estimate_f_n: need at least two ensembles");
    if (params.n_spins > 32) throw DomainError("estimate_f_n: N > 32 not supported");
    EstimateWithError r;
    r.n_samples = static_cast<long>(ensemble_count);
    r.seed = seed;
    double lambda = params.lambda();
    int n = params.n_spins;
    if (lambda == 0.0) {
        r.ess = static_cast<double>(ensemble_count);
        return r;
    }
    auto pn = sample_p_n(n, params.beta_b(), ensemble_count, seed, workers);
    for (double& x : pn) x *= n * lambda;
    auto l = log_mean_exp(pn);
    r.value = l.value;
    r.std_err = l.std_err;
    r.ess = l.ess;
    return r;
}

inline double log_two_cosh(double x) { return kLn2 + log_cosh(x); }

// beta f_N^ann = (lambda - F_N)/N - ln(2 cosh(beta b))
inline EstimateWithError annealed_from_f_n(const ModelParams& params, const EstimateWithError& f) {
    EstimateWithError r = f;
    int n = params.n_spins;
    r.value = (params.lambda() - f.value) / n - log_two_cosh(params.beta_b());
    r.std_err = f.std_err / n;
    return r;
}

inline EstimateWithError annealed_free_energy(const ModelParams& params, std::size_t ensemble_count, std::uint64_t seed,
                                              unsigned workers = 1) {
    return annealed_from_f_n(params, estimate_f_n(params, ensemble_count, seed, workers));
}

// E[ln cosh(a g)], g standard normal
inline Integral expected_log_cosh(double a) {
    if (a == 0.0) return {};
    return normal_expectation_even([a](double g) { return log_cosh(a * g); }, 13.0, 1e-14);
}

inline double k_objective(double q, double lambda) {
    if (q <= 0.0) return 0.0;
    return lambda * q * (2.0 - q) - expected_log_cosh(std::sqrt(4.0 * lambda * q)).value;
}

struct KResult {
    double k = 0.0;
    double q = 0.0;  // maximizer
};

inline KResult k_of_lambda(double lambda, int scan_points = 512) {
    if (!(lambda > 0)) throw DomainError("k_of_lambda: lambda must be positive");
    KResult best;
    int ibest = 0;
    std::vector<double> vals(scan_points);
    for (int i = 0; i < scan_points; ++i) {
        double q = static_cast<double>(i) / (scan_points - 1);
        vals[i] = k_objective(q, lambda);
        if (vals[i] > best.k) {
            best.k = vals[i];
            best.q = q;
            ibest = i;
        }
    }
    if (ibest == 0) return {};
    double lo = static_cast<double>(ibest - 1) / (scan_points - 1);
    double hi = static_cast<double>(std::min(ibest + 1, scan_points - 1)) / (scan_points - 1);
    auto neg = [lambda](double q) { return -k_objective(q, lambda); };
    auto res = boost::math::tools::brent_find_minima(neg, lo, hi, 50);
    if (-res.second > best.k) {
        best.k = -res.second;
        best.q = res.first;
    }
    return best;
}

// Positive root of q = E[tanh^2(g sqrt(4 lambda q))]; 0 when 4 lambda <= 1.
inline double sk_equation_solve(double lambda) {
    if (!(lambda >= 0)) throw DomainError("sk_equation_solve: lambda must be >= 0");
    if (4.0 * lambda <= 1.0) return 0.0;
    auto F = [lambda](double q) {
        double a = std::sqrt(4.0 * lambda * q);
        double t = normal_expectation_even(
                       [a](double g) {
                           double th = std::tanh(a * g);
                           return th * th;
                       },
                       13.0, 1e-14)
                       .value;
        return t - q;
    };
    double lo = 0.5;
    while (F(lo) <= 0.0) {
        lo *= 0.5;
        if (lo < 1e-300) return 0.0;
    }
    double hi = 1.0;
    if (F(hi) >= 0.0) return 1.0;
    std::uintmax_t it = 200;
    auto tol = boost::math::tools::eps_tolerance<double>(50);
    auto r = boost::math::tools::toms748_solve(F, lo, hi, tol, it);
    return 0.5 * (r.first + r.second);
}

struct DeltaBounds {
    double lower = 0.0;
    double upper = 0.0;
    int argmin = 2;
    bool n_converged = true;
};

inline double log_cosh_or_zero(double x) { return x == 0.0 ? 0.0 : log_cosh(x); }

inline DeltaBounds delta_bounds_from_k(double k, double lambda, double beta_b, int n_max) {
    DeltaBounds d;
    d.lower = std::max(0.0, k - log_cosh_or_zero(beta_b));
    if (beta_b == 0.0) {
        d.upper = lambda;  // p = 1, so G_N/N = lambda for every N
    } else {
        auto g = inf_g_n_over_n(lambda, beta_b, n_max);
        d.upper = g.value;
        d.argmin = g.argmin;
        d.n_converged = !g.at_boundary;
    }
    return d;
}

inline DeltaBounds delta_infinity_bounds(double lambda, double beta_b, int n_max = 64) {
    return delta_bounds_from_k(k_of_lambda(lambda).k, lambda, beta_b, n_max);
}

enum class RegionClass { zero, positive, unknown };

inline const char* to_string(RegionClass c) {
    switch (c) {
        case RegionClass::zero: return "zero";
        case RegionClass::positive: return "positive";
        default: return "unknown";
    }
}

struct RegionPoint {
    double inv_beta_v = 0.0;
    double b_over_v = 0.0;
    double delta_lower = 0.0;
    double delta_upper = 0.0;
    bool lower_bound_positive = false;  // k - ln cosh(beta b) > 0
    bool weak_disorder = false;         // 4 lambda < 1, i.e. inv_beta_v > 1
    RegionClass classification = RegionClass::unknown;
};

struct RegionGrid {
    double inv_beta_v_min = 0.05, inv_beta_v_max = 2.0;
    int n_inv_beta_v = 100;
    double b_over_v_min = 0.0, b_over_v_max = 3.0;
    int n_b_over_v = 100;
    int n_max = 64;
};

inline std::vector<RegionPoint> region_scan(const RegionGrid& g, unsigned workers = 1) {
    if (g.n_inv_beta_v < 2 || g.n_b_over_v < 2) throw DomainError("region_scan: need >= 2 points per axis");
    if (!(g.inv_beta_v_min > 0)) throw DomainError("region_scan: inv_beta_v must be positive");
    std::vector<RegionPoint> out(static_cast<std::size_t>(g.n_inv_beta_v) * g.n_b_over_v);
    parallel_for(g.n_inv_beta_v, workers, [&](std::size_t i) {
        double x = g.inv_beta_v_min + (g.inv_beta_v_max - g.inv_beta_v_min) * i / (g.n_inv_beta_v - 1);
        double lambda = 1.0 / (4.0 * x * x);
        double k = k_of_lambda(lambda).k;
        for (int j = 0; j < g.n_b_over_v; ++j) {
            double y = g.b_over_v_min + (g.b_over_v_max - g.b_over_v_min) * j / (g.n_b_over_v - 1);
            double bb = y / x;
            auto d = delta_bounds_from_k(k, lambda, bb, g.n_max);
            RegionPoint& p = out[i * g.n_b_over_v + j];
            p.inv_beta_v = x;
            p.b_over_v = y;
            p.delta_lower = d.lower;
            p.delta_upper = d.upper;
            p.lower_bound_positive = d.lower > 0.0;
            p.weak_disorder = 4.0 * lambda < 1.0;
            if (p.weak_disorder)
                p.classification = RegionClass::zero;
            else if (p.lower_bound_positive)
                p.classification = RegionClass::positive;
            else
                p.classification = RegionClass::unknown;
        }
    });
    return out;
}

// Non-rigorous advisory border b/v = 1.51 sqrt(1 - x^2), x = 1/(beta v) in [0,1].
inline std::vector<std::pair<double, double>> advisory_curve(int n_points = 101) {
    std::vector<std::pair<double, double>> c;
    for (int i = 0; i < n_points; ++i) {
        double x = static_cast<double>(i) / (n_points - 1);
        c.emplace_back(x, 1.51 * std::sqrt(std::max(0.0, 1.0 - x * x)));
    }
    return c;
}

}  // namespace qsk
