#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <span>
#include <vector>

#include "qsk/constants.hpp"
#include "qsk/core.hpp"
#include "qsk/parallel.hpp"
#include "qsk/rng.hpp"

namespace qsk {

struct JumpPath {
    std::vector<double> jumps;  // strictly increasing, in (0,1)
    double rate = 0.0;

    std::size_t count() const { return jumps.size(); }
};

// Inverse-CDF sampler for the Poisson(rate) count, optionally conditioned on even parity.
class CountSampler {
public:
    enum class Parity { any, even };

    CountSampler(double rate, Parity parity = Parity::even) : rate_(rate), parity_(parity) {
        if (!(rate > 0) || !std::isfinite(rate)) throw DomainError("CountSampler: rate must be positive");
        int step = parity == Parity::even ? 2 : 1;
        std::vector<double> lp;
        double lr = std::log(rate);
        double top = -INFINITY;
        for (int k = 0;; k += step) {
            double l = k * lr - std::lgamma(k + 1.0);
            lp.push_back(l);
            counts_.push_back(k);
            top = std::max(top, l);
            // past the mode the pmf decays faster than geometrically
            if (k > rate + 1 && l - top < std::log(1e-17)) break;
            if (k > 100000) throw NumericalError("CountSampler: table too large");
        }
        double s = 0.0;
        for (double l : lp) s += std::exp(l - top);
        double acc = 0.0;
        cdf_.resize(lp.size());
        pmf_.resize(lp.size());
        for (std::size_t i = 0; i < lp.size(); ++i) {
            pmf_[i] = std::exp(lp[i] - top) / s;
            acc += pmf_[i];
            cdf_[i] = acc;
        }
        cdf_.back() = 1.0;
    }

    int operator()(Stream& rng) const {
        double u = rng.uniform();
        auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
        std::size_t i = std::min<std::size_t>(it - cdf_.begin(), cdf_.size() - 1);
        return counts_[i];
    }

    double rate() const { return rate_; }
    Parity parity() const { return parity_; }
    const std::vector<int>& counts() const { return counts_; }
    const std::vector<double>& pmf() const { return pmf_; }

private:
    double rate_;
    Parity parity_;
    std::vector<int> counts_;
    std::vector<double> pmf_, cdf_;
};

inline JumpPath sample_with(const CountSampler& counts, Stream& rng) {
    JumpPath p;
    p.rate = counts.rate();
    int k = counts(rng);
    p.jumps.resize(k);
    for (;;) {
        for (double& t : p.jumps) t = rng.uniform();
        std::sort(p.jumps.begin(), p.jumps.end());
        if (std::adjacent_find(p.jumps.begin(), p.jumps.end()) == p.jumps.end()) break;
    }
    return p;
}

inline JumpPath sample_even_path(const CountSampler& counts, Stream& rng) {
    if (counts.parity() != CountSampler::Parity::even) throw DomainError("sample_even_path: sampler is not even-conditioned");
    return sample_with(counts, rng);
}

inline JumpPath sample_even_path(double rate, Stream& rng) { return sample_with(CountSampler(rate), rng); }

// Unconditioned Poisson(rate) jump path.
inline JumpPath sample_free_path(double rate, Stream& rng) {
    return sample_with(CountSampler(rate, CountSampler::Parity::any), rng);
}

inline int sigma_at(const JumpPath& path, double t) {
    if (!(t >= 0.0 && t <= 1.0)) throw DomainError("sigma_at: t outside [0,1]");
    auto n = std::upper_bound(path.jumps.begin(), path.jumps.end(), t) - path.jumps.begin();
    return (n % 2 == 0) ? 1 : -1;
}

// int_0^1 sigma_a sigma_b dt, by merging the two jump lists.
inline double overlap_integral(const JumpPath& a, const JumpPath& b) {
    double acc = 0.0, prev = 0.0;
    int sign = 1;
    std::size_t i = 0, j = 0;
    while (i < a.jumps.size() || j < b.jumps.size()) {
        double t;
        if (j >= b.jumps.size() || (i < a.jumps.size() && a.jumps[i] < b.jumps[j])) {
            t = a.jumps[i++];
        } else {
            t = b.jumps[j++];
        }
        acc += sign * (t - prev);
        sign = -sign;
        prev = t;
    }
    acc += sign * (1.0 - prev);
    return acc;
}

// int_0^1 sigma dt
inline double signed_length(const JumpPath& a) {
    double acc = 0.0, prev = 0.0;
    int sign = 1;
    for (double t : a.jumps) {
        acc += sign * (t - prev);
        sign = -sign;
        prev = t;
    }
    return acc + sign * (1.0 - prev);
}

// (1/N^2) sum_ij A_ij^2 with A_ij the pair overlaps, A_ii = 1.
inline double p_n_functional(std::span<const JumpPath> paths) {
    std::size_t n = paths.size();
    if (n < 2) throw DomainError("p_n_functional: need at least two paths");
    double off = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            double a = overlap_integral(paths[i], paths[j]);
            off += a * a;
        }
    return (static_cast<double>(n) + 2.0 * off) / static_cast<double>(n * n);
}

// entry k = int over [k/M, (k+1)/M] of sigma
inline std::vector<double> cell_signed_lengths(const JumpPath& path, int m_cells) {
    if (m_cells < 1) throw DomainError("cell_signed_lengths: m_cells must be >= 1");
    std::vector<double> s(m_cells, 0.0);
    const double M = m_cells;
    auto add = [&](double a, double b, int sign) {
        if (b <= a) return;
        int ka = std::min(m_cells - 1, static_cast<int>(a * M));
        int kb = std::min(m_cells - 1, static_cast<int>(b * M));
        if (ka == kb) {
            s[ka] += sign * (b - a);
            return;
        }
        s[ka] += sign * ((ka + 1) / M - a);
        for (int k = ka + 1; k < kb; ++k) s[k] += sign / M;
        s[kb] += sign * (b - kb / M);
    };
    double prev = 0.0;
    int sign = 1;
    for (double t : path.jumps) {
        add(prev, t, sign);
        sign = -sign;
        prev = t;
    }
    add(prev, 1.0, sign);
    return s;
}

// int int mu(t,t') sigma(t) sigma(t') dt dt', exact for the piecewise-constant path.
inline double mu_quadratic_form(const JumpPath& path, double beta_b) {
    std::vector<double> edges{0.0};
    edges.insert(edges.end(), path.jumps.begin(), path.jumps.end());
    edges.push_back(1.0);
    std::size_t k = edges.size() - 1;
    double q = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        int si = (i % 2 == 0) ? 1 : -1;
        q += mu_rect_integral(edges[i], edges[i + 1], edges[i], edges[i + 1], beta_b);
        for (std::size_t j = i + 1; j < k; ++j) {
            int sj = (j % 2 == 0) ? 1 : -1;
            q += 2.0 * si * sj * mu_rect_integral(edges[i], edges[i + 1], edges[j], edges[j + 1], beta_b);
        }
    }
    return q;
}

inline double two_set_correlation(double len_a, double len_b, double len_intersection, double beta_b) {
    constexpr double tol = 1e-12;
    if (len_a < 0 || len_b < 0 || len_intersection < -tol || len_intersection > std::min(len_a, len_b) + tol ||
        len_a + len_b - len_intersection > 1.0 + tol)
        throw DomainError("two_set_correlation: inconsistent lengths");
    double arg = beta_b * (1.0 - 2.0 * len_a - 2.0 * len_b + 4.0 * len_intersection);
    return std::exp(log_cosh(arg) - log_cosh(beta_b));
}

// Laplace transforms of the two conditional single-spin laws, w = sqrt(b^2 + g^2).
inline double laplace_conditional(double g, double beta, double b, int s) {
    if (!(beta > 0)) throw DomainError("laplace_conditional: beta must be positive");
    if (s != 1 && s != -1) throw DomainError("laplace_conditional: s must be +-1");
    double w = std::hypot(b, g);
    double bw = beta * w;
    // sinh(beta w)/w, with its small-argument series
    double shc = bw < 1e-4 ? beta * (1.0 + bw * bw / 6.0) : std::sinh(bw) / w;
    if (s == -1) return b * shc;
    return std::cosh(bw) + g * shc;
}

struct PathEnsemble {
    std::vector<JumpPath> paths;
    std::uint64_t seed = 0;
    double rate = 0.0;
};

inline PathEnsemble sample_ensemble(std::size_t count, double rate, std::uint64_t seed, unsigned workers = 1) {
    PathEnsemble e;
    e.seed = seed;
    e.rate = rate;
    e.paths.resize(count);
    CountSampler counts(rate);
    parallel_for(count, workers, [&](std::size_t i) {
        Stream rng(seed, Domain::path, i);
        e.paths[i] = sample_even_path(counts, rng);
    });
    return e;
}

inline constexpr std::uint8_t kEnsembleFormatVersion = 1;

// Layout (little-endian): u8 version, u64 count, f64 rate, u64 seed,
// then per path u64 k followed by k f64 jump times.
inline void write_ensemble(std::ostream& os, const PathEnsemble& e) {
    auto put = [&](const void* p, std::size_t n) { os.write(static_cast<const char*>(p), static_cast<std::streamsize>(n)); };
    std::uint8_t ver = kEnsembleFormatVersion;
    std::uint64_t count = e.paths.size();
    put(&ver, 1);
    put(&count, 8);
    put(&e.rate, 8);
    put(&e.seed, 8);
    for (const auto& p : e.paths) {
        std::uint64_t k = p.jumps.size();
        put(&k, 8);
        if (k) put(p.jumps.data(), 8 * k);
    }
    if (!os) throw std::runtime_error("write_ensemble: stream failure");
}

inline PathEnsemble read_ensemble(std::istream& is) {
    auto get = [&](void* p, std::size_t n) {
        is.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
        if (!is) throw std::runtime_error("read_ensemble: truncated input");
    };
    std::uint8_t ver = 0;
    get(&ver, 1);
    if (ver != kEnsembleFormatVersion) throw std::runtime_error("read_ensemble: unsupported format version");
    std::uint64_t count = 0;
    PathEnsemble e;
    get(&count, 8);
    get(&e.rate, 8);
    get(&e.seed, 8);
    e.paths.resize(count);
    for (auto& p : e.paths) {
        std::uint64_t k = 0;
        get(&k, 8);
        if (k > (1u << 26)) throw std::runtime_error("read_ensemble: implausible jump count");
        p.rate = e.rate;
        p.jumps.resize(k);
        if (k) get(p.jumps.data(), 8 * k);
    }
    return e;
}

}  // namespace qsk
