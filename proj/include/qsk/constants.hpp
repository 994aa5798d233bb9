#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <vector>

#include "qsk/core.hpp"
#include "qsk/quadrature.hpp"

namespace qsk {

namespace detail {

inline void require_beta_b(double x) {
    if (!(x > 0) || !std::isfinite(x)) throw DomainError("beta_b must be positive and finite");
}

// sum_j c[j] * x^(lead + 2j), Horner in x^2
template <std::size_t K>
double even_series(const std::array<double, K>& c, int lead, double x) {
    double x2 = x * x, s = 0.0;
    for (std::size_t j = K; j-- > 0;) s = s * x2 + c[j];
    return s * std::pow(x, lead);
}

inline constexpr double kSeriesCut = 0.1;

}  // namespace detail

inline double log_cosh(double y) {
    y = std::fabs(y);
    return y + std::log1p(std::exp(-2.0 * y)) - kLn2;
}

// 1/cosh^2, also equal to 2p - m
inline double sech2(double x) {
    double e = std::exp(-2.0 * std::fabs(x));
    return 4.0 * e / ((1.0 + e) * (1.0 + e));
}

inline double log_sech2(double x) {
    x = std::fabs(x);
    return std::log(4.0) - 2.0 * x - 2.0 * std::log1p(std::exp(-2.0 * x));
}

// mu as a function of the lag u = |t - t'| in [0,1]
inline double mu_lag(double u, double beta_b) {
    double c = beta_b;
    return (std::exp(-2.0 * c * u) + std::exp(-2.0 * c * (1.0 - u))) / (1.0 + std::exp(-2.0 * c));
}

// 1 - mu_lag, without cancellation
inline double one_minus_mu_lag(double u, double beta_b) {
    double c = beta_b;
    return std::expm1(-2.0 * c * u) * std::expm1(-2.0 * c * (1.0 - u)) / (1.0 + std::exp(-2.0 * c));
}

inline double mu(double t, double t_prime, double beta_b) {
    if (!(t >= 0.0 && t <= 1.0) || !(t_prime >= 0.0 && t_prime <= 1.0))
        throw DomainError("mu: times must lie in [0,1]");
    detail::require_beta_b(beta_b);
    return mu_lag(std::fabs(t - t_prime), beta_b);
}

inline double m_of(double beta_b) {
    detail::require_beta_b(beta_b);
    if (beta_b < 1e-8) return 1.0 - beta_b * beta_b / 3.0;
    return std::tanh(beta_b) / beta_b;
}

inline double p_of(double beta_b) { return 0.5 * (sech2(beta_b) + m_of(beta_b)); }

inline double p_n_of(int n, double beta_b) {
    if (n < 1) throw DomainError("p_n_of: n must be >= 1");
    double p = p_of(beta_b);
    return p + (1.0 - p) / n;
}

// m - p = (m - sech^2)/2
inline double m_minus_p(double x) {
    static constexpr std::array<double, 8> c{1.0 / 3, -4.0 / 15, 17.0 / 105, -248.0 / 2835,
                                             1382.0 / 31185, -43688.0 / 2027025, 929569.0 / 91216125,
                                             -51236656.0 / 10854718875.0};
    detail::require_beta_b(x);
    if (x < detail::kSeriesCut) return detail::even_series(c, 2, x);
    return 0.5 * (m_of(x) - sech2(x));
}

inline double c0_of(double beta_b) {
    static constexpr std::array<double, 8> c{4.0 / 15,          -136.0 / 315,          248.0 / 567,
                                             -11056.0 / 31185,  43688.0 / 173745,      -14873104.0 / 91216125,
                                             51236656.0 / 516891375.0, -7101778592.0 / 123743795175.0};
    detail::require_beta_b(beta_b);
    double x = beta_b;
    if (x < detail::kSeriesCut) return detail::even_series(c, 2, x);
    double s = sech2(x);
    return m_minus_p(x) / (4.0 * x * x) + s / 6.0 - 0.25 * s * s;
}

// G_N = ln(1 + p_N (e^{N lambda} - 1))
inline double g_n_of(int n, double lambda, double beta_b) {
    if (n < 1) throw DomainError("g_n_of: n must be >= 1");
    if (!(lambda >= 0) || !std::isfinite(lambda)) throw DomainError("g_n_of: lambda must be >= 0");
    double pn = p_n_of(n, beta_b);
    double a = n * lambda;
    if (a == 0.0) return 0.0;
    if (a < 1.0) return std::log1p(pn * std::expm1(a));
    return a + std::log(pn + (1.0 - pn) * std::exp(-a));
}

struct InfGResult {
    double value = 0.0;
    int argmin = 2;
    bool at_boundary = false;  // minimum sits at n_max
};

inline InfGResult inf_g_n_over_n(double lambda, double beta_b, int n_max) {
    if (n_max < 2) throw DomainError("inf_g_n_over_n: n_max must be >= 2");
    InfGResult r;
    r.value = std::numeric_limits<double>::infinity();
    for (int n = 2; n <= n_max; ++n) {
        double v = g_n_of(n, lambda, beta_b) / n;
        if (v < r.value) {
            r.value = v;
            r.argmin = n;
        }
    }
    r.at_boundary = (r.argmin == n_max && n_max > 2);
    return r;
}

namespace detail {

// ln int_0^1 dt sum_k C(N,k) a^k b^(N-k) exp((2k-N)^2 lambda/N), a,b = (1 +- mu(t,0))/2.
// This is the x-integral of W_N done in closed form (Gaussian moments).
inline double w_n_raw(int n, double lambda, double beta_b, int nodes) {
    Rule r = gauss_legendre(nodes, 0.0, 1.0);
    std::vector<double> lt(r.x.size());
    std::vector<double> terms(n + 1);
    for (std::size_t i = 0; i < r.x.size(); ++i) {
        double u = r.x[i];
        double la = std::log1p(-0.5 * one_minus_mu_lag(u, beta_b));
        double lb = std::log(0.5 * one_minus_mu_lag(u, beta_b));
        double mx = -std::numeric_limits<double>::infinity();
        for (int k = 0; k <= n; ++k) {
            double lbin = std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
            double d = 2.0 * k - n;
            terms[k] = lbin + k * la + (n - k) * lb + d * d * lambda / n;
            mx = std::max(mx, terms[k]);
        }
        double s = 0.0;
        for (int k = 0; k <= n; ++k) s += std::exp(terms[k] - mx);
        lt[i] = std::log(r.w[i]) + mx + std::log(s);
    }
    double mx = *std::max_element(lt.begin(), lt.end());
    double s = 0.0;
    for (double v : lt) s += std::exp(v - mx);
    return mx + std::log(s);
}

}  // namespace detail

inline Integral w_n_of(int n, double lambda, double beta_b, int quad_nodes = 64) {
    if (n < 2) throw DomainError("w_n_of: n must be >= 2");
    if (quad_nodes < 20) throw DomainError("w_n_of: quad_nodes must be >= 20");
    if (!(lambda >= 0)) throw DomainError("w_n_of: lambda must be >= 0");
    detail::require_beta_b(beta_b);
    Integral out;
    if (lambda == 0.0) return out;
    double a = detail::w_n_raw(n, lambda, beta_b, quad_nodes);
    double b = detail::w_n_raw(n, lambda, beta_b, 2 * quad_nodes);
    out.value = b;
    out.error = std::fabs(a - b);
    out.converged = out.error <= 1e-6 * std::fabs(b) + 1e-15;
    return out;
}

struct ClosedFormBundle {
    double m = 0, p = 0, p_n = 0, g_n = 0, c0 = 0, w_n = 0;
    double two_p_minus_m = 0;      // sech^2, computed directly
    double log_two_p_minus_m = 0;  // ln sech^2
};

inline ClosedFormBundle closed_forms(int n, double lambda, double beta_b, int quad_nodes = 64) {
    ClosedFormBundle c;
    c.m = m_of(beta_b);
    c.p = p_of(beta_b);
    c.p_n = p_n_of(n, beta_b);
    c.g_n = g_n_of(n, lambda, beta_b);
    c.c0 = c0_of(beta_b);
    c.w_n = n >= 2 ? w_n_of(n, lambda, beta_b, quad_nodes).value : c.g_n;
    c.two_p_minus_m = sech2(beta_b);
    c.log_two_p_minus_m = log_sech2(beta_b);
    return c;
}

// Positive gaps of the chain 0 < m^2 < p < m < min{1,2p} <= 2p < (1+p)m,
// each evaluated without cancellation.
struct MomentGaps {
    double m2 = 0;                  // m^2 > 0
    double p_minus_m2 = 0;          // p - m^2
    double m_minus_p = 0;           // m - p
    double one_minus_m = 0;         // 1 - m
    double two_p_minus_m = 0;       // 2p - m
    double one_plus_p_m_minus_2p = 0;  // (1+p)m - 2p
};

inline MomentGaps moment_gaps(double x) {
    static constexpr std::array<double, 7> c_pm2{1.0 / 45,          -2.0 / 105,          8.0 / 675,
                                                 -3032.0 / 467775,  15643.0 / 4729725,   -68798.0 / 42567525,
                                                 14981996.0 / 19538493975.0};
    static constexpr std::array<double, 8> c_1m{1.0 / 3,           -2.0 / 15,           17.0 / 315,
                                                -62.0 / 2835,      1382.0 / 155925,     -21844.0 / 6081075,
                                                929569.0 / 638512875, -6404582.0 / 10854718875.0};
    static constexpr std::array<double, 7> c_g5{4.0 / 45,           -4.0 / 35,           452.0 / 4725,
                                                -30848.0 / 467775,  576824.0 / 14189175, -4959028.0 / 212837625,
                                                95338828.0 / 7514805375.0};
    detail::require_beta_b(x);
    MomentGaps g;
    double m = m_of(x), p = p_of(x);
    g.m2 = m * m;
    g.m_minus_p = m_minus_p(x);
    g.two_p_minus_m = sech2(x);
    if (x < detail::kSeriesCut) {
        g.p_minus_m2 = detail::even_series(c_pm2, 4, x);
        g.one_minus_m = detail::even_series(c_1m, 2, x);
        g.one_plus_p_m_minus_2p = detail::even_series(c_g5, 4, x);
    } else {
        g.p_minus_m2 = p - m * m;
        g.one_minus_m = (x - std::tanh(x)) / x;
        g.one_plus_p_m_minus_2p = (1.0 + p) * m - 2.0 * p;
    }
    return g;
}

// Gaps of max{0, lambda + ln(p_N)/N} < G_N/N < lambda.
struct GCorridor {
    double g_over_n = 0;
    double upper_gap = 0;  // lambda - G_N/N
    double lower_gap = 0;  // G_N/N - lambda - ln(p_N)/N
};

inline GCorridor g_corridor(int n, double lambda, double beta_b) {
    GCorridor c;
    double pn = p_n_of(n, beta_b);
    double a = n * lambda;
    c.g_over_n = g_n_of(n, lambda, beta_b) / n;
    c.upper_gap = -std::log1p((1.0 - pn) * std::expm1(-a)) / n;
    c.lower_gap = std::log1p((1.0 - pn) * std::exp(-a) / pn) / n;
    return c;
}

// int over [a0,a1]x[b0,b1] of mu(t,t'), exact.
inline double mu_rect_integral(double a0, double a1, double b0, double b1, double beta_b) {
    double c = beta_b;
    double m = m_of(c);
    auto G = [&](double u) {
        u = std::fabs(u);
        double e;
        if (c < 1e-100) {
            e = 0.5 * u * (1.0 - u);
        } else {
            e = std::expm1(-2.0 * c * u) * std::expm1(-2.0 * c * (1.0 - u)) /
                ((1.0 + std::exp(-2.0 * c)) * 4.0 * c * c);
        }
        return 0.5 * m * u - e;
    };
    return G(a1 - b0) - G(a1 - b1) - G(a0 - b0) + G(a0 - b1);
}

}  // namespace qsk
