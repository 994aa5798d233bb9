#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/tools/minima.hpp>
#include <json.hpp>

#include "qsk/constants.hpp"
#include "qsk/core.hpp"
#include "qsk/parallel.hpp"
#include "qsk/paths.hpp"
#include "qsk/quadrature.hpp"

namespace qsk {

// Symmetric piecewise-constant function on the uniform M x M grid of [0,1]^2.
struct GridFunction {
    int m_cells = 0;
    std::vector<double> values;  // row-major
    bool symmetric = true;

    GridFunction() = default;
    explicit GridFunction(int m, double fill = 0.0) : m_cells(m), values(static_cast<std::size_t>(m) * m, fill) {}

    static GridFunction constant(int m, double y) { return GridFunction(m, y); }

    double& operator()(int k, int l) { return values[static_cast<std::size_t>(k) * m_cells + l]; }
    double operator()(int k, int l) const { return values[static_cast<std::size_t>(k) * m_cells + l]; }

    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> matrix() const {
        return {values.data(), m_cells, m_cells};
    }

    // <f,g> = (1/M^2) sum f g
    double dot(const GridFunction& o) const {
        double s = 0.0;
        for (std::size_t i = 0; i < values.size(); ++i) s += values[i] * o.values[i];
        return s / (static_cast<double>(m_cells) * m_cells);
    }
    double norm2() const { return dot(*this); }
    double norm() const { return std::sqrt(norm2()); }

    double sup_distance(const GridFunction& o) const {
        double s = 0.0;
        for (std::size_t i = 0; i < values.size(); ++i) s = std::max(s, std::fabs(values[i] - o.values[i]));
        return s;
    }

    bool is_symmetric() const {
        for (int k = 0; k < m_cells; ++k)
            for (int l = k + 1; l < m_cells; ++l)
                if ((*this)(k, l) != (*this)(l, k)) return false;
        return true;
    }

    GridFunction operator-(const GridFunction& o) const {
        GridFunction r = *this;
        for (std::size_t i = 0; i < values.size(); ++i) r.values[i] -= o.values[i];
        return r;
    }
    GridFunction operator+(const GridFunction& o) const {
        GridFunction r = *this;
        for (std::size_t i = 0; i < values.size(); ++i) r.values[i] += o.values[i];
        return r;
    }
    GridFunction operator*(double a) const {
        GridFunction r = *this;
        for (double& v : r.values) v *= a;
        return r;
    }
    double mean() const {
        double s = 0.0;
        for (double v : values) s += v;
        return s / static_cast<double>(values.size());
    }
};

// Exact cell averages of mu.
inline GridFunction discretize_mu(int m_cells, double beta_b) {
    if (m_cells < 1) throw DomainError("discretize_mu: m_cells must be >= 1");
    detail::require_beta_b(beta_b);
    GridFunction g(m_cells);
    double M = m_cells, M2 = M * M;
    for (int k = 0; k < m_cells; ++k)
        for (int l = k; l < m_cells; ++l) {
            double v = M2 * mu_rect_integral(k / M, (k + 1) / M, l / M, (l + 1) / M, beta_b);
            g(k, l) = v;
            g(l, k) = v;
        }
    return g;
}

// Path ensemble projected onto the grid: row p holds the signed cell lengths of path p.
struct ProjectedEnsemble {
    int m_cells = 0;
    std::uint64_t seed = 0;
    double rate = 0.0;
    Eigen::MatrixXd s;   // paths x M
    Eigen::MatrixXd s2;  // elementwise square

    std::size_t size() const { return static_cast<std::size_t>(s.rows()); }
};

inline ProjectedEnsemble project(const PathEnsemble& e, int m_cells, unsigned workers = 1) {
    if (e.paths.empty()) throw DomainError("project: empty ensemble");
    ProjectedEnsemble p;
    p.m_cells = m_cells;
    p.seed = e.seed;
    p.rate = e.rate;
    p.s.resize(static_cast<Eigen::Index>(e.paths.size()), m_cells);
    parallel_for(e.paths.size(), workers, [&](std::size_t i) {
        auto c = cell_signed_lengths(e.paths[i], m_cells);
        for (int k = 0; k < m_cells; ++k) p.s(static_cast<Eigen::Index>(i), k) = c[k];
    });
    p.s2 = p.s.cwiseAbs2();
    return p;
}

namespace detail {

inline constexpr Eigen::Index kBlockRows = 8192;

inline std::size_t block_count(const ProjectedEnsemble& e) {
    return static_cast<std::size_t>((e.s.rows() + kBlockRows - 1) / kBlockRows);
}

}  // namespace detail

// <psi, xi> = sum_kl psi_kl s_k s_l for every path.
inline std::vector<double> quadratic_forms(const GridFunction& psi, const ProjectedEnsemble& e, unsigned workers = 1) {
    if (psi.m_cells != e.m_cells) throw DomainError("quadratic_forms: grid size mismatch");
    for (double v : psi.values)
        if (!std::isfinite(v)) throw DomainError("quadratic_forms: non-finite psi");
    Eigen::MatrixXd P = psi.matrix();
    std::vector<double> q(e.size());
    parallel_for(detail::block_count(e), workers, [&](std::size_t b) {
        Eigen::Index r0 = static_cast<Eigen::Index>(b) * detail::kBlockRows;
        Eigen::Index nr = std::min(detail::kBlockRows, e.s.rows() - r0);
        Eigen::MatrixXd x = e.s.middleRows(r0, nr) * P;
        Eigen::VectorXd v = x.cwiseProduct(e.s.middleRows(r0, nr)).rowwise().sum();
        for (Eigen::Index i = 0; i < nr; ++i) q[static_cast<std::size_t>(r0 + i)] = v[i];
    });
    return q;
}

inline EstimateWithError lambda_functional(const GridFunction& psi, const ProjectedEnsemble& e, unsigned workers = 1) {
    auto q = quadratic_forms(psi, e, workers);
    auto l = log_mean_exp(q);
    EstimateWithError r;
    r.value = l.value;
    r.std_err = l.std_err;
    r.ess = l.ess;
    r.n_samples = static_cast<long>(e.size());
    r.seed = e.seed;
    return r;
}

struct LambdaPrimeResult {
    GridFunction value;
    GridFunction std_err;  // empty unless requested
    double ess = 0.0;
    double asymmetry = 0.0;  // max |A - A^T| before symmetrization
};

inline LambdaPrimeResult lambda_prime(const GridFunction& psi, const ProjectedEnsemble& e, bool with_errors = false,
                                      unsigned workers = 1) {
    auto q = quadratic_forms(psi, e, workers);
    double mx = *std::max_element(q.begin(), q.end());
    Eigen::VectorXd w(static_cast<Eigen::Index>(q.size()));
    for (std::size_t i = 0; i < q.size(); ++i) w[static_cast<Eigen::Index>(i)] = std::exp(q[i] - mx);
    int M = e.m_cells;
    std::size_t nb = detail::block_count(e);
    std::vector<Eigen::MatrixXd> a(nb), b2(with_errors ? nb : 0), c2(with_errors ? nb : 0);
    std::vector<double> sw(nb), sw2(nb);
    parallel_for(nb, workers, [&](std::size_t b) {
        Eigen::Index r0 = static_cast<Eigen::Index>(b) * detail::kBlockRows;
        Eigen::Index nr = std::min(detail::kBlockRows, e.s.rows() - r0);
        auto sb = e.s.middleRows(r0, nr);
        auto wb = w.segment(r0, nr);
        a[b] = sb.transpose() * wb.asDiagonal() * sb;
        sw[b] = wb.sum();
        sw2[b] = wb.squaredNorm();
        if (with_errors) {
            Eigen::VectorXd wb2 = wb.cwiseAbs2();
            b2[b] = sb.transpose() * wb2.asDiagonal() * sb;
            auto tb = e.s2.middleRows(r0, nr);
            c2[b] = tb.transpose() * wb2.asDiagonal() * tb;
        }
    });
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(M, M);
    double W = 0.0, W2 = 0.0;
    for (std::size_t b = 0; b < nb; ++b) {
        A += a[b];
        W += sw[b];
        W2 += sw2[b];
    }
    double M2 = static_cast<double>(M) * M;
    LambdaPrimeResult r;
    r.ess = W * W / W2;
    r.value = GridFunction(M);
    for (int k = 0; k < M; ++k)
        for (int l = 0; l < M; ++l) r.asymmetry = std::max(r.asymmetry, std::fabs(A(k, l) - A(l, k)) * M2 / W);
    for (int k = 0; k < M; ++k)
        for (int l = k; l < M; ++l) {
            double v = std::clamp(0.5 * (A(k, l) + A(l, k)) * M2 / W, -1.0, 1.0);
            r.value(k, l) = v;
            r.value(l, k) = v;
        }
    if (with_errors) {
        Eigen::MatrixXd B = Eigen::MatrixXd::Zero(M, M), C = Eigen::MatrixXd::Zero(M, M);
        for (std::size_t b = 0; b < nb; ++b) {
            B += b2[b];
            C += c2[b];
        }
        r.std_err = GridFunction(M);
        for (int k = 0; k < M; ++k)
            for (int l = k; l < M; ++l) {
                double xb = r.value(k, l);
                double bkl = 0.5 * (B(k, l) + B(l, k)) * M2;
                double ckl = C(k, l) * M2 * M2;
                double var = (ckl - 2.0 * xb * bkl + xb * xb * W2) / (W * W);
                double se = std::sqrt(std::max(var, 0.0));
                r.std_err(k, l) = se;
                r.std_err(l, k) = se;
            }
    }
    return r;
}

inline EstimateWithError omega(const GridFunction& psi, double lambda, const ProjectedEnsemble& e, unsigned workers = 1) {
    if (!(lambda > 0)) throw DomainError("omega: lambda must be positive");
    EstimateWithError l = lambda_functional(psi, e, workers);
    l.value = psi.norm2() / (4.0 * lambda) - l.value;
    return l;
}

// Omega(phi) - Omega(psi) on a shared ensemble, with the paired standard error.
inline EstimateWithError omega_difference(const GridFunction& phi, const GridFunction& psi, double lambda,
                                          const ProjectedEnsemble& e, unsigned workers = 1) {
    auto qa = quadratic_forms(phi, e, workers);
    auto qb = quadratic_forms(psi, e, workers);
    auto la = log_mean_exp(qa), lb = log_mean_exp(qb);
    std::size_t n = qa.size();
    std::vector<double> infl(n);
    double ma = std::exp(la.value - la.shift), mb = std::exp(lb.value - lb.shift);
    for (std::size_t i = 0; i < n; ++i) infl[i] = std::exp(qa[i] - la.shift) / ma - std::exp(qb[i] - lb.shift) / mb;
    auto mv = mean_var(infl);
    EstimateWithError r;
    r.value = (phi.norm2() - psi.norm2()) / (4.0 * lambda) - (la.value - lb.value);
    r.std_err = std::sqrt(mv.var / static_cast<double>(n));
    r.n_samples = static_cast<long>(n);
    r.seed = e.seed;
    r.ess = std::min(la.ess, lb.ess);
    return r;
}

struct FixedPointReport {
    GridFunction psi;
    GridFunction psi_std_err;  // 2 lambda times the cellwise error of Lambda'(psi)
    EstimateWithError omega_value;
    int iterations = 0;
    double residual_norm = 0.0;
    std::vector<double> contraction_ratios;
    std::vector<double> update_sup;
    bool converged = false;
    bool noncontractive = false;
    double min_ess = 0.0;
    double max_asymmetry = 0.0;
};

enum class FixedPointStart { two_lambda_mu, two_lambda_one };

inline FixedPointReport fixed_point_solve(double lambda, double beta_b, const ProjectedEnsemble& e, double tol = 1e-8,
                                          int max_iter = 200, FixedPointStart start = FixedPointStart::two_lambda_mu,
                                          unsigned workers = 1) {
    if (!(lambda >= 0)) throw DomainError("fixed_point_solve: lambda must be >= 0");
    int M = e.m_cells;
    FixedPointReport rep;
    if (lambda == 0.0) {
        rep.psi = GridFunction(M);
        rep.psi_std_err = GridFunction(M);
        rep.converged = true;
        rep.omega_value.n_samples = static_cast<long>(e.size());
        rep.omega_value.seed = e.seed;
        return rep;
    }
    double two_l = 2.0 * lambda;
    GridFunction psi = start == FixedPointStart::two_lambda_mu ? discretize_mu(M, beta_b) * two_l
                                                               : GridFunction::constant(M, two_l);
    rep.noncontractive = two_l >= 1.0;
    rep.min_ess = INFINITY;
    double prev_norm = -1.0;
    LambdaPrimeResult lp;
    for (int it = 1; it <= max_iter; ++it) {
        lp = lambda_prime(psi, e, false, workers);
        rep.min_ess = std::min(rep.min_ess, lp.ess);
        rep.max_asymmetry = std::max(rep.max_asymmetry, lp.asymmetry);
        GridFunction next = lp.value * two_l;
        double upd = (next - psi).norm();
        double sup = next.sup_distance(psi);
        if (prev_norm > 0) {
            double ratio = upd / prev_norm;
            rep.contraction_ratios.push_back(ratio);
            if (ratio > 1.0) rep.noncontractive = true;
        }
        rep.update_sup.push_back(sup);
        prev_norm = upd;
        psi = std::move(next);
        rep.iterations = it;
        if (sup < tol) {
            rep.converged = true;
            break;
        }
    }
    lp = lambda_prime(psi, e, true, workers);
    rep.residual_norm = (psi - lp.value * two_l).norm();
    rep.psi_std_err = lp.std_err * two_l;
    rep.psi = psi;
    rep.omega_value = omega(psi, lambda, e, workers);
    rep.min_ess = std::min(rep.min_ess, lp.ess);
    return rep;
}

// Lambda(y 1) = ln( E[cosh(sqrt(2 y g^2 + (beta b)^2))] / cosh(beta b) ), g standard normal.
inline Integral lambda_constant(double y, double beta_b, double rel_tol = 1e-13) {
    if (!(y >= 0)) throw DomainError("lambda_constant: y must be >= 0");
    if (!(beta_b >= 0)) throw DomainError("lambda_constant: beta_b must be >= 0");
    Integral out;
    if (y == 0.0) return out;
    double a2 = 2.0 * y, c = beta_b;
    double shift = a2 > c ? 0.5 * a2 + 0.5 * c * c / a2 : c;
    auto h = [&](double g) { return std::exp(log_cosh(std::sqrt(a2 * g * g + c * c)) - shift); };
    Integral e = normal_expectation_even(h, 13.0 + std::sqrt(a2), rel_tol);
    out.value = shift + std::log(e.value) - (c == 0.0 ? 0.0 : log_cosh(c));
    out.error = e.error / e.value;
    out.converged = e.converged;
    return out;
}

struct StaticResult {
    double j = 0.0;
    double x = 0.0;  // minimizer
};

// J(lambda) = min_{x >= 0} lambda x^2 - Lambda(2 lambda x 1)
inline StaticResult static_approximation(double lambda, double beta_b) {
    if (!(lambda > 0)) throw DomainError("static_approximation: lambda must be positive");
    auto f = [&](double x) { return lambda * x * x - lambda_constant(2.0 * lambda * x, beta_b).value; };
    const int n = 201;
    const double xmax = 2.0;
    StaticResult best{0.0, 0.0};
    int ib = 0;
    for (int i = 1; i < n; ++i) {
        double x = xmax * i / (n - 1);
        double v = f(x);
        if (v < best.j) {
            best = {v, x};
            ib = i;
        }
    }
    double lo = xmax * std::max(ib - 1, 0) / (n - 1), hi = xmax * std::min(ib + 1, n - 1) / (n - 1);
    auto r = boost::math::tools::brent_find_minima(f, lo, hi, 50);
    if (r.second < best.j) best = {r.second, r.first};
    return best;
}

inline double taylor_prediction(double lambda, double beta_b) {
    return -p_of(beta_b) * lambda - 2.0 * c0_of(beta_b) * lambda * lambda;
}

inline nlohmann::json grid_to_json(const GridFunction& g, double beta_b, double lambda, std::uint64_t seed) {
    nlohmann::json j;
    j["m_cells"] = g.m_cells;
    j["beta_b"] = beta_b;
    j["lambda"] = lambda;
    j["seed"] = seed;
    j["symmetric"] = g.symmetric;
    j["values"] = g.values;
    return j;
}

inline GridFunction grid_from_json(const nlohmann::json& j) {
    GridFunction g(j.at("m_cells").get<int>());
    auto v = j.at("values").get<std::vector<double>>();
    if (v.size() != g.values.size()) throw std::runtime_error("grid_from_json: wrong number of values");
    g.values = std::move(v);
    g.symmetric = j.value("symmetric", true);
    if (g.symmetric && !g.is_symmetric()) throw std::runtime_error("grid_from_json: values not symmetric");
    return g;
}

inline nlohmann::json report_to_json(const FixedPointReport& r, double lambda, double beta_b, std::uint64_t seed) {
    nlohmann::json j;
    j["psi"] = grid_to_json(r.psi, beta_b, lambda, seed);
    j["omega"] = {{"value", r.omega_value.value}, {"std_err", r.omega_value.std_err},
                  {"n_samples", r.omega_value.n_samples}, {"seed", r.omega_value.seed}};
    j["iterations"] = r.iterations;
    j["residual_norm"] = r.residual_norm;
    j["contraction_ratios"] = r.contraction_ratios;
    j["update_sup"] = r.update_sup;
    j["converged"] = r.converged;
    j["noncontractive"] = r.noncontractive;
    j["min_ess"] = r.min_ess;
    j["max_asymmetry"] = r.max_asymmetry;
    return j;
}

}  // namespace qsk
