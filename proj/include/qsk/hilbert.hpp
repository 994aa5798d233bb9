#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <sstream>
#include <vector>

#include <Eigen/Dense>

#include "qsk/constants.hpp"
#include "qsk/core.hpp"
#include "qsk/quadrature.hpp"
#include "qsk/rng.hpp"

namespace qsk {

inline constexpr std::size_t kDefaultDimCap = 4096;

struct DisorderSample {
    int n_spins = 2;
    std::vector<double> couplings;  // strict upper triangle, row-major over (i<j)
    std::uint64_t seed = 0;
    std::uint64_t index = 0;

    static std::size_t offset(int n, int i, int j) {
        // 1-based i < j
        std::size_t r = static_cast<std::size_t>(i - 1);
        return r * static_cast<std::size_t>(n) - r * (r + 1) / 2 + static_cast<std::size_t>(j - i - 1);
    }

    double g(int i, int j) const {
        if (i == j || i < 1 || j < 1 || i > n_spins || j > n_spins)
            throw DomainError("DisorderSample::g: bad spin index");
        if (i > j) std::swap(i, j);
        return couplings[offset(n_spins, i, j)];
    }

    static DisorderSample draw(int n, std::uint64_t seed, std::uint64_t index) {
        DisorderSample s;
        s.n_spins = n;
        s.seed = seed;
        s.index = index;
        Stream rng(seed, Domain::disorder, index);
        s.couplings.resize(static_cast<std::size_t>(n) * (n - 1) / 2);
        for (double& g : s.couplings) g = rng.normal();
        return s;
    }

    static DisorderSample from_values(int n, std::vector<double> values) {
        if (values.size() != static_cast<std::size_t>(n) * (n - 1) / 2)
            throw DomainError("DisorderSample: need N(N-1)/2 couplings");
        DisorderSample s;
        s.n_spins = n;
        s.couplings = std::move(values);
        return s;
    }
};

// Sz eigenvalue of spin k+1 (bit k) in basis state x: bit 0 -> +1.
inline int spin_z(std::uint64_t x, int k) { return ((x >> k) & 1u) ? -1 : 1; }

// Diagonal of -(v/sqrt N) sum_{i<j} g_ij Sz_i Sz_j.
inline std::vector<double> diagonal_energies(const ModelParams& params, const DisorderSample& s) {
    int n = params.n_spins;
    if (s.n_spins != n) throw DomainError("diagonal_energies: sample size mismatch");
    for (double g : s.couplings)
        if (!std::isfinite(g)) throw DomainError("non-finite coupling");
    std::size_t dim = std::size_t{1} << n;
    double scale = -params.v / std::sqrt(static_cast<double>(n));
    std::vector<double> d(dim);
    for (std::size_t x = 0; x < dim; ++x) {
        double e = 0.0;
        for (int i = 1; i <= n; ++i)
            for (int j = i + 1; j <= n; ++j) e += s.couplings[DisorderSample::offset(n, i, j)] * spin_z(x, i - 1) * spin_z(x, j - 1);
        d[x] = scale * e;
    }
    return d;
}

struct DenseHamiltonian {
    std::size_t dim = 0;
    Eigen::MatrixXd matrix;
    ModelParams params;
};

inline DenseHamiltonian build_hamiltonian(const ModelParams& params, const DisorderSample& sample,
                                          std::size_t dim_cap = kDefaultDimCap) {
    params.validate();
    int n = params.n_spins;
    if (n > 62 || (std::size_t{1} << n) > dim_cap) throw DomainError("build_hamiltonian: dimension cap exceeded");
    DenseHamiltonian h;
    h.params = params;
    h.dim = std::size_t{1} << n;
    h.matrix = Eigen::MatrixXd::Zero(h.dim, h.dim);
    auto d = diagonal_energies(params, sample);
    for (std::size_t x = 0; x < h.dim; ++x) {
        h.matrix(x, x) = d[x];
        for (int k = 0; k < n; ++k) h.matrix(x, x ^ (std::size_t{1} << k)) = -params.b;
    }
    return h;
}

struct SpectrumResult {
    std::vector<double> eigenvalues;
    double log_z = 0.0;
    double free_energy = 0.0;
};

inline double log_sum_exp_neg(const std::vector<double>& e, double beta) {
    double e0 = *std::min_element(e.begin(), e.end());
    double s = 0.0;
    for (double v : e) s += std::exp(-beta * (v - e0));
    return -beta * e0 + std::log(s);
}

namespace detail {

inline void check_solver(const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>& es, const Eigen::MatrixXd& m) {
    if (es.info() != Eigen::Success) {
        std::ostringstream os;
        os << "eigensolver did not converge (dim " << m.rows() << ", max |entry| " << m.cwiseAbs().maxCoeff() << ")";
        throw NumericalError(os.str());
    }
}

}  // namespace detail

inline SpectrumResult spectrum(const DenseHamiltonian& h, double beta) {
    if (!h.matrix.allFinite()) throw DomainError("spectrum: non-finite matrix");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h.matrix, Eigen::EigenvaluesOnly);
    detail::check_solver(es, h.matrix);
    SpectrumResult r;
    r.eigenvalues.assign(es.eigenvalues().data(), es.eigenvalues().data() + h.dim);
    std::sort(r.eigenvalues.begin(), r.eigenvalues.end());
    r.log_z = log_sum_exp_neg(r.eigenvalues, beta);
    r.free_energy = -r.log_z / (beta * h.params.n_spins);
    return r;
}

// Gibbs diagonal <x|e^{-beta H}|x>/Z in the Sz basis.
inline std::vector<double> gibbs_diagonal_dense(const DenseHamiltonian& h, double beta, double* log_z = nullptr) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h.matrix);
    detail::check_solver(es, h.matrix);
    const auto& ev = es.eigenvalues();
    double e0 = ev.minCoeff();
    Eigen::VectorXd w(h.dim);
    for (std::size_t k = 0; k < h.dim; ++k) w[k] = std::exp(-beta * (ev[k] - e0));
    double z = w.sum();
    Eigen::VectorXd rho = es.eigenvectors().cwiseAbs2() * w / z;
    if (log_z) *log_z = -beta * e0 + std::log(z);
    return std::vector<double>(rho.data(), rho.data() + h.dim);
}

inline double gibbs_zz(const DenseHamiltonian& h, double beta, int i, int j) {
    int n = h.params.n_spins;
    if (i == j || i < 1 || j < 1 || i > n || j > n) throw DomainError("gibbs_zz: bad spin index");
    auto rho = gibbs_diagonal_dense(h, beta);
    double s = 0.0;
    for (std::size_t x = 0; x < h.dim; ++x) s += rho[x] * spin_z(x, i - 1) * spin_z(x, j - 1);
    return std::clamp(s, -1.0, 1.0);
}

inline double gibbs_z(const DenseHamiltonian& h, double beta, int i) {
    int n = h.params.n_spins;
    if (i < 1 || i > n) throw DomainError("gibbs_z: bad spin index");
    auto rho = gibbs_diagonal_dense(h, beta);
    double s = 0.0;
    for (std::size_t x = 0; x < h.dim; ++x) s += rho[x] * spin_z(x, i - 1);
    return s;
}

// Exact Gibbs data via the two global spin-flip parity blocks (dimension 2^(N-1) each).
struct GibbsData {
    std::vector<double> eigenvalues;  // sorted, both blocks
    double log_z = 0.0;
    std::vector<double> rho;  // normalized Gibbs diagonal, length 2^N
};

inline GibbsData gibbs_by_parity(const ModelParams& params, const DisorderSample& sample) {
    params.validate();
    int n = params.n_spins;
    if (n > 16) throw DomainError("gibbs_by_parity: N too large");
    std::size_t dim = std::size_t{1} << n, half = dim / 2;
    std::size_t low = half - 1;
    auto d = diagonal_energies(params, sample);
    double beta = params.beta, b = params.b;
    GibbsData out;
    out.rho.assign(dim, 0.0);
    std::vector<Eigen::VectorXd> evs(2);
    std::vector<Eigen::MatrixXd> vecs(2);
    for (int sector = 0; sector < 2; ++sector) {
        double sign = sector == 0 ? 1.0 : -1.0;
        Eigen::MatrixXd hs = Eigen::MatrixXd::Zero(half, half);
        for (std::size_t x = 0; x < half; ++x) {
            hs(x, x) = d[x];
            for (int k = 0; k + 1 < n; ++k) hs(x ^ (std::size_t{1} << k), x) += -b;
            hs(x ^ low, x) += -sign * b;
        }
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(hs);
        detail::check_solver(es, hs);
        evs[sector] = es.eigenvalues();
        vecs[sector] = es.eigenvectors();
        out.eigenvalues.insert(out.eigenvalues.end(), evs[sector].data(), evs[sector].data() + half);
    }
    std::sort(out.eigenvalues.begin(), out.eigenvalues.end());
    double e0 = out.eigenvalues.front();
    double z = 0.0;
    Eigen::VectorXd diag_half = Eigen::VectorXd::Zero(half);
    for (int sector = 0; sector < 2; ++sector) {
        Eigen::VectorXd w(half);
        for (std::size_t k = 0; k < half; ++k) w[k] = std::exp(-beta * (evs[sector][k] - e0));
        z += w.sum();
        diag_half += 0.5 * (vecs[sector].cwiseAbs2() * w);
    }
    out.log_z = -beta * e0 + std::log(z);
    for (std::size_t x = 0; x < half; ++x) {
        out.rho[x] = diag_half[x] / z;
        out.rho[x ^ (dim - 1)] = diag_half[x] / z;
    }
    return out;
}

inline double zz_from_rho(const std::vector<double>& rho, int i, int j) {
    double s = 0.0;
    for (std::size_t x = 0; x < rho.size(); ++x) s += rho[x] * spin_z(x, i - 1) * spin_z(x, j - 1);
    return std::clamp(s, -1.0, 1.0);
}

// beta E[f_2] = -E[ln Z_2]/2 over g ~ N(0,1).
inline Integral f2_quenched_exact(double lambda, double beta_b, double rel_tol = 1e-13) {
    if (!(lambda >= 0) || !(beta_b >= 0)) throw DomainError("f2_quenched_exact: bad parameters");
    double a2 = 2.0 * lambda, c = 2.0 * beta_b;
    auto h = [&](double g) {
        double r1 = std::sqrt(a2) * std::fabs(g);
        double r2 = std::sqrt(a2 * g * g + c * c);
        double l1 = kLn2 + log_cosh(r1), l2 = kLn2 + log_cosh(r2);
        double mx = std::max(l1, l2);
        return mx + std::log(std::exp(l1 - mx) + std::exp(l2 - mx));
    };
    Integral e = normal_expectation_even(h, 13.0, rel_tol);
    e.value *= -0.5;
    e.error *= 0.5;
    return e;
}

// beta f_2^ann = -ln(2 e^lambda + 2 E[cosh(sqrt(2 lambda g^2 + (2 beta b)^2))])/2.
inline Integral f2_annealed_exact(double lambda, double beta_b, double rel_tol = 1e-13) {
    if (!(lambda >= 0) || !(beta_b >= 0)) throw DomainError("f2_annealed_exact: bad parameters");
    double a2 = 2.0 * lambda, c = 2.0 * beta_b;
    // shift by the exponent's maximum over g of sqrt(a2 g^2 + c^2) - g^2/2
    double shift = a2 > c ? 0.5 * a2 + 0.5 * c * c / a2 : c;
    auto h = [&](double g) { return std::exp(log_cosh(std::sqrt(a2 * g * g + c * c)) - shift); };
    double upper = 13.0 + std::sqrt(a2) * 2.0;
    Integral e = normal_expectation_even(h, upper, rel_tol);
    double l1 = kLn2 + lambda;
    double l2 = kLn2 + shift + std::log(e.value);
    double mx = std::max(l1, l2);
    Integral out;
    out.value = -0.5 * (mx + std::log(std::exp(l1 - mx) + std::exp(l2 - mx)));
    out.error = 0.5 * e.error / e.value;
    out.converged = e.converged;
    return out;
}

}  // namespace qsk
