#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/legendre.hpp>

#include "qsk/core.hpp"

namespace qsk {

struct Rule {
    std::vector<double> x;
    std::vector<double> w;
};

namespace detail {

inline Rule legendre_unit(int n) {
    static std::mutex mtx;
    static std::map<int, std::shared_ptr<const Rule>> cache;
    {
        std::lock_guard<std::mutex> lock(mtx);
        auto it = cache.find(n);
        if (it != cache.end()) return *it->second;
    }
    auto zeros = boost::math::legendre_p_zeros<double>(n);  // non-negative half
    Rule r;
    for (auto it = zeros.rbegin(); it != zeros.rend(); ++it) {
        double z = *it;
        if (z == 0.0) continue;
        r.x.push_back(-z);
    }
    for (double z : zeros) r.x.push_back(z);
    std::sort(r.x.begin(), r.x.end());
    r.w.resize(r.x.size());
    for (std::size_t i = 0; i < r.x.size(); ++i) {
        double x = r.x[i];
        double dp = boost::math::legendre_p_prime<double>(n, x);
        r.w[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    auto shared = std::make_shared<const Rule>(r);
    std::lock_guard<std::mutex> lock(mtx);
    cache.emplace(n, shared);
    return r;
}

}  // namespace detail

// n-point Gauss-Legendre rule on [a,b].
inline Rule gauss_legendre(int n, double a = -1.0, double b = 1.0) {
    if (n < 1) throw DomainError("gauss_legendre: n must be >= 1");
    Rule r = detail::legendre_unit(n);
    double h = 0.5 * (b - a), c = 0.5 * (a + b);
    for (std::size_t i = 0; i < r.x.size(); ++i) {
        r.x[i] = c + h * r.x[i];
        r.w[i] *= h;
    }
    return r;
}

// n-point Gauss-Hermite rule for weight exp(-x^2) (Golub-Welsch).
inline Rule gauss_hermite(int n) {
    if (n < 1) throw DomainError("gauss_hermite: n must be >= 1");
    Eigen::VectorXd diag = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd sub(std::max(n - 1, 0));
    for (int k = 1; k < n; ++k) sub[k - 1] = std::sqrt(0.5 * k);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
    es.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
    if (es.info() != Eigen::Success) throw NumericalError("gauss_hermite: eigensolver failed");
    Rule r;
    r.x.resize(n);
    r.w.resize(n);
    for (int i = 0; i < n; ++i) {
        r.x[i] = es.eigenvalues()[i];
        double v0 = es.eigenvectors()(0, i);
        r.w[i] = std::sqrt(kPi) * v0 * v0;
    }
    return r;
}

// Gauss-Hermite rule rescaled to the standard normal law.
inline Rule normal_hermite(int n) {
    Rule r = gauss_hermite(n);
    for (std::size_t i = 0; i < r.x.size(); ++i) {
        r.x[i] *= std::sqrt(2.0);
        r.w[i] /= std::sqrt(kPi);
    }
    return r;
}

struct Integral {
    double value = 0.0;
    double error = 0.0;
    bool converged = true;
};

inline double normal_pdf(double g) { return std::exp(-0.5 * g * g) / std::sqrt(2.0 * kPi); }

// E[h(g)] for an even function h and standard normal g, as
// 2 * int_0^upper phi(g) h(g) dg by adaptive Gauss-Kronrod.
// The caller picks `upper` past the mass of phi*h.
template <class H>
Integral normal_expectation_even(H h, double upper = 13.0, double rel_tol = 1e-13) {
    using GK = boost::math::quadrature::gauss_kronrod<double, 31>;
    double err = 0.0, l1 = 0.0;
    auto f = [&](double g) { return 2.0 * normal_pdf(g) * h(g); };
    Integral out;
    out.value = GK::integrate(f, 0.0, upper, 20, rel_tol, &err, &l1);
    out.error = err;
    out.converged = err <= 1e-10 * std::max(l1, 1e-300) || err < 1e-14;
    return out;
}

}  // namespace qsk
