#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace qsk {

inline constexpr const char* kVersion = "0.4.0";

struct DomainError : std::domain_error {
    using std::domain_error::domain_error;
};

// Raised when a numerical gate fails (quadrature, eigensolver, ESS).
struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ModelParams {
    int n_spins = 2;
    double beta = 1.0;
    double v = 0.0;
    double b = 0.0;

    double lambda() const { return beta * beta * v * v / 4.0; }
    double beta_b() const { return beta * b; }

    void validate() const {
        if (n_spins < 2) throw DomainError("n_spins must be >= 2");
        if (!(beta > 0) || !std::isfinite(beta)) throw DomainError("beta must be positive");
        if (!(v >= 0) || !std::isfinite(v)) throw DomainError("v must be non-negative");
        if (!(b >= 0) || !std::isfinite(b)) throw DomainError("b must be non-negative");
    }

    // beta = 1, v = 2 sqrt(lambda), b = beta_b.
    static ModelParams dimensionless(int n, double lambda, double beta_b) {
        ModelParams p;
        p.n_spins = n;
        p.beta = 1.0;
        p.v = 2.0 * std::sqrt(lambda);
        p.b = beta_b;
        return p;
    }
};

struct EstimateWithError {
    double value = 0.0;
    double std_err = 0.0;
    long n_samples = 0;
    std::uint64_t seed = 0;
    double ess = 0.0;  // effective sample size where weights are involved

    double z_score(double reference) const {
        if (std_err <= 0) return value == reference ? 0.0 : INFINITY;
        return (value - reference) / std_err;
    }
};

inline constexpr double kLn2 = 0.69314718055994530942;
inline constexpr double kPi = 3.14159265358979323846;

}  // namespace qsk
