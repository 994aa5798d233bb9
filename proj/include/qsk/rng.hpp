#pragma once

#include <cmath>
#include <cstdint>
#include <limits>

namespace qsk {

// Stream domains keep disorder and path randomness disjoint.
enum class Domain : std::uint64_t {
    path = 1,
    ensemble = 2,
    disorder = 3,
    free_path = 4,
    pair_system = 5,
    misc = 6,
};

inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

// splitmix64 stream keyed by (seed, domain, index). Any index can be
// opened directly, so results never depend on scheduling.
class Stream {
public:
    using result_type = std::uint64_t;

    Stream(std::uint64_t seed, Domain domain, std::uint64_t index)
        : state_(mix64(mix64(mix64(seed) ^ static_cast<std::uint64_t>(domain)) ^ index)) {}

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    result_type operator()() {
        state_ += 0x9E3779B97F4A7C15ULL;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    // uniform on the open interval (0,1)
    double uniform() { return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53; }

    // Marsaglia polar method; portable across standard libraries.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u, v, s;
        do {
            u = 2.0 * uniform() - 1.0;
            v = 2.0 * uniform() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        double f = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * f;
        has_spare_ = true;
        return u * f;
    }

private:
    std::uint64_t state_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace qsk
