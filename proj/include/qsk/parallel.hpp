#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <span>
#include <thread>
#include <vector>

namespace qsk {

inline constexpr const char* kWorkersEnv = "QSK_WORKERS";

inline unsigned default_workers() {
    if (const char* env = std::getenv(kWorkersEnv)) {
        char* end = nullptr;
        long w = std::strtol(env, &end, 10);
        if (end != env && w > 0) return static_cast<unsigned>(w);
    }
    unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1u : hw;
}

// Calls f(i) for every i in [0, n). f must only write to slots owned by i,
// so the outcome does not depend on the worker count.
template <class F>
void parallel_for(std::size_t n, unsigned workers, F&& f) {
    if (workers <= 1 || n < 2) {
        for (std::size_t i = 0; i < n; ++i) f(i);
        return;
    }
    unsigned nt = static_cast<unsigned>(std::min<std::size_t>(workers, n));
    std::size_t chunk = std::max<std::size_t>(1, n / (static_cast<std::size_t>(nt) * 8));
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto body = [&] {
        for (;;) {
            std::size_t start = next.fetch_add(chunk);
            if (start >= n) return;
            std::size_t stop = std::min(n, start + chunk);
            try {
                for (std::size_t i = start; i < stop; ++i) f(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                next.store(n);
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(nt - 1);
    for (unsigned t = 1; t < nt; ++t) pool.emplace_back(body);
    body();
    for (auto& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);
}

// Pairwise (tree) summation in index order.
inline double pairwise_sum(std::span<const double> x) {
    if (x.size() <= 16) {
        double s = 0.0;
        for (double v : x) s += v;
        return s;
    }
    std::size_t h = x.size() / 2;
    return pairwise_sum(x.first(h)) + pairwise_sum(x.subspan(h));
}

struct MeanVar {
    double mean = 0.0;
    double var = 0.0;  // unbiased sample variance
};

inline MeanVar mean_var(std::span<const double> x) {
    MeanVar r;
    std::size_t n = x.size();
    if (n == 0) return r;
    r.mean = pairwise_sum(x) / static_cast<double>(n);
    if (n < 2) return r;
    std::vector<double> d(n);
    for (std::size_t i = 0; i < n; ++i) d[i] = (x[i] - r.mean) * (x[i] - r.mean);
    r.var = pairwise_sum(d) / static_cast<double>(n - 1);
    return r;
}

// log of the mean of exp(x), with delta-method standard error and
// effective sample size of the weights.
struct LogMeanExp {
    double value = 0.0;
    double std_err = 0.0;
    double ess = 0.0;
    double shift = 0.0;
};

inline LogMeanExp log_mean_exp(std::span<const double> x) {
    LogMeanExp r;
    std::size_t n = x.size();
    if (n == 0) return r;
    double mx = *std::max_element(x.begin(), x.end());
    std::vector<double> w(n), w2(n);
    for (std::size_t i = 0; i < n; ++i) {
        w[i] = std::exp(x[i] - mx);
        w2[i] = w[i] * w[i];
    }
    MeanVar mv = mean_var(w);
    double s1 = mv.mean * static_cast<double>(n);
    double s2 = pairwise_sum(w2);
    r.shift = mx;
    r.value = mx + std::log(mv.mean);
    r.std_err = n > 1 ? std::sqrt(mv.var / static_cast<double>(n)) / mv.mean : 0.0;
    r.ess = s1 * s1 / s2;
    return r;
}

}  // namespace qsk
