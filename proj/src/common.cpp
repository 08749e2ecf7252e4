#include "habmec/common.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <thread>

namespace habmec {

void FeatureNorm::apply(const double* raw, double* out) const {
    constexpr double kStretch = 0.57735026918962576;  // 1/sqrt(3)
    for (int i = 0; i < 3; ++i) {
        const double range = hi[i] - lo[i];
        double v = range > 0.0 ? (raw[i] - lo[i]) / range : 0.0;
        v = std::min(1.0, std::max(0.0, v));
        out[i] = v * kStretch;
    }
}

unsigned worker_count() {
    if (const char* env = std::getenv("HABMEC_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end && *end == '\0' && v >= 1 && v <= 1024) return unsigned(v);
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw ? hw : 1;
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
    if (n == 0) return;
    const std::size_t workers = std::min<std::size_t>(worker_count(), n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(n);
    std::atomic<bool> failed{false};
    auto body = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1, std::memory_order_relaxed);
            if (i >= n) return;
            try {
                fn(i);
            } catch (...) {
                errors[i] = std::current_exception();
                failed.store(true, std::memory_order_release);
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(workers - 1);
    for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(body);
    body();
    for (auto& t : pool) t.join();
    if (failed.load(std::memory_order_acquire))
        for (auto& e : errors)
            if (e) std::rethrow_exception(e);  // lowest index wins, deterministically
}

}  // namespace habmec
