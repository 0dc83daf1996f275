#pragma once

#include <algorithm>
#include <cstdlib>
#include <exception>
#include <functional>
#include <thread>
#include <vector>

namespace trajseg {

/// Runs fn(i) for i in [0, n) on up to `threads` threads, each taking a
/// contiguous block. Results must be written per index so the caller can
/// reduce them in a fixed order. The first exception is rethrown.
inline void parallel_for(int n, int threads, const std::function<void(int)>& fn) {
    threads = std::max(1, std::min(threads, n));
    if (threads == 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(threads));
    std::vector<std::thread> pool;
    for (int w = 0; w < threads; ++w) {
        pool.emplace_back([&, w] {
            const int lo = n * w / threads;
            const int hi = n * (w + 1) / threads;
            try {
                for (int i = lo; i < hi; ++i) fn(i);
            } catch (...) {
                errors[static_cast<std::size_t>(w)] = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

/// --threads value, falling back to TRAJSEG_THREADS, then 1.
inline int resolve_threads(int flag) {
    if (flag > 0) return flag;
    if (const char* env = std::getenv("TRAJSEG_THREADS")) {
        const int v = std::atoi(env);
        if (v > 0) return v;
    }
    return 1;
}

}  // namespace trajseg
