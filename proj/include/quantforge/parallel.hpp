#pragma once

#include <atomic>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace quantforge {

// Runs fn(0..count-1) on up to `jobs` threads (0 = hardware concurrency).
// Exceptions are captured; the first one is rethrown after all threads join.
// Index order is unspecified — callers must write to disjoint slots.
inline void parallel_for(int jobs, size_t count, const std::function<void(size_t)>& fn) {
    int n = jobs;
    if (n <= 0) {
        const unsigned hc = std::thread::hardware_concurrency();
        n = hc > 0 ? static_cast<int>(hc) : 4;
    }
    if (n <= 1 || count <= 1) {
        for (size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    n = std::min(n, static_cast<int>(count));

    std::atomic<size_t> next{0};
    std::exception_ptr first_error;
    std::mutex err_mutex;
    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(n));
    for (int t = 0; t < n; ++t) {
        pool.emplace_back([&] {
            for (;;) {
                const size_t i = next.fetch_add(1);
                if (i >= count) return;
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(err_mutex);
                    if (!first_error) first_error = std::current_exception();
                    return;
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    if (first_error) std::rethrow_exception(first_error);
}

} // namespace quantforge
