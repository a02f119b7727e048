#pragma once

// Tiny deterministic parallel-for. Work items are indexed; each worker pulls
// the next index from a shared counter and writes results into its own slot,
// so the output never depends on scheduling. GHAZAL_FORGE_THREADS caps the
// worker count (useful for CI and for forcing serial execution).

#include <atomic>
#include <cstdlib>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace ghazalforge {

inline unsigned worker_count(std::size_t jobs) {
    unsigned n = std::thread::hardware_concurrency();
    if (n == 0) n = 1;
    if (const char* env = std::getenv("GHAZAL_FORGE_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end != env && v > 0) n = static_cast<unsigned>(v);
    }
    if (jobs < n) n = static_cast<unsigned>(jobs);
    return n == 0 ? 1 : n;
}

/// Run fn(i) for i in [0, n). Exceptions are collected and the one thrown by
/// the lowest index is rethrown once all workers have stopped.
template <class Fn>
void parallel_for(std::size_t n, Fn&& fn) {
    if (n == 0) return;
    const unsigned workers = worker_count(n);
    if (workers == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::mutex err_mutex;
    std::size_t err_index = n;
    std::exception_ptr err;
    auto body = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n) return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(err_mutex);
                if (i < err_index) {
                    err_index = i;
                    err = std::current_exception();
                }
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(body);
    for (auto& t : pool) t.join();
    if (err) std::rethrow_exception(err);
}

}  // namespace ghazalforge
