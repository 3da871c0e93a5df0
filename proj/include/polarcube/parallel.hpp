/**
 * @file parallel.hpp
 * @brief Static row partitioning over std::thread.
 *
 * Work items must be independent; results never depend on the thread count.
 */
#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <string>
#include <thread>
#include <vector>

namespace polarcube {

/// Thread count from POLARCUBE_THREADS, or 1.
inline unsigned default_threads() {
    if (const char* env = std::getenv("POLARCUBE_THREADS")) {
        try {
            const long v = std::stol(env);
            if (v > 0) return static_cast<unsigned>(v);
        } catch (...) {
        }
    }
    return 1;
}

template <typename Fn>
void parallel_for(std::size_t count, unsigned threads, Fn&& fn) {
    threads = std::max(1u, threads);
    if (threads == 1 || count < 2) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    const std::size_t n = std::min<std::size_t>(threads, count);
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(n);
    pool.reserve(n);
    for (std::size_t t = 0; t < n; ++t) {
        const std::size_t begin = count * t / n;
        const std::size_t end = count * (t + 1) / n;
        pool.emplace_back([begin, end, &fn, &err = errors[t]] {
            try {
                for (std::size_t i = begin; i < end; ++i) fn(i);
            } catch (...) {
                err = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

} // namespace polarcube
