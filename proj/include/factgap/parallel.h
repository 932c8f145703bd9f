#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace factgap {

/// Runs fn(i) for i in [0, n) on up to `workers` threads. If any call
/// throws, remaining work is abandoned and the exception of the lowest
/// failing index is rethrown.
template <class Fn>
void parallel_for(std::size_t n, std::size_t workers, Fn&& fn) {
    workers = std::clamp<std::size_t>(workers, 1, std::max<std::size_t>(n, 1));
    if (workers == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::vector<std::exception_ptr> errors(n);
    {
        std::vector<std::jthread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                while (!failed.load()) {
                    const auto i = next.fetch_add(1);
                    if (i >= n) return;
                    try {
                        fn(i);
                    } catch (...) {
                        errors[i] = std::current_exception();
                        failed.store(true);
                    }
                }
            });
        }
    }
    for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

}  // namespace factgap
