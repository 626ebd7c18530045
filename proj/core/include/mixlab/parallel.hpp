#pragma once

#include <cstddef>
#include <functional>
#include <thread>
#include <vector>

namespace mixlab {

namespace detail {
inline int& thread_count_ref() {
    static int n = 1;
    return n;
}
} // namespace detail

/// Global worker count used by ensemble loops. 0 means hardware concurrency.
inline void set_thread_count(int n) {
    if (n <= 0) n = static_cast<int>(std::thread::hardware_concurrency());
    if (n <= 0) n = 1;
    detail::thread_count_ref() = n;
}

inline int thread_count() { return detail::thread_count_ref(); }

/// Runs fn(i) for i in [0, n). Each index writes only to its own output
/// slot, so results are identical for any thread count.
inline void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
    int workers = thread_count();
    if (workers <= 1 || n < 2) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::size_t w = static_cast<std::size_t>(workers);
    if (w > n) w = n;
    std::vector<std::thread> pool;
    pool.reserve(w);
    for (std::size_t t = 0; t < w; ++t) {
        pool.emplace_back([&, t] {
            for (std::size_t i = t; i < n; i += w) fn(i);
        });
    }
    for (auto& th : pool) th.join();
}

} // namespace mixlab
