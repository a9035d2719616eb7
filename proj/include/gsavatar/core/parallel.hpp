// Copyright Contributors to the gsavatar project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace gsavatar {

namespace detail {
inline std::atomic<int> &
thread_count_setting() {
    static std::atomic<int> count{0};
    return count;
}
} // namespace detail

/// Number of worker threads used by parallel kernels. 0 selects hardware concurrency.
inline void
set_num_threads(int n) {
    detail::thread_count_setting().store(std::max(0, n));
}

inline int
num_threads() {
    const int n = detail::thread_count_setting().load();
    if (n > 0) {
        return n;
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

/// Runs fn(begin, end) over static contiguous blocks of [0, n). Block boundaries depend only on
/// n and the thread count, so any per-block state is reproducible.
template <class Fn>
void
parallel_for_blocks(std::size_t n, Fn &&fn, int threads = 0) {
    if (n == 0) {
        return;
    }
    const std::size_t workers =
        std::min<std::size_t>(n, static_cast<std::size_t>(threads > 0 ? threads : num_threads()));
    if (workers <= 1) {
        fn(std::size_t{0}, n);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers - 1);
    std::exception_ptr error;
    std::mutex error_mutex;
    auto run = [&](std::size_t w) {
        const std::size_t begin = n * w / workers;
        const std::size_t end   = n * (w + 1) / workers;
        try {
            fn(begin, end);
        } catch (...) {
            std::lock_guard<std::mutex> lock(error_mutex);
            if (!error) {
                error = std::current_exception();
            }
        }
    };
    for (std::size_t w = 1; w < workers; ++w) {
        pool.emplace_back(run, w);
    }
    run(0);
    for (auto &t : pool) {
        t.join();
    }
    if (error) {
        std::rethrow_exception(error);
    }
}

template <class Fn>
void
parallel_for(std::size_t n, Fn &&fn, int threads = 0) {
    parallel_for_blocks(
        n,
        [&](std::size_t begin, std::size_t end) {
            for (std::size_t i = begin; i < end; ++i) {
                fn(i);
            }
        },
        threads);
}

} // namespace gsavatar
