#pragma once

#include <algorithm>
#include <cstddef>
#include <thread>
#include <vector>

namespace nsn {

/// Calls fn(i) for i in [0, n), split into contiguous blocks over `threads`
/// workers. With threads <= 1 runs inline. fn must only touch per-index state.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t threads, Fn&& fn) {
    threads = std::min(threads, n);
    if (threads <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::jthread> workers;
    workers.reserve(threads);
    const std::size_t block = (n + threads - 1) / threads;
    for (std::size_t t = 0; t < threads; ++t) {
        const std::size_t begin = t * block;
        const std::size_t end = std::min(n, begin + block);
        if (begin >= end) break;
        workers.emplace_back([begin, end, &fn] {
            for (std::size_t i = begin; i < end; ++i) fn(i);
        });
    }
}

}  // namespace nsn
