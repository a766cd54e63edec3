#pragma once

#include <algorithm>
#include <thread>
#include <vector>

namespace h3d {

/// Runs fn(k) for k in [0, n) on contiguous blocks, one per hardware thread. Each index is
/// handled by exactly one worker, so results written per index are scheduling-independent.
template <typename Fn>
void parallel_for(int n, Fn&& fn) {
    const int workers = std::clamp(static_cast<int>(std::thread::hardware_concurrency()), 1, std::max(n, 1));
    if (workers <= 1) {
        for (int k = 0; k < n; ++k) fn(k);
        return;
    }
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    const int block = (n + workers - 1) / workers;
    for (int w = 0; w < workers; ++w) {
        const int begin = w * block, end = std::min(n, begin + block);
        if (begin >= end) break;
        pool.emplace_back([&fn, begin, end] {
            for (int k = begin; k < end; ++k) fn(k);
        });
    }
}

}  // namespace h3d
