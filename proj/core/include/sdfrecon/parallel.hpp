// Copyright (c) 2026 the sdfrecon authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>
#include <thread>
#include <vector>

namespace sdfrecon {

// Deterministic data-parallel loop: the index range is split into exactly
// `threads` contiguous chunks, chunk c running on worker c. Results written
// to per-index slots (or per-thread buffers reduced in chunk order) are
// bit-identical for a fixed thread count.
inline void parallel_for(std::size_t n, int threads,
                         const std::function<void(int thread, std::size_t begin, std::size_t end)>& fn) {
    if (threads <= 1 || n < 2) {
        fn(0, 0, n);
        return;
    }
    std::size_t t = static_cast<std::size_t>(threads);
    std::vector<std::thread> pool;
    pool.reserve(t);
    std::size_t chunk = (n + t - 1) / t;
    for (std::size_t c = 0; c < t; ++c) {
        std::size_t begin = c * chunk;
        std::size_t end = std::min(n, begin + chunk);
        if (begin >= end) break;
        pool.emplace_back(fn, static_cast<int>(c), begin, end);
    }
    for (auto& th : pool) th.join();
}

inline int default_threads() {
    unsigned hc = std::thread::hardware_concurrency();
    return hc == 0 ? 1 : static_cast<int>(hc);
}

}  // namespace sdfrecon
