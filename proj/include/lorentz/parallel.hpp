#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace lorentz {

/// Samples per work block. Fixed, so the partition of the sample range never
/// depends on the number of workers.
inline constexpr std::uint64_t kBlockSize = 1024;

/// Worker count to use when the caller passes 0.
inline int default_workers() {
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

/// Runs `fn(begin, end)` over consecutive blocks of [0, items) and returns the
/// per-block partial results in block order. Workers pull blocks from a shared
/// counter; results are stored by block index, so any in-order fold of the
/// returned vector is independent of `workers`.
template <class Partial, class Fn>
std::vector<Partial> run_blocks(std::uint64_t items, int workers, Fn&& fn, std::uint64_t block = kBlockSize) {
    const std::uint64_t blocks = (items + block - 1) / block;
    std::vector<Partial> results(blocks);
    if (blocks == 0) return results;
    if (workers <= 0) workers = default_workers();
    const int threads = static_cast<int>(std::min<std::uint64_t>(static_cast<std::uint64_t>(workers), blocks));

    std::atomic<std::uint64_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto work = [&] {
        while (true) {
            const std::uint64_t b = next.fetch_add(1);
            if (b >= blocks) return;
            try {
                const std::uint64_t begin = b * block;
                results[b] = fn(begin, std::min(items, begin + block));
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!error) error = std::current_exception();
                next.store(blocks);
                return;
            }
        }
    };
    if (threads == 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(threads));
        for (int t = 0; t < threads; ++t) pool.emplace_back(work);
        for (auto& th : pool) th.join();
    }
    if (error) std::rethrow_exception(error);
    return results;
}

/// run_blocks followed by an in-order `+=` fold.
template <class Partial, class Fn>
Partial reduce_blocks(std::uint64_t items, int workers, Fn&& fn, std::uint64_t block = kBlockSize) {
    auto parts = run_blocks<Partial>(items, workers, std::forward<Fn>(fn), block);
    Partial total{};
    for (auto& p : parts) total += p;
    return total;
}

}  // namespace lorentz
