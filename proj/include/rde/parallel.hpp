#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace rde {

/// Worker count used when a caller passes 0: the value set by
/// set_default_threads, else RDE_THREADS, else hardware_concurrency.
unsigned default_threads();
void set_default_threads(unsigned threads);

/// Runs f(i) for i in [0, n). Each index must write only its own output slot,
/// which makes results independent of scheduling. The exception of the
/// lowest failing index is rethrown.
template <typename F>
void parallel_for(std::size_t n, F&& f, unsigned threads = 0) {
    if (threads == 0) threads = default_threads();
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, n));
    if (threads <= 1) {
        for (std::size_t i = 0; i < n; ++i) f(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::mutex mutex;
    std::size_t error_index = n;
    std::exception_ptr error;
    auto worker = [&]() {
        for (;;) {
            const std::size_t i = next.fetch_add(1, std::memory_order_relaxed);
            if (i >= n || failed.load(std::memory_order_relaxed)) return;
            try {
                f(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(mutex);
                if (i < error_index) {
                    error_index = i;
                    error = std::current_exception();
                }
                failed.store(true);
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

/// parallel_for over [0, n) in contiguous blocks: f(block, lo, hi).
template <typename F>
void parallel_blocks(std::size_t n, std::size_t block, F&& f, unsigned threads = 0) {
    if (block == 0) block = 1;
    const std::size_t blocks = (n + block - 1) / block;
    parallel_for(
        blocks,
        [&](std::size_t b) { f(b, b * block, std::min(n, (b + 1) * block)); }, threads);
}

}  // namespace rde
