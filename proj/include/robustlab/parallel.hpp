#pragma once

#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace robustlab {

// Runs fn(c) for chunk indices 0..nchunks-1, fanning out over up to `threads`
// workers. Chunks are claimed atomically, so fn must write results into
// per-chunk slots; callers reduce those slots in chunk order afterwards, which
// keeps every aggregate bitwise independent of the thread count. The first
// exception thrown by a worker is rethrown on the calling thread.
template <typename Fn>
void parallel_chunks(std::size_t nchunks, int threads, Fn&& fn) {
    if (threads <= 1 || nchunks <= 1) {
        for (std::size_t c = 0; c < nchunks; ++c) fn(c);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr err = nullptr;
    std::mutex err_mutex;
    auto worker = [&] {
        for (;;) {
            const std::size_t c = next.fetch_add(1);
            if (c >= nchunks) return;
            try {
                fn(c);
            } catch (...) {
                std::lock_guard<std::mutex> lock(err_mutex);
                if (!err) err = std::current_exception();
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    const std::size_t tn = std::min<std::size_t>(std::size_t(threads), nchunks);
    pool.reserve(tn);
    for (std::size_t t = 0; t < tn; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
    if (err) std::rethrow_exception(err);
}

}  // namespace robustlab
