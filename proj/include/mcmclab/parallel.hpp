#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace mcmclab {

// Worker count from MCMCLAB_THREADS (0 or unset = hardware concurrency).
inline std::size_t worker_count() {
    std::size_t hw = std::max<unsigned>(1u, std::thread::hardware_concurrency());
    const char* env = std::getenv("MCMCLAB_THREADS");
    if (env == nullptr || *env == '\0') return hw;
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end == env || v <= 0) return hw;
    return static_cast<std::size_t>(v);
}

// Runs body(i) for i in [0, count). Each index must write only its own output
// slot; callers reduce afterwards in index order, so results never depend on
// the number of workers or on scheduling.
template <class Body>
void parallel_for(std::size_t count, Body&& body, std::size_t workers = worker_count()) {
    workers = std::max<std::size_t>(1, std::min(workers, count));
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i) body(i);
        return;
    }
    std::exception_ptr first_error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            try {
                // Static block partition: deterministic assignment of indices.
                const std::size_t lo = count * w / workers;
                const std::size_t hi = count * (w + 1) / workers;
                for (std::size_t i = lo; i < hi; ++i) body(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

} // namespace mcmclab
