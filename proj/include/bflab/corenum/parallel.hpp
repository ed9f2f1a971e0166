#ifndef BFLAB_CORENUM_PARALLEL_HPP
#define BFLAB_CORENUM_PARALLEL_HPP

#include <algorithm>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace bflab::corenum {

/// Thread cap: BACKFLOW_THREADS if set to a positive integer, otherwise the
/// hardware concurrency (at least 1).
inline std::size_t default_threads()
{
    if (const char* env = std::getenv("BACKFLOW_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && v > 0)
            return static_cast< std::size_t >(v);
    }
    return std::max< std::size_t >(1, std::thread::hardware_concurrency());
}

/// Runs body(i) for i in [0, n). Each index is processed exactly once and
/// writes only its own outputs, so results do not depend on scheduling. The
/// first exception raised by any worker is rethrown on the caller's thread.
template < typename Body >
void parallel_for(std::size_t n, Body&& body, std::size_t threads = 0)
{
    if (threads == 0)
        threads = default_threads();
    threads = std::min(threads, n);
    if (threads <= 1) {
        for (std::size_t i = 0; i < n; ++i)
            body(i);
        return;
    }

    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector< std::thread > pool;
    pool.reserve(threads);
    for (std::size_t w = 0; w < threads; ++w) {
        pool.emplace_back([&, w] {
            try {
                for (std::size_t i = w; i < n; i += threads)
                    body(i);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure)
                    failure = std::current_exception();
            }
        });
    }
    for (auto& t : pool)
        t.join();
    if (failure)
        std::rethrow_exception(failure);
}

} // namespace bflab::corenum

#endif // BFLAB_CORENUM_PARALLEL_HPP
