#ifndef SPILLOVER_IV_PARALLEL_HPP
#define SPILLOVER_IV_PARALLEL_HPP

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cstddef>
#include <cstdlib>
#include <cstring>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace spiv {

/// Worker count: hardware concurrency, or SPILLOVER_IV_THREADS when set to a positive integer.
inline unsigned worker_count() {
    unsigned n = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("SPILLOVER_IV_THREADS")) {
        unsigned cap = 0;
        const auto [p, ec] = std::from_chars(env, env + std::strlen(env), cap);
        if (ec == std::errc{} && cap > 0) n = cap;
    }
    return n;
}

/// Runs fn(i) for i in [0, n). Callers write results by index, so the outcome does not
/// depend on scheduling. The first exception thrown by any task is rethrown.
namespace detail {
inline thread_local bool inside_worker = false;
}

/// Nested calls from inside a worker run serially.
template <class Fn>
void parallel_for(std::size_t n, Fn&& fn, unsigned workers = worker_count()) {
    workers = static_cast<unsigned>(std::min<std::size_t>(workers, n));
    if (workers <= 1 || detail::inside_worker) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto work = [&] {
        const bool outer = detail::inside_worker;
        detail::inside_worker = true;
        struct Restore {
            bool v;
            ~Restore() { detail::inside_worker = v; }
        } restore{outer};
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n) return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) error = std::current_exception();
                next.store(n);
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(workers - 1);
    for (unsigned t = 1; t < workers; ++t) pool.emplace_back(work);
    work();
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

/// Fixed-size index blocks; block boundaries depend only on n and the block size.
struct Blocks {
    std::size_t n = 0;
    std::size_t size = 4096;
    [[nodiscard]] std::size_t count() const noexcept { return (n + size - 1) / size; }
    [[nodiscard]] std::size_t begin(std::size_t b) const noexcept { return b * size; }
    [[nodiscard]] std::size_t end(std::size_t b) const noexcept { return std::min(n, (b + 1) * size); }
};

}  // namespace spiv

#endif  // SPILLOVER_IV_PARALLEL_HPP
