#ifndef JUMPRES_PARALLEL_HPP
#define JUMPRES_PARALLEL_HPP

#include <cstddef>
#include <thread>
#include <vector>

namespace jumpres {

/// Effective worker count: 0 means "use the hardware".
inline unsigned resolve_workers(unsigned requested) {
    if (requested > 0) return requested;
    unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? hw : 1;
}

/// Static range partition. Each worker owns a contiguous block of indices,
/// and the block layout depends only on (n, workers), never on timing, so
/// any per-index output is identical for every worker count.
template <typename Fn>
void parallel_for(std::size_t n, unsigned workers, Fn&& body) {
    workers = resolve_workers(workers);
    if (n == 0) return;
    if (workers <= 1 || n == 1) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    if (workers > n) workers = static_cast<unsigned>(n);
    std::vector<std::thread> pool;
    pool.reserve(workers);
    const std::size_t chunk = (n + workers - 1) / workers;
    for (unsigned w = 0; w < workers; ++w) {
        const std::size_t lo = static_cast<std::size_t>(w) * chunk;
        const std::size_t hi = lo + chunk < n ? lo + chunk : n;
        if (lo >= hi) break;
        pool.emplace_back([lo, hi, &body] {
            for (std::size_t i = lo; i < hi; ++i) body(i);
        });
    }
    for (auto& t : pool) t.join();
}

}  // namespace jumpres

#endif
