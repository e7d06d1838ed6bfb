#pragma once

// Deterministic fan-out helper. Tasks write to disjoint slots indexed by task
// id, so results are identical no matter how many worker threads run them.
// LAWLINE_THREADS caps the pool.

#include <atomic>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

namespace lawline {

inline unsigned thread_budget() {
    unsigned hw = std::thread::hardware_concurrency();
    if (hw == 0) hw = 1;
    if (const char* env = std::getenv("LAWLINE_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && v >= 1) return static_cast<unsigned>(std::min(v, 256L));
        return 1;
    }
    return hw;
}

template <class Fn>
void parallel_for(std::size_t n_tasks, Fn&& fn) {
    const unsigned budget = thread_budget();
    if (n_tasks == 0) return;
    if (budget <= 1 || n_tasks == 1) {
        for (std::size_t i = 0; i < n_tasks; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    const unsigned n_threads = static_cast<unsigned>(
        std::min<std::size_t>(budget, n_tasks));
    std::vector<std::thread> workers;
    workers.reserve(n_threads);
    for (unsigned t = 0; t < n_threads; ++t) {
        workers.emplace_back([&] {
            for (std::size_t i = next.fetch_add(1); i < n_tasks; i = next.fetch_add(1)) fn(i);
        });
    }
    for (auto& w : workers) w.join();
}

} // namespace lawline
