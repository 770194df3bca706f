#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace arw::par {

inline int max_workers() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

inline void set_workers(int n) {
#ifdef _OPENMP
    if (n > 0) omp_set_num_threads(n);
#else
    (void)n;
#endif
}

// Runs body(ctx, trial, tally) for every trial index, serially or across
// OpenMP threads. make_ctx builds one per-thread context (engines, scratch
// configurations); Tally must be default-constructible with a commutative
// merge(const Tally&). All tallies used in this project accumulate
// integers, so the merged result is byte-identical for any worker count;
// the serial path is the reference the parallel path is tested against.
template <class Tally, class MakeCtx, class Body>
Tally run_trials(uint64_t trials, MakeCtx&& make_ctx, Body&& body, bool parallel = true) {
#ifdef _OPENMP
    if (parallel && trials > 1 && omp_get_max_threads() > 1) {
        std::vector<Tally> parts(static_cast<size_t>(omp_get_max_threads()));
        std::string error;
#pragma omp parallel
        {
            auto ctx = make_ctx();
            Tally local{};
#pragma omp for schedule(static) nowait
            for (int64_t t = 0; t < static_cast<int64_t>(trials); ++t) {
                try {
                    body(ctx, static_cast<uint64_t>(t), local);
                } catch (const std::exception& e) {
#pragma omp critical
                    if (error.empty()) error = e.what();
                }
            }
            parts[static_cast<size_t>(omp_get_thread_num())] = std::move(local);
        }
        if (!error.empty()) throw std::runtime_error(error);
        Tally total{};
        for (auto& p : parts) total.merge(p);  // fixed thread order
        return total;
    }
#endif
    (void)parallel;
    auto ctx = make_ctx();
    Tally total{};
    for (uint64_t t = 0; t < trials; ++t) body(ctx, t, total);
    return total;
}

}  // namespace arw::par
