#pragma once

#include <cstdint>
#include <vector>

namespace arw {

struct ReturnsSample {
    uint64_t returns = 0;
    uint64_t steps_used = 0;
    bool escaped = false;  // reached the escape radius; otherwise censored
};

struct ReturnsEstimate {
    int d = 0;
    double mean = 0.0;
    double std_error = 0.0;
    uint64_t trials = 0;
    double censoring_rate = 0.0;
    // Recurrent dimensions (d <= 2) have infinitely many returns in
    // expectation; the finite mean below is a truncation, never hidden.
    bool divergent = false;
    int64_t escape_radius = 0;
    uint64_t max_steps = 0;
    uint64_t master_seed = 0;
    // Per-walk return counts, capped at the histogram length; used for the
    // geometric-tail diagnostics.
    std::vector<uint64_t> histogram;
};

inline constexpr int64_t kDefaultEscapeRadius = 1000;
inline constexpr uint64_t kDefaultMaxSteps = 10'000'000;
inline constexpr double kCensoringThreshold = 1e-3;

// Nearest-neighbor walk from the origin, counting visits to the origin
// after time 0, stopped at the L-inf escape radius or after max_steps.
ReturnsSample simulate_returns(int d, uint64_t seed, int64_t escape_radius,
                               uint64_t max_steps);

// Aggregates i.i.d. walks; censored walks contribute the returns they
// accumulated before the step cap. Throws when censoring exceeds the
// threshold unless allow_censored overrides; d <= 2 always carries the
// divergence flag.
ReturnsEstimate expected_returns(int d, uint64_t trials, int64_t escape_radius,
                                 uint64_t max_steps, uint64_t master_seed,
                                 bool allow_censored = false, bool parallel = true);

// Leading-order surrogate 1/(2d) for the expected returns at large d.
double returns_asymptotic(int d);

}  // namespace arw
