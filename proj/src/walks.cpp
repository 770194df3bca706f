#include "arw/walks.hpp"

#include <cmath>
#include <cstdlib>
#include <stdexcept>
#include <string>

#include "arw/parallel.hpp"
#include "arw/stacks.hpp"

namespace arw {

ReturnsSample simulate_returns(int d, uint64_t seed, int64_t escape_radius,
                               uint64_t max_steps) {
    if (d < 1) throw std::invalid_argument("dimension must be >= 1");
    if (escape_radius < 1) throw std::invalid_argument("escape radius must be >= 1");
    SplitMix64 rng(seed);
    std::vector<int64_t> pos(static_cast<size_t>(d), 0);
    int nonzero = 0;
    ReturnsSample out;
    const uint64_t two_d = 2 * static_cast<uint64_t>(d);
    for (uint64_t step = 0; step < max_steps; ++step) {
        const uint64_t j = rng.below(two_d);
        int64_t& c = pos[static_cast<size_t>(j >> 1)];
        nonzero -= (c != 0);
        c += (j & 1) ? 1 : -1;
        nonzero += (c != 0);
        if (nonzero == 0) {
            ++out.returns;
        } else if (c == escape_radius || c == -escape_radius) {
            out.steps_used = step + 1;
            out.escaped = true;
            return out;
        }
    }
    out.steps_used = max_steps;
    return out;
}

namespace {

constexpr size_t kHistogramCap = 64;

struct WalkTally {
    uint64_t trials = 0;
    uint64_t sum = 0;
    uint64_t sum_sq = 0;
    uint64_t censored = 0;
    std::vector<uint64_t> hist;

    void add(const ReturnsSample& s) {
        ++trials;
        sum += s.returns;
        sum_sq += s.returns * s.returns;
        if (!s.escaped) ++censored;
        const size_t bin = static_cast<size_t>(std::min<uint64_t>(s.returns, kHistogramCap - 1));
        if (hist.size() < kHistogramCap) hist.resize(kHistogramCap, 0);
        ++hist[bin];
    }

    void merge(const WalkTally& o) {
        trials += o.trials;
        sum += o.sum;
        sum_sq += o.sum_sq;
        censored += o.censored;
        if (hist.size() < o.hist.size()) hist.resize(o.hist.size(), 0);
        for (size_t i = 0; i < o.hist.size(); ++i) hist[i] += o.hist[i];
    }
};

}  // namespace

ReturnsEstimate expected_returns(int d, uint64_t trials, int64_t escape_radius,
                                 uint64_t max_steps, uint64_t master_seed,
                                 bool allow_censored, bool parallel) {
    if (trials < 1) throw std::invalid_argument("need at least one walk");
    const WalkTally tally = par::run_trials<WalkTally>(
        trials, [] { return 0; },
        [&](int&, uint64_t t, WalkTally& acc) {
            acc.add(simulate_returns(d, derive_trial_seed(master_seed, t, kStreamWalk),
                                     escape_radius, max_steps));
        },
        parallel);

    ReturnsEstimate est;
    est.d = d;
    est.trials = tally.trials;
    est.escape_radius = escape_radius;
    est.max_steps = max_steps;
    est.master_seed = master_seed;
    est.censoring_rate = static_cast<double>(tally.censored) / static_cast<double>(tally.trials);
    const double n = static_cast<double>(tally.trials);
    est.mean = static_cast<double>(tally.sum) / n;
    const double var =
        n > 1 ? (static_cast<double>(tally.sum_sq) - n * est.mean * est.mean) / (n - 1) : 0.0;
    est.std_error = std::sqrt(std::max(var, 0.0) / n);
    est.divergent = d <= 2 || est.censoring_rate > kCensoringThreshold;
    est.histogram = tally.hist;
    if (est.censoring_rate > kCensoringThreshold && !allow_censored)
        throw std::runtime_error(
            "censoring rate " + std::to_string(est.censoring_rate) +
            " exceeds 0.001: the truncated mean would be misleading; raise max_steps "
            "or pass the censoring override to report it anyway");
    return est;
}

double returns_asymptotic(int d) {
    if (d < 1) throw std::invalid_argument("dimension must be >= 1");
    return 1.0 / (2.0 * static_cast<double>(d));
}

}  // namespace arw
