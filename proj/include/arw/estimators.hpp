#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "arw/engine.hpp"
#include "arw/walks.hpp"

namespace arw {

// Initial particle laws. Every law places active particles only; sleepers
// never appear in an initial condition.
struct InitialLaw {
    enum class Kind {
        Empty,
        DeltaOrigin,
        Deterministic,
        IIDPoisson,
        IIDBernoulli,  // one particle with probability rho, else none
        FilledBall,    // one active particle on the origin and each neighbor
    };

    Kind kind = Kind::Empty;
    double rho = 0.0;
    Kind background = Kind::Empty;  // FilledBall only: law outside the ball
    std::shared_ptr<const Configuration> fixed;  // Deterministic only

    static InitialLaw empty() { return {}; }
    static InitialLaw delta_origin() { return {Kind::DeltaOrigin, 0.0, Kind::Empty, nullptr}; }
    static InitialLaw poisson(double rho);
    static InitialLaw bernoulli(double rho);
    static InitialLaw filled_ball(Kind bg = Kind::Empty, double rho = 0.0);
    static InitialLaw deterministic(std::shared_ptr<const Configuration> cfg);

    // CLI names: empty, delta, poisson, bernoulli, filled, filled-poisson,
    // filled-bernoulli.
    static InitialLaw parse(const std::string& name, double rho);
    std::string name() const;
};

// Fills cfg.state from the law and zeroes odometer and kill count.
void sample_initial(Configuration& cfg, const InitialLaw& law, uint64_t law_seed);

struct EstimateReport {
    std::string what;
    int d = 0;
    int n = 0;
    double lambda = 0.0;
    std::string law;
    double rho = 0.0;
    uint64_t trials = 0;
    uint64_t master_seed = 0;
    double value = 0.0;
    double std_error = 0.0;
    double ci_lo = 0.0;
    double ci_hi = 0.0;
};

struct ChanceTailReport {
    int d = 0;
    int n = 0;
    double lambda = 0.0;
    std::string law;
    double rho = 0.0;
    uint64_t trials = 0;
    uint64_t master_seed = 0;
    std::vector<uint64_t> ch_histogram;  // index c: trials with Ch == c
    std::vector<double> tail;            // P(Ch >= k), k = 1..k_max
    std::vector<double> tail_se;
    double e_ach = 0.0;
    double e_ach_se = 0.0;
};

struct IdentityReport {
    int d = 0;
    int n = 0;
    double lambda = 0.0;
    std::string law;
    double rho = 0.0;
    uint64_t trials = 0;  // per stream
    uint64_t master_seed = 0;
    double direct = 0.0, direct_se = 0.0;       // occupation frequency
    double series = 0.0, series_se = 0.0;       // sum_k p_s p_j^{k-1} P(Ch >= k)
    double chance_mean = 0.0, chance_mean_se = 0.0;  // 1 - mean p_j^Ch
    double z_direct_series = 0.0;
    double z_direct_mean = 0.0;
    double z_series_mean = 0.0;
    bool pass = false;  // all |z| < 4
};

struct AchBoundReport {
    int d = 0;
    int n = 0;
    double lambda = 0.0;
    std::string law;
    double rho = 0.0;
    uint64_t trials = 0;
    uint64_t master_seed = 0;
    double e_ach = 0.0;
    double e_ach_se = 0.0;
    double e_r = 0.0;
    double e_r_se = 0.0;
    double slack = 0.0;  // e_r - e_ach
    bool pass = false;   // e_ach <= e_r + 3 * combined se
};

struct DensityPoint {
    int n = 0;
    int margin = 0;
    double density = 0.0;
    double std_error = 0.0;
};

struct MassConservationReport {
    int d = 0;
    double lambda = 0.0;
    double rho = 0.0;
    uint64_t trials = 0;
    uint64_t master_seed = 0;
    std::vector<DensityPoint> points;
};

struct BoundsReport {
    enum class ERSource { MonteCarlo, Asymptotic, Divergent };

    int d = 0;
    double lambda = 0.0;
    double p_s = 0.0;
    double p_j = 0.0;
    double lower = 0.0;
    double upper = 0.0;  // NaN when the returns expectation diverges
    double e_r = 0.0;
    double e_r_se = 0.0;
    ERSource er_source = ERSource::Divergent;
};

struct RhocCell {
    double rho = 0.0;
    double occupation = 0.0;
    double std_error = 0.0;
    double z = 0.0;  // (rho - occupation) / se
    bool supercritical = false;
};

struct RhocBracket {
    int d = 0;
    int n = 0;
    double lambda = 0.0;
    uint64_t trials = 0;
    uint64_t master_seed = 0;
    std::vector<RhocCell> cells;
    bool found = false;
    double lo = 0.0;
    double hi = 0.0;
    std::string note;
};

struct FiveStepReport {
    int d = 0;
    int n = 0;
    double lambda = 0.0;
    std::string law;
    double rho = 0.0;
    uint64_t trials = 0;
    uint64_t master_seed = 0;
    uint64_t n_jump1 = 0, n_jump2 = 0, n_both = 0;
    uint64_t n_tau1_sleeping = 0, n_ch_ge_2 = 0, n_trial1_slept = 0;
    double p_jump1 = 0.0, p_jump1_se = 0.0;
    double p_jump2 = 0.0, p_jump2_se = 0.0;
    double p_tau1_sleeping = 0.0, p_tau1_se = 0.0;
    double p_ch_ge_2 = 0.0, p_ch_ge_2_se = 0.0;
    double p_trial1_slept = 0.0;
    double z_independence = 0.0;  // jump1 vs jump2 in the 2x2 table
    uint64_t invariant_violations = 0;
};

EstimateReport estimate_occupation(int d, int n, const Params& params, const InitialLaw& law,
                                   uint64_t trials, uint64_t master_seed, bool parallel = true);

// Mean fraction of U = origin + neighbors filled (exactly one active
// particle) after weak stabilization with respect to U.
EstimateReport estimate_fill(int d, int n, const Params& params, const InitialLaw& law,
                             uint64_t trials, uint64_t master_seed, bool parallel = true);

ChanceTailReport chance_distribution(int d, int n, const Params& params, const InitialLaw& law,
                                     uint64_t trials, uint64_t master_seed, int k_max,
                                     bool parallel = true);

IdentityReport verify_identity(int d, int n, const Params& params, const InitialLaw& law,
                               uint64_t trials, uint64_t master_seed, bool parallel = true);

AchBoundReport verify_ach_bound(int d, int n, const Params& params, const InitialLaw& law,
                                uint64_t trials, uint64_t master_seed,
                                const ReturnsEstimate& returns, bool parallel = true);

// margin < 0 means n/2 per box.
MassConservationReport mass_conservation_probe(int d, std::span<const int> n_list,
                                               const Params& params, double rho, uint64_t trials,
                                               uint64_t master_seed, int margin = -1,
                                               bool parallel = true);

BoundsReport bounds_report(int d, const Params& params,
                           const std::optional<ReturnsEstimate>& returns);

RhocBracket rhoc_bracket(int d, int n, const Params& params, uint64_t trials,
                         uint64_t master_seed, std::span<const double> rho_grid,
                         bool parallel = true);

FiveStepReport five_step_stats(int d, int n, const Params& params, const InitialLaw& law,
                               uint64_t trials, uint64_t master_seed, bool parallel = true);

}  // namespace arw
