#include "arw/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "arw/parallel.hpp"

namespace arw {

namespace {

// Estimators that need mutually independent trial populations shift the
// master seed through one of these tags before deriving per-trial seeds.
constexpr uint64_t kTagDirect = 0xD1EC7;
constexpr uint64_t kTagSeries = 0x5E21E5;
constexpr uint64_t kTagChanceMean = 0xC4A9CE;
constexpr uint64_t kTagRhocCell = 0x24C0;

uint64_t submaster(uint64_t master_seed, uint64_t tag, uint64_t index = 0) {
    return derive_trial_seed(master_seed, index, tag);
}

double binomial_se(uint64_t hits, uint64_t n) {
    const double p = static_cast<double>(hits) / static_cast<double>(n);
    return std::sqrt(std::max(p * (1.0 - p), 0.0) / static_cast<double>(n));
}

// Mean and standard error of per-trial integer counts.
void mean_se_from_sums(uint64_t sum, uint64_t sum_sq, uint64_t n, double& mean, double& se) {
    const double dn = static_cast<double>(n);
    mean = static_cast<double>(sum) / dn;
    const double var =
        n > 1 ? (static_cast<double>(sum_sq) - dn * mean * mean) / (dn - 1.0) : 0.0;
    se = std::sqrt(std::max(var, 0.0) / dn);
}

double pair_z(double a, double a_se, double b, double b_se) {
    const double denom = std::sqrt(a_se * a_se + b_se * b_se);
    if (denom == 0.0) return a == b ? 0.0 : std::numeric_limits<double>::infinity();
    return (a - b) / denom;
}

int poisson_draw(SplitMix64& rng, double rho) {
    // Knuth inversion by multiplication; fine for the small densities used.
    const double limit = std::exp(-rho);
    int k = 0;
    double p = 1.0;
    do {
        ++k;
        p *= rng.uniform();
    } while (p > limit);
    return k - 1;
}

struct TrialCtx {
    Engine eng;
    Configuration work;
};

TrialCtx make_trial_ctx(const std::shared_ptr<const Box>& box) {
    return TrialCtx{Engine(box), make_config(box)};
}

void check_params(int d, const Params& params) {
    if (params.d != d)
        throw std::invalid_argument("params dimension does not match the requested box");
}

// Histogram of per-trial Ch values plus the ACh sums derived from them.
struct ChanceTally {
    uint64_t trials = 0;
    std::vector<uint64_t> hist;

    void add(uint64_t ch) {
        ++trials;
        if (hist.size() <= ch) hist.resize(ch + 1, 0);
        ++hist[ch];
    }

    void merge(const ChanceTally& o) {
        trials += o.trials;
        if (hist.size() < o.hist.size()) hist.resize(o.hist.size(), 0);
        for (size_t i = 0; i < o.hist.size(); ++i) hist[i] += o.hist[i];
    }

    void ach_sums(uint64_t& sum, uint64_t& sum_sq) const {
        sum = 0;
        sum_sq = 0;
        for (size_t c = 1; c < hist.size(); ++c) {
            const uint64_t a = static_cast<uint64_t>(c) - 1;
            sum += hist[c] * a;
            sum_sq += hist[c] * a * a;
        }
    }

    // Mean and SE of g(Ch) = 1 - p_j^Ch, summed in fixed bin order so the
    // result does not depend on trial scheduling.
    void transform_mean_se(double p_j, double& mean, double& se) const {
        double sum = 0.0, sum_sq = 0.0;
        for (size_t c = 0; c < hist.size(); ++c) {
            const double g = 1.0 - std::pow(p_j, static_cast<double>(c));
            const double w = static_cast<double>(hist[c]);
            sum += w * g;
            sum_sq += w * g * g;
        }
        const double n = static_cast<double>(trials);
        mean = sum / n;
        const double var = trials > 1 ? (sum_sq - n * mean * mean) / (n - 1.0) : 0.0;
        se = std::sqrt(std::max(var, 0.0) / n);
    }
};

ChanceTally run_chance_trials(int d, int n, const Params& params, const InitialLaw& law,
                              uint64_t trials, uint64_t master_seed, bool parallel) {
    check_params(d, params);
    auto box = make_box(d, n);
    return par::run_trials<ChanceTally>(
        trials, [&] { return make_trial_ctx(box); },
        [&](TrialCtx& ctx, uint64_t t, ChanceTally& acc) {
            sample_initial(ctx.work, law, derive_trial_seed(master_seed, t, kStreamLaw));
            const StackSource src(derive_trial_seed(master_seed, t, kStreamStacks), params);
            acc.add(ctx.eng.run_chances(ctx.work, src).ch);
        },
        parallel);
}

}  // namespace

InitialLaw InitialLaw::poisson(double rho) {
    if (!(rho >= 0.0)) throw std::invalid_argument("density must be >= 0");
    return {Kind::IIDPoisson, rho, Kind::Empty, nullptr};
}

InitialLaw InitialLaw::bernoulli(double rho) {
    if (!(rho >= 0.0 && rho <= 1.0))
        throw std::invalid_argument("site occupation probability must lie in [0, 1]");
    return {Kind::IIDBernoulli, rho, Kind::Empty, nullptr};
}

InitialLaw InitialLaw::filled_ball(Kind bg, double rho) {
    if (bg != Kind::Empty && bg != Kind::IIDPoisson && bg != Kind::IIDBernoulli)
        throw std::invalid_argument("ball background must be empty or an i.i.d. law");
    if (bg == Kind::IIDBernoulli && !(rho >= 0.0 && rho <= 1.0))
        throw std::invalid_argument("site occupation probability must lie in [0, 1]");
    if (!(rho >= 0.0)) throw std::invalid_argument("density must be >= 0");
    return {Kind::FilledBall, rho, bg, nullptr};
}

InitialLaw InitialLaw::deterministic(std::shared_ptr<const Configuration> cfg) {
    if (!cfg) throw std::invalid_argument("deterministic law needs a configuration");
    return {Kind::Deterministic, 0.0, Kind::Empty, std::move(cfg)};
}

InitialLaw InitialLaw::parse(const std::string& name, double rho) {
    if (name == "empty") return empty();
    if (name == "delta") return delta_origin();
    if (name == "poisson") return poisson(rho);
    if (name == "bernoulli") return bernoulli(rho);
    if (name == "filled") return filled_ball(Kind::Empty, 0.0);
    if (name == "filled-poisson") return filled_ball(Kind::IIDPoisson, rho);
    if (name == "filled-bernoulli") return filled_ball(Kind::IIDBernoulli, rho);
    throw std::invalid_argument(
        "unknown law '" + name +
        "' (expected empty, delta, poisson, bernoulli, filled, filled-poisson, filled-bernoulli)");
}

std::string InitialLaw::name() const {
    switch (kind) {
        case Kind::Empty: return "empty";
        case Kind::DeltaOrigin: return "delta";
        case Kind::Deterministic: return "deterministic";
        case Kind::IIDPoisson: return "poisson";
        case Kind::IIDBernoulli: return "bernoulli";
        case Kind::FilledBall:
            if (background == Kind::IIDPoisson) return "filled-poisson";
            if (background == Kind::IIDBernoulli) return "filled-bernoulli";
            return "filled";
    }
    return "?";
}

void sample_initial(Configuration& cfg, const InitialLaw& law, uint64_t law_seed) {
    const Box& box = *cfg.box;
    const int64_t vol = box.volume();
    std::fill(cfg.odometer.begin(), cfg.odometer.end(), 0);
    cfg.killed = 0;

    switch (law.kind) {
        case InitialLaw::Kind::Empty:
            std::fill(cfg.state.begin(), cfg.state.end(), 0);
            return;
        case InitialLaw::Kind::DeltaOrigin:
            std::fill(cfg.state.begin(), cfg.state.end(), 0);
            cfg.state[static_cast<size_t>(box.origin_index())] = 1;
            return;
        case InitialLaw::Kind::Deterministic: {
            const Configuration& fixed = *law.fixed;
            if (!fixed.box || fixed.box->d() != box.d() || fixed.box->n() != box.n())
                throw std::invalid_argument("deterministic law drawn on a different box");
            cfg.state = fixed.state;
            return;
        }
        case InitialLaw::Kind::IIDPoisson: {
            SplitMix64 rng(law_seed);
            for (int64_t i = 0; i < vol; ++i)
                cfg.state[static_cast<size_t>(i)] = poisson_draw(rng, law.rho);
            return;
        }
        case InitialLaw::Kind::IIDBernoulli: {
            SplitMix64 rng(law_seed);
            for (int64_t i = 0; i < vol; ++i)
                cfg.state[static_cast<size_t>(i)] = rng.uniform() < law.rho ? 1 : 0;
            return;
        }
        case InitialLaw::Kind::FilledBall: {
            if (box.n() < 1)
                throw std::invalid_argument("filled-ball law needs the origin's neighbors inside the box");
            SplitMix64 rng(law_seed);
            for (int64_t i = 0; i < vol; ++i) {
                int32_t s = 0;
                if (law.background == InitialLaw::Kind::IIDPoisson)
                    s = poisson_draw(rng, law.rho);
                else if (law.background == InitialLaw::Kind::IIDBernoulli)
                    s = rng.uniform() < law.rho ? 1 : 0;
                cfg.state[static_cast<size_t>(i)] = s;
            }
            const int64_t origin = box.origin_index();
            cfg.state[static_cast<size_t>(origin)] = 1;
            for (int j = 0; j < 2 * box.d(); ++j)
                cfg.state[static_cast<size_t>(box.neighbor(origin, j))] = 1;
            return;
        }
    }
}

EstimateReport estimate_occupation(int d, int n, const Params& params, const InitialLaw& law,
                                   uint64_t trials, uint64_t master_seed, bool parallel) {
    check_params(d, params);
    if (trials < 1) throw std::invalid_argument("need at least one trial");
    auto box = make_box(d, n);
    const int64_t origin = box->origin_index();

    struct Tally {
        uint64_t trials = 0;
        uint64_t occupied = 0;
        void merge(const Tally& o) {
            trials += o.trials;
            occupied += o.occupied;
        }
    };
    const Tally tally = par::run_trials<Tally>(
        trials, [&] { return make_trial_ctx(box); },
        [&](TrialCtx& ctx, uint64_t t, Tally& acc) {
            sample_initial(ctx.work, law, derive_trial_seed(master_seed, t, kStreamLaw));
            const StackSource src(derive_trial_seed(master_seed, t, kStreamStacks), params);
            ctx.eng.stabilize(ctx.work, src, StabilizationMode::true_stab());
            ++acc.trials;
            acc.occupied += ctx.work.state[static_cast<size_t>(origin)] != 0;
        },
        parallel);

    EstimateReport rep;
    rep.what = "occupation";
    rep.d = d;
    rep.n = n;
    rep.lambda = params.lambda;
    rep.law = law.name();
    rep.rho = law.rho;
    rep.trials = tally.trials;
    rep.master_seed = master_seed;
    rep.value = static_cast<double>(tally.occupied) / static_cast<double>(tally.trials);
    rep.std_error = binomial_se(tally.occupied, tally.trials);
    rep.ci_lo = rep.value - 1.96 * rep.std_error;
    rep.ci_hi = rep.value + 1.96 * rep.std_error;
    return rep;
}

EstimateReport estimate_fill(int d, int n, const Params& params, const InitialLaw& law,
                             uint64_t trials, uint64_t master_seed, bool parallel) {
    check_params(d, params);
    if (n < 1) throw std::invalid_argument("fill estimation needs the origin's neighbors inside the box");
    if (trials < 1) throw std::invalid_argument("need at least one trial");
    auto box = make_box(d, n);
    std::vector<int64_t> ball{box->origin_index()};
    for (int j = 0; j < 2 * d; ++j) ball.push_back(box->neighbor(box->origin_index(), j));
    const StabilizationMode mode = StabilizationMode::weak(ball);
    const size_t u_size = mode.u.size();

    struct Tally {
        uint64_t trials = 0;
        uint64_t filled_sum = 0;
        uint64_t filled_sum_sq = 0;
        void merge(const Tally& o) {
            trials += o.trials;
            filled_sum += o.filled_sum;
            filled_sum_sq += o.filled_sum_sq;
        }
    };
    const Tally tally = par::run_trials<Tally>(
        trials, [&] { return make_trial_ctx(box); },
        [&](TrialCtx& ctx, uint64_t t, Tally& acc) {
            sample_initial(ctx.work, law, derive_trial_seed(master_seed, t, kStreamLaw));
            const StackSource src(derive_trial_seed(master_seed, t, kStreamStacks), params);
            ctx.eng.stabilize(ctx.work, src, mode);
            uint64_t filled = 0;
            for (int64_t s : mode.u)
                filled += ctx.work.state[static_cast<size_t>(s)] == 1;
            ++acc.trials;
            acc.filled_sum += filled;
            acc.filled_sum_sq += filled * filled;
        },
        parallel);

    EstimateReport rep;
    rep.what = "fill_fraction";
    rep.d = d;
    rep.n = n;
    rep.lambda = params.lambda;
    rep.law = law.name();
    rep.rho = law.rho;
    rep.trials = tally.trials;
    rep.master_seed = master_seed;
    double mean = 0.0, se = 0.0;
    mean_se_from_sums(tally.filled_sum, tally.filled_sum_sq, tally.trials, mean, se);
    rep.value = mean / static_cast<double>(u_size);
    rep.std_error = se / static_cast<double>(u_size);
    rep.ci_lo = rep.value - 1.96 * rep.std_error;
    rep.ci_hi = rep.value + 1.96 * rep.std_error;
    return rep;
}

ChanceTailReport chance_distribution(int d, int n, const Params& params, const InitialLaw& law,
                                     uint64_t trials, uint64_t master_seed, int k_max,
                                     bool parallel) {
    if (trials < 1) throw std::invalid_argument("need at least one trial");
    if (k_max < 1) throw std::invalid_argument("k_max must be >= 1");
    const ChanceTally tally = run_chance_trials(d, n, params, law, trials, master_seed, parallel);

    ChanceTailReport rep;
    rep.d = d;
    rep.n = n;
    rep.lambda = params.lambda;
    rep.law = law.name();
    rep.rho = law.rho;
    rep.trials = tally.trials;
    rep.master_seed = master_seed;
    rep.ch_histogram = tally.hist;
    rep.tail.resize(static_cast<size_t>(k_max), 0.0);
    rep.tail_se.resize(static_cast<size_t>(k_max), 0.0);
    uint64_t at_least = tally.trials;  // running count of trials with Ch >= k
    for (int k = 1; k <= k_max; ++k) {
        if (static_cast<size_t>(k) - 1 < tally.hist.size())
            at_least -= tally.hist[static_cast<size_t>(k) - 1];
        else
            at_least = 0;
        rep.tail[static_cast<size_t>(k) - 1] =
            static_cast<double>(at_least) / static_cast<double>(tally.trials);
        rep.tail_se[static_cast<size_t>(k) - 1] = binomial_se(at_least, tally.trials);
    }
    uint64_t ach_sum = 0, ach_sum_sq = 0;
    tally.ach_sums(ach_sum, ach_sum_sq);
    mean_se_from_sums(ach_sum, ach_sum_sq, tally.trials, rep.e_ach, rep.e_ach_se);
    return rep;
}

IdentityReport verify_identity(int d, int n, const Params& params, const InitialLaw& law,
                               uint64_t trials, uint64_t master_seed, bool parallel) {
    IdentityReport rep;
    rep.d = d;
    rep.n = n;
    rep.lambda = params.lambda;
    rep.law = law.name();
    rep.rho = law.rho;
    rep.trials = trials;
    rep.master_seed = master_seed;

    // Three independent trial populations: a direct occupation frequency and
    // two chance-based functionals.
    const EstimateReport direct = estimate_occupation(
        d, n, params, law, trials, submaster(master_seed, kTagDirect), parallel);
    rep.direct = direct.value;
    rep.direct_se = direct.std_error;

    {
        const ChanceTally tally = run_chance_trials(d, n, params, law, trials,
                                                    submaster(master_seed, kTagSeries), parallel);
        // Literal tail series sum_k p_s p_j^{k-1} P(Ch >= k).
        uint64_t at_least = tally.trials;
        double series = 0.0;
        double weight = params.p_s;
        for (size_t c = 0; c < tally.hist.size(); ++c) {
            at_least -= tally.hist[c];  // now = #{Ch >= c+1}
            series += weight * static_cast<double>(at_least) / static_cast<double>(tally.trials);
            weight *= params.p_j;
        }
        rep.series = series;
        double mean = 0.0, se = 0.0;
        tally.transform_mean_se(params.p_j, mean, se);
        rep.series_se = se;  // same per-trial functional, so the same se
    }

    {
        const ChanceTally tally = run_chance_trials(
            d, n, params, law, trials, submaster(master_seed, kTagChanceMean), parallel);
        tally.transform_mean_se(params.p_j, rep.chance_mean, rep.chance_mean_se);
    }

    rep.z_direct_series = pair_z(rep.direct, rep.direct_se, rep.series, rep.series_se);
    rep.z_direct_mean = pair_z(rep.direct, rep.direct_se, rep.chance_mean, rep.chance_mean_se);
    rep.z_series_mean = pair_z(rep.series, rep.series_se, rep.chance_mean, rep.chance_mean_se);
    rep.pass = std::abs(rep.z_direct_series) < 4.0 && std::abs(rep.z_direct_mean) < 4.0 &&
               std::abs(rep.z_series_mean) < 4.0;
    return rep;
}

AchBoundReport verify_ach_bound(int d, int n, const Params& params, const InitialLaw& law,
                                uint64_t trials, uint64_t master_seed,
                                const ReturnsEstimate& returns, bool parallel) {
    if (returns.d != d)
        throw std::invalid_argument("returns estimate was made for a different dimension");
    if (returns.divergent)
        throw std::invalid_argument("the bound needs a convergent returns expectation (d >= 3)");
    const ChanceTally tally = run_chance_trials(d, n, params, law, trials, master_seed, parallel);

    AchBoundReport rep;
    rep.d = d;
    rep.n = n;
    rep.lambda = params.lambda;
    rep.law = law.name();
    rep.rho = law.rho;
    rep.trials = tally.trials;
    rep.master_seed = master_seed;
    uint64_t ach_sum = 0, ach_sum_sq = 0;
    tally.ach_sums(ach_sum, ach_sum_sq);
    mean_se_from_sums(ach_sum, ach_sum_sq, tally.trials, rep.e_ach, rep.e_ach_se);
    rep.e_r = returns.mean;
    rep.e_r_se = returns.std_error;
    rep.slack = rep.e_r - rep.e_ach;
    const double combined = std::sqrt(rep.e_ach_se * rep.e_ach_se + rep.e_r_se * rep.e_r_se);
    rep.pass = rep.e_ach <= rep.e_r + 3.0 * combined;
    return rep;
}

MassConservationReport mass_conservation_probe(int d, std::span<const int> n_list,
                                               const Params& params, double rho, uint64_t trials,
                                               uint64_t master_seed, int margin, bool parallel) {
    check_params(d, params);
    if (n_list.empty()) throw std::invalid_argument("need at least one box radius");
    if (trials < 1) throw std::invalid_argument("need at least one trial");
    MassConservationReport rep;
    rep.d = d;
    rep.lambda = params.lambda;
    rep.rho = rho;
    rep.trials = trials;
    rep.master_seed = master_seed;
    const InitialLaw law = InitialLaw::poisson(rho);

    for (const int n : n_list) {
        const int m = margin < 0 ? n / 2 : margin;
        auto box = make_box(d, n);
        const std::vector<int64_t> inner = inner_box_sites(*box, m);

        struct Tally {
            uint64_t trials = 0;
            uint64_t sum = 0;
            uint64_t sum_sq = 0;
            void merge(const Tally& o) {
                trials += o.trials;
                sum += o.sum;
                sum_sq += o.sum_sq;
            }
        };
        const Tally tally = par::run_trials<Tally>(
            trials, [&] { return make_trial_ctx(box); },
            [&](TrialCtx& ctx, uint64_t t, Tally& acc) {
                sample_initial(ctx.work, law, derive_trial_seed(master_seed, t, kStreamLaw));
                const StackSource src(derive_trial_seed(master_seed, t, kStreamStacks), params);
                ctx.eng.stabilize(ctx.work, src, StabilizationMode::true_stab());
                uint64_t count = 0;
                for (int64_t s : inner)
                    count += ctx.work.state[static_cast<size_t>(s)] != 0;
                ++acc.trials;
                acc.sum += count;
                acc.sum_sq += count * count;
            },
            parallel);

        DensityPoint pt;
        pt.n = n;
        pt.margin = m;
        double mean = 0.0, se = 0.0;
        mean_se_from_sums(tally.sum, tally.sum_sq, tally.trials, mean, se);
        pt.density = mean / static_cast<double>(inner.size());
        pt.std_error = se / static_cast<double>(inner.size());
        rep.points.push_back(pt);
    }
    return rep;
}

BoundsReport bounds_report(int d, const Params& params,
                           const std::optional<ReturnsEstimate>& returns) {
    check_params(d, params);
    BoundsReport rep;
    rep.d = d;
    rep.lambda = params.lambda;
    rep.p_s = params.p_s;
    rep.p_j = params.p_j;
    const double x = params.p_s * params.p_j / (2.0 * d);
    rep.lower = params.p_s + x * (1.0 - x);

    if (returns.has_value()) {
        if (returns->d != d)
            throw std::invalid_argument("returns estimate was made for a different dimension");
        if (!returns->divergent) {
            rep.er_source = BoundsReport::ERSource::MonteCarlo;
            rep.e_r = returns->mean;
            rep.e_r_se = returns->std_error;
        }
    } else if (d >= 3) {
        rep.er_source = BoundsReport::ERSource::Asymptotic;
        rep.e_r = returns_asymptotic(d);
        rep.e_r_se = 0.0;
    }

    if (rep.er_source == BoundsReport::ERSource::Divergent) {
        rep.e_r = std::numeric_limits<double>::quiet_NaN();
        rep.e_r_se = 0.0;
        rep.upper = std::numeric_limits<double>::quiet_NaN();
    } else {
        rep.upper = params.p_s + params.p_s * params.p_j * rep.e_r;
    }
    return rep;
}

RhocBracket rhoc_bracket(int d, int n, const Params& params, uint64_t trials,
                         uint64_t master_seed, std::span<const double> rho_grid, bool parallel) {
    check_params(d, params);
    if (rho_grid.size() < 2) throw std::invalid_argument("need a grid of at least two densities");
    for (size_t i = 1; i < rho_grid.size(); ++i)
        if (!(rho_grid[i] > rho_grid[i - 1]))
            throw std::invalid_argument("density grid must be strictly increasing");

    RhocBracket rep;
    rep.d = d;
    rep.n = n;
    rep.lambda = params.lambda;
    rep.trials = trials;
    rep.master_seed = master_seed;
    rep.note =
        "finite-volume proxy: a cell is flagged supercritical when occupation + 3*SE < rho; "
        "the interval around the first flagged cell brackets the finite-n crossover, not the "
        "infinite-volume critical density";

    for (size_t i = 0; i < rho_grid.size(); ++i) {
        const double rho = rho_grid[i];
        const EstimateReport occ =
            estimate_occupation(d, n, params, InitialLaw::poisson(rho), trials,
                                submaster(master_seed, kTagRhocCell, i), parallel);
        RhocCell cell;
        cell.rho = rho;
        cell.occupation = occ.value;
        cell.std_error = occ.std_error;
        cell.z = occ.std_error > 0.0
                     ? (rho - occ.value) / occ.std_error
                     : (occ.value < rho ? std::numeric_limits<double>::infinity() : 0.0);
        cell.supercritical = occ.value + 3.0 * occ.std_error < rho;
        rep.cells.push_back(cell);
        if (cell.supercritical && !rep.found) {
            rep.found = true;
            rep.hi = rho;
            rep.lo = i > 0 ? rho_grid[i - 1] : rho_grid[0] - (rho_grid[1] - rho_grid[0]);
        }
    }
    if (!rep.found) {
        rep.lo = std::numeric_limits<double>::quiet_NaN();
        rep.hi = std::numeric_limits<double>::quiet_NaN();
    }
    return rep;
}

FiveStepReport five_step_stats(int d, int n, const Params& params, const InitialLaw& law,
                               uint64_t trials, uint64_t master_seed, bool parallel) {
    check_params(d, params);
    if (law.kind != InitialLaw::Kind::FilledBall)
        throw std::invalid_argument("the five-step experiment needs a filled-ball law");
    if (trials < 1) throw std::invalid_argument("need at least one trial");
    auto box = make_box(d, n);

    struct Tally {
        uint64_t trials = 0;
        uint64_t jump1 = 0, jump2 = 0, both = 0;
        uint64_t tau1 = 0, ch_ge_2 = 0, slept1 = 0;
        uint64_t violations = 0;
        void merge(const Tally& o) {
            trials += o.trials;
            jump1 += o.jump1;
            jump2 += o.jump2;
            both += o.both;
            tau1 += o.tau1;
            ch_ge_2 += o.ch_ge_2;
            slept1 += o.slept1;
            violations += o.violations;
        }
    };
    const Tally tally = par::run_trials<Tally>(
        trials, [&] { return make_trial_ctx(box); },
        [&](TrialCtx& ctx, uint64_t t, Tally& acc) {
            sample_initial(ctx.work, law, derive_trial_seed(master_seed, t, kStreamLaw));
            const StackSource src(derive_trial_seed(master_seed, t, kStreamStacks), params);
            const FiveStepRecord rec = ctx.eng.five_step_experiment(ctx.work, src);
            ++acc.trials;
            acc.jump1 += rec.jump1;
            acc.jump2 += rec.jump2;
            acc.both += rec.jump1 && rec.jump2;
            acc.tau1 += rec.tau1_x_sleeping;
            acc.ch_ge_2 += rec.ch_ge_2;
            acc.slept1 += rec.trial1_slept;
            if ((rec.jump1 && !rec.tau1_x_sleeping) || ((rec.jump1 || rec.jump2) && !rec.ch_ge_2))
                ++acc.violations;
        },
        parallel);

    FiveStepReport rep;
    rep.d = d;
    rep.n = n;
    rep.lambda = params.lambda;
    rep.law = law.name();
    rep.rho = law.rho;
    rep.trials = tally.trials;
    rep.master_seed = master_seed;
    rep.n_jump1 = tally.jump1;
    rep.n_jump2 = tally.jump2;
    rep.n_both = tally.both;
    rep.n_tau1_sleeping = tally.tau1;
    rep.n_ch_ge_2 = tally.ch_ge_2;
    rep.n_trial1_slept = tally.slept1;
    rep.invariant_violations = tally.violations;

    const double dn = static_cast<double>(tally.trials);
    rep.p_jump1 = static_cast<double>(tally.jump1) / dn;
    rep.p_jump1_se = binomial_se(tally.jump1, tally.trials);
    rep.p_jump2 = static_cast<double>(tally.jump2) / dn;
    rep.p_jump2_se = binomial_se(tally.jump2, tally.trials);
    rep.p_tau1_sleeping = static_cast<double>(tally.tau1) / dn;
    rep.p_tau1_se = binomial_se(tally.tau1, tally.trials);
    rep.p_ch_ge_2 = static_cast<double>(tally.ch_ge_2) / dn;
    rep.p_ch_ge_2_se = binomial_se(tally.ch_ge_2, tally.trials);
    rep.p_trial1_slept = static_cast<double>(tally.slept1) / dn;

    const double p1 = rep.p_jump1, p2 = rep.p_jump2;
    const double p11 = static_cast<double>(tally.both) / dn;
    const double denom = std::sqrt(p1 * p2 * (1.0 - p1) * (1.0 - p2));
    rep.z_independence = denom > 0.0 ? (p11 - p1 * p2) * std::sqrt(dn) / denom : 0.0;
    return rep;
}

}  // namespace arw
