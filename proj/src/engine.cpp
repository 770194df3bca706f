#include "arw/engine.hpp"

#include <algorithm>
#include <cstdlib>

namespace arw {

int64_t Configuration::particles() const {
    int64_t total = 0;
    for (int32_t s : state) total += (s == kSleeping) ? 1 : s;
    return total;
}

bool Configuration::any_sleeping() const {
    return std::find(state.begin(), state.end(), kSleeping) != state.end();
}

bool Configuration::any_active() const {
    return std::any_of(state.begin(), state.end(), [](int32_t s) { return s >= 1; });
}

void Configuration::reset() {
    std::fill(state.begin(), state.end(), 0);
    std::fill(odometer.begin(), odometer.end(), 0);
    killed = 0;
}

Configuration make_config(std::shared_ptr<const Box> box) {
    Configuration cfg;
    cfg.box = std::move(box);
    cfg.state.assign(static_cast<size_t>(cfg.box->volume()), 0);
    cfg.odometer.assign(static_cast<size_t>(cfg.box->volume()), 0);
    return cfg;
}

namespace {

std::vector<int64_t> sorted_unique(std::vector<int64_t> v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
    return v;
}

}  // namespace

StabilizationMode StabilizationMode::weak(std::vector<int64_t> u_sites) {
    return {StabKind::Weak, sorted_unique(std::move(u_sites))};
}

StabilizationMode StabilizationMode::strong(std::vector<int64_t> u_sites) {
    return {StabKind::Strong, sorted_unique(std::move(u_sites))};
}

bool StabilizationMode::in_u(int64_t site) const {
    return std::binary_search(u.begin(), u.end(), site);
}

bool is_site_stable(const Configuration& cfg, int64_t site, const StabilizationMode& mode) {
    const int32_t s = cfg.state[static_cast<size_t>(site)];
    switch (mode.kind) {
        case StabKind::True:
            return s <= 0;
        case StabKind::Weak:
            return s <= 0 || (s == 1 && mode.in_u(site));
        case StabKind::Strong:
            if (mode.in_u(site)) return s == 0;
            return s <= 0;
    }
    return false;
}

bool is_stable(const Configuration& cfg, const StabilizationMode& mode) {
    for (int64_t s = 0; s < cfg.box->volume(); ++s)
        if (!is_site_stable(cfg, s, mode)) return false;
    return true;
}

Engine::Engine(std::shared_ptr<const Box> box) : box_(std::move(box)) {
    const int64_t vol = box_->volume();
    keys_.resize(static_cast<size_t>(vol));
    std::vector<Coord> c(static_cast<size_t>(box_->d()), static_cast<Coord>(-box_->n()));
    for (int64_t idx = 0; idx < vol; ++idx) {
        keys_[static_cast<size_t>(idx)] = coord_key(c);
        for (int a = 0; a < box_->d(); ++a) {
            if (c[static_cast<size_t>(a)] < box_->n()) {
                ++c[static_cast<size_t>(a)];
                break;
            }
            c[static_cast<size_t>(a)] = static_cast<Coord>(-box_->n());
        }
    }
    queued_.assign(static_cast<size_t>(vol), 0);
}

void Engine::require_same_box(const Configuration& cfg) const {
    if (!cfg.box || cfg.box->d() != box_->d() || cfg.box->n() != box_->n())
        throw std::invalid_argument("configuration lives on a different box than the engine");
}

Instruction Engine::peek(const Configuration& cfg, const StackSource& src, int64_t site) const {
    require_same_box(cfg);
    return src.at_key(keys_[static_cast<size_t>(site)], cfg.odometer[static_cast<size_t>(site)]);
}

int64_t Engine::topple_one(Configuration& cfg, const StackSource& src, int64_t site,
                           bool wake_ok, bool sleep_noop, Budget& budget) const {
    int32_t s = cfg.state[static_cast<size_t>(site)];
    if (s == 0) throw std::invalid_argument("cannot topple an empty site");
    if (s == kSleeping) {
        if (!wake_ok)
            throw std::invalid_argument("toppling a sleeping site requires acceptable toppling");
        s = 1;  // wake first, then execute one instruction
    }
    budget.spend();
    const Instruction ins = src.at_key(keys_[static_cast<size_t>(site)],
                                       cfg.odometer[static_cast<size_t>(site)]);
    ++cfg.odometer[static_cast<size_t>(site)];
    if (ins.is_sleep()) {
        // Sleep takes effect only for a lone particle; with company the
        // instruction is consumed without a state change.
        cfg.state[static_cast<size_t>(site)] = (s == 1 && !sleep_noop) ? kSleeping : s;
        return -2;
    }
    cfg.state[static_cast<size_t>(site)] = (s == 1) ? 0 : s - 1;
    const int64_t land = box_->neighbor(site, ins.jump_dir);
    if (land < 0) {
        ++cfg.killed;
        return -1;
    }
    int32_t& t = cfg.state[static_cast<size_t>(land)];
    t = (t == kSleeping) ? 2 : t + 1;  // landing on a sleeper wakes it
    return land;
}

void Engine::topple(Configuration& cfg, const StackSource& src, int64_t site,
                    bool acceptable) const {
    require_same_box(cfg);
    if (site < 0 || site >= box_->volume()) throw std::out_of_range("site outside the box");
    Budget budget{1};
    topple_one(cfg, src, site, acceptable, false, budget);
}

void Engine::stabilize_impl(Configuration& cfg, const StackSource& src,
                            const StabilizationMode& mode, const StabilizeOptions& opts,
                            Budget& budget) const {
    const int64_t vol = box_->volume();
    const bool strong = mode.kind == StabKind::Strong;

    auto sleep_noop_at = [&](int64_t s) { return strong && mode.in_u(s); };
    // Inside the loops a popped site is known unstable, so a sleeping state
    // can only mean a strong-mode site of U, where waking is acceptable.
    auto drain = [&](int64_t s) -> void {
        const bool noop = sleep_noop_at(s);
        while (!is_site_stable(cfg, s, mode)) {
            const bool wake = cfg.state[static_cast<size_t>(s)] == kSleeping;
            const int64_t land = topple_one(cfg, src, s, wake, noop, budget);
            if (land >= 0 && !queued_[static_cast<size_t>(land)] &&
                !is_site_stable(cfg, land, mode)) {
                queued_[static_cast<size_t>(land)] = 1;
                ring_.push_back(land);
            }
        }
    };

    ring_.clear();
    for (int64_t s = 0; s < vol; ++s) {
        if (!is_site_stable(cfg, s, mode)) {
            queued_[static_cast<size_t>(s)] = 1;
            ring_.push_back(s);
        }
    }

    switch (opts.order) {
        case TopplingOrder::FifoDrain: {
            size_t head = 0;
            while (head < ring_.size()) {
                const int64_t s = ring_[head++];
                queued_[static_cast<size_t>(s)] = 0;
                drain(s);
                if (head > 4096 && head * 2 > ring_.size()) {
                    ring_.erase(ring_.begin(), ring_.begin() + static_cast<ptrdiff_t>(head));
                    head = 0;
                }
            }
            break;
        }
        case TopplingOrder::LifoDrain: {
            while (!ring_.empty()) {
                const int64_t s = ring_.back();
                ring_.pop_back();
                queued_[static_cast<size_t>(s)] = 0;
                drain(s);
            }
            break;
        }
        case TopplingOrder::RandomSingle: {
            SplitMix64 rng(opts.order_seed);
            while (!ring_.empty()) {
                const size_t i = static_cast<size_t>(rng.below(ring_.size()));
                const int64_t s = ring_[i];
                const bool wake = cfg.state[static_cast<size_t>(s)] == kSleeping;
                const int64_t land = topple_one(cfg, src, s, wake, sleep_noop_at(s), budget);
                if (is_site_stable(cfg, s, mode)) {
                    queued_[static_cast<size_t>(s)] = 0;
                    ring_[i] = ring_.back();
                    ring_.pop_back();
                }
                if (land >= 0 && !queued_[static_cast<size_t>(land)] &&
                    !is_site_stable(cfg, land, mode)) {
                    queued_[static_cast<size_t>(land)] = 1;
                    ring_.push_back(land);
                }
            }
            break;
        }
    }
}

StabilizeStats Engine::stabilize(Configuration& cfg, const StackSource& src,
                                 const StabilizationMode& mode,
                                 const StabilizeOptions& opts) const {
    require_same_box(cfg);
    for (int64_t s : mode.u)
        if (s < 0 || s >= box_->volume())
            throw std::invalid_argument("mode site set reaches outside the box");
    Budget budget{opts.step_ceiling};
    stabilize_impl(cfg, src, mode, opts, budget);
    return {budget.used};
}

int64_t Engine::jump_out(Configuration& cfg, const StackSource& src, int64_t site,
                         bool& slept, Budget& budget,
                         std::optional<Configuration>* capture) const {
    if (cfg.state[static_cast<size_t>(site)] != 1)
        throw std::logic_error("jump-out requires exactly one active particle");
    slept = false;
    for (;;) {
        budget.spend();
        const Instruction ins = src.at_key(keys_[static_cast<size_t>(site)],
                                           cfg.odometer[static_cast<size_t>(site)]);
        ++cfg.odometer[static_cast<size_t>(site)];
        if (ins.is_sleep()) {
            // Consumed with the particle immediately re-activated; the trial
            // counts as successful. In the coupled true stabilization this
            // instruction is where the particle settles, so snapshot here.
            if (!slept && capture && !capture->has_value()) {
                *capture = cfg;
                (*capture)->state[static_cast<size_t>(site)] = kSleeping;
            }
            slept = true;
            continue;
        }
        cfg.state[static_cast<size_t>(site)] = 0;
        const int64_t land = box_->neighbor(site, ins.jump_dir);
        if (land < 0) {
            ++cfg.killed;
            return -1;
        }
        int32_t& t = cfg.state[static_cast<size_t>(land)];
        t = (t == kSleeping) ? 2 : t + 1;
        return land;
    }
}

ChanceSummary Engine::run_chances_impl(Configuration& cfg, const StackSource& src,
                                       const StabilizeOptions& opts,
                                       std::vector<uint8_t>* trials_out,
                                       std::optional<Configuration>* predicted_out) const {
    require_same_box(cfg);
    if (cfg.any_sleeping())
        throw std::invalid_argument("the iterative procedure requires an all-active input");
    const int64_t origin = box_->origin_index();
    Budget budget{opts.step_ceiling};
    const StabilizationMode weak_origin = StabilizationMode::weak({origin});

    stabilize_impl(cfg, src, weak_origin, opts, budget);
    ChanceSummary out;
    while (cfg.state[static_cast<size_t>(origin)] != 0) {
        // Weak stabilization can leave the origin only empty or with one
        // active particle: it is never toppled alone, and sleep instructions
        // there fire only at two or more particles, where they do nothing.
        if (cfg.state[static_cast<size_t>(origin)] != 1)
            throw std::logic_error("weak stabilization left the origin multi-occupied or asleep");
        bool slept = false;
        auto* cap = (predicted_out && out.first_success == 0) ? predicted_out : nullptr;
        jump_out(cfg, src, origin, slept, budget, cap);
        stabilize_impl(cfg, src, weak_origin, opts, budget);
        ++out.ch;
        if (trials_out) trials_out->push_back(slept ? 1 : 0);
        if (slept && out.first_success == 0) out.first_success = out.ch;
    }
    return out;
}

ChanceSummary Engine::run_chances(Configuration& cfg, const StackSource& src,
                                  const StabilizeOptions& opts) const {
    return run_chances_impl(cfg, src, opts, nullptr, nullptr);
}

ChanceRecord Engine::strong_stabilize_iterative(const Configuration& sigma,
                                                const StackSource& src,
                                                const StabilizeOptions& opts,
                                                bool capture_prediction) const {
    Configuration cfg = sigma;
    ChanceRecord rec;
    std::optional<Configuration> predicted;
    const ChanceSummary sum = run_chances_impl(cfg, src, opts, &rec.sleep_trials,
                                               capture_prediction ? &predicted : nullptr);
    rec.ch = sum.ch;
    rec.ach = sum.ch > 0 ? sum.ch - 1 : 0;
    if (sum.first_success != 0) rec.first_success_iteration = sum.first_success;
    rec.final_config = std::move(cfg);
    rec.predicted_true = std::move(predicted);
    return rec;
}

CoupledRun Engine::coupled_true_vs_strong(const Configuration& sigma, const StackSource& src,
                                          const StabilizeOptions& opts) const {
    CoupledRun run;
    run.record = strong_stabilize_iterative(sigma, src, opts, true);

    Configuration t = sigma;
    stabilize(t, src, StabilizationMode::true_stab(), opts);
    run.origin_in_true_stab = t.state[static_cast<size_t>(box_->origin_index())] != 0;

    const bool success = run.record.first_success_iteration.has_value();
    run.coupling_holds = (run.origin_in_true_stab == success);
    if (success) {
        const auto& p = run.record.predicted_true;
        run.prediction_matches = p.has_value() && p->state == t.state &&
                                 p->odometer == t.odometer && p->killed == t.killed;
    } else {
        // With no successful trial every toppling of the procedure was a
        // legal toppling, so the two runs must coincide exactly.
        const auto& f = run.record.final_config;
        run.prediction_matches =
            f.state == t.state && f.odometer == t.odometer && f.killed == t.killed;
    }
    run.true_stab = std::move(t);
    return run;
}

FillResult Engine::fill_attempt(const Configuration& sigma, const StackSource& src,
                                std::span<const int64_t> u,
                                const StabilizeOptions& opts) const {
    require_same_box(sigma);
    if (sigma.any_sleeping())
        throw std::invalid_argument("fill attempt requires an all-active input");
    std::vector<int64_t> u_sites(u.begin(), u.end());
    FillResult res;
    res.config = sigma;
    Budget budget{opts.step_ceiling};
    const StabilizationMode mode = StabilizationMode::weak(std::move(u_sites));
    for (int64_t s : mode.u)
        if (s < 0 || s >= box_->volume())
            throw std::invalid_argument("fill site set reaches outside the box");
    stabilize_impl(res.config, src, mode, opts, budget);
    for (int64_t s : mode.u)
        if (res.config.state[static_cast<size_t>(s)] == 1) ++res.filled;
    res.fill_fraction =
        mode.u.empty() ? 0.0 : static_cast<double>(res.filled) / static_cast<double>(mode.u.size());
    return res;
}

FiveStepRecord Engine::five_step_experiment(const Configuration& tau, const StackSource& src,
                                            const StabilizeOptions& opts) const {
    require_same_box(tau);
    if (box_->n() < 1)
        throw std::invalid_argument("five-step experiment needs the origin's neighbors inside the box");
    if (tau.any_sleeping())
        throw std::invalid_argument("five-step experiment requires an all-active input");
    const int64_t origin = box_->origin_index();
    if (tau.state[static_cast<size_t>(origin)] != 1)
        throw std::invalid_argument("input does not fill the origin and its neighbors");
    for (int j = 0; j < 2 * box_->d(); ++j)
        if (tau.state[static_cast<size_t>(box_->neighbor(origin, j))] != 1)
            throw std::invalid_argument("input does not fill the origin and its neighbors");

    Configuration cfg = tau;
    Budget budget{opts.step_ceiling};
    const StabilizationMode weak_origin = StabilizationMode::weak({origin});
    FiveStepRecord rec;

    // Step 1: weakly stabilize with respect to the origin. Exactly one
    // active particle remains there.
    stabilize_impl(cfg, src, weak_origin, opts, budget);

    // Step 2: jump the particle out of the origin; X is the landing
    // neighbor. It held no active particle, so after the arrival state 2
    // certifies a woken sleeper and state 1 an empty site.
    bool slept = false;
    const int64_t x = jump_out(cfg, src, origin, slept, budget, nullptr);
    rec.trial1_slept = slept;
    rec.x_index = x;
    rec.x = box_->site_of(x);
    rec.tau1_x_sleeping = cfg.state[static_cast<size_t>(x)] == 2;

    // Step 3: with two particles at X, topple until one jumps out.
    if (cfg.state[static_cast<size_t>(x)] == 2) {
        for (;;) {
            const int64_t land = topple_one(cfg, src, x, false, false, budget);
            if (land == -2) continue;  // sleep is ineffective at two particles
            rec.jump1 = (land == origin);
            break;
        }
    }

    // Step 4: topple the lone particle at X once.
    {
        const int64_t land = topple_one(cfg, src, x, false, false, budget);
        rec.jump2 = (land == origin);
    }

    // Step 5: finish the strong stabilization, counting the remaining
    // jump-out iterations.
    stabilize_impl(cfg, src, weak_origin, opts, budget);
    uint64_t ch = 1;
    while (cfg.state[static_cast<size_t>(origin)] != 0) {
        bool s2 = false;
        jump_out(cfg, src, origin, s2, budget, nullptr);
        stabilize_impl(cfg, src, weak_origin, opts, budget);
        ++ch;
    }
    rec.ch = ch;
    rec.ch_ge_2 = ch >= 2;
    return rec;
}

LeastActionReport Engine::least_action_replay(const Configuration& cfg, const StackSource& src,
                                              int orders, uint64_t policy_seed, int max_wakes,
                                              const StabilizeOptions& opts) const {
    require_same_box(cfg);
    Configuration ref = cfg;
    {
        Budget budget{opts.step_ceiling};
        stabilize_impl(ref, src, StabilizationMode::true_stab(), StabilizeOptions{}, budget);
    }

    const int64_t vol = box_->volume();
    LeastActionReport rep;
    std::vector<int64_t> unstable, sleepers;
    for (int o = 0; o < orders; ++o) {
        SplitMix64 rng(derive_trial_seed(policy_seed, static_cast<uint64_t>(o), kStreamOrder));
        Configuration w = cfg;
        Budget budget{opts.step_ceiling};
        int wakes = 0;
        bool woke = false;
        for (;;) {
            unstable.clear();
            sleepers.clear();
            for (int64_t s = 0; s < vol; ++s) {
                if (w.state[static_cast<size_t>(s)] >= 1) unstable.push_back(s);
                else if (w.state[static_cast<size_t>(s)] == kSleeping) sleepers.push_back(s);
            }
            if (unstable.empty()) {
                // Stable. Optionally wake a sleeper and keep going: the
                // resulting odometer must still dominate.
                if (wakes < max_wakes && !sleepers.empty() && rng.below(2) == 0) {
                    topple_one(w, src, sleepers[rng.below(sleepers.size())], true, false, budget);
                    ++wakes;
                    woke = true;
                    continue;
                }
                break;
            }
            if (wakes < max_wakes && !sleepers.empty() && rng.below(8) == 0) {
                topple_one(w, src, sleepers[rng.below(sleepers.size())], true, false, budget);
                ++wakes;
                woke = true;
            } else {
                topple_one(w, src, unstable[rng.below(unstable.size())], false, false, budget);
            }
        }
        ++rep.orders;
        if (woke) ++rep.wake_sequences;
        for (int64_t s = 0; s < vol; ++s) {
            if (w.odometer[static_cast<size_t>(s)] < ref.odometer[static_cast<size_t>(s)]) {
                ++rep.violations;
                break;
            }
        }
    }
    return rep;
}

}  // namespace arw
