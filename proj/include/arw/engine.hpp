#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "arw/lattice.hpp"
#include "arw/stacks.hpp"

namespace arw {

// Site states: kSleeping holds exactly one sleeping particle, 0 is empty,
// k >= 1 counts active particles.
inline constexpr int32_t kSleeping = -1;

struct Configuration {
    std::shared_ptr<const Box> box;
    std::vector<int32_t> state;
    std::vector<uint64_t> odometer;
    uint64_t killed = 0;

    // Sleepers count one particle each.
    int64_t particles() const;
    bool any_sleeping() const;
    bool any_active() const;
    void reset();
};

Configuration make_config(std::shared_ptr<const Box> box);

enum class StabKind { True, Weak, Strong };

// Weak(U): sites of U are stable already at one particle, active or not.
// Strong(U): sites of U must end empty, and sleep instructions there are
// consumed without effect. Outside U both reduce to true stability.
struct StabilizationMode {
    StabKind kind = StabKind::True;
    std::vector<int64_t> u;  // sorted box indices

    static StabilizationMode true_stab() { return {}; }
    static StabilizationMode weak(std::vector<int64_t> u_sites);
    static StabilizationMode strong(std::vector<int64_t> u_sites);

    bool in_u(int64_t site) const;
};

bool is_site_stable(const Configuration& cfg, int64_t site, const StabilizationMode& mode);
bool is_stable(const Configuration& cfg, const StabilizationMode& mode);

// Order policies only pick which unstable site topples next; the abelian
// property makes the outcome identical for all of them (tested, not assumed).
enum class TopplingOrder { FifoDrain, LifoDrain, RandomSingle };

inline constexpr uint64_t kDefaultStepCeiling = 1'000'000'000;

struct StabilizeOptions {
    TopplingOrder order = TopplingOrder::FifoDrain;
    uint64_t order_seed = 0;  // RandomSingle only
    uint64_t step_ceiling = kDefaultStepCeiling;
};

// Stabilization is a.s. finite on a box (boundary killing), so hitting the
// ceiling signals an engine defect, never a long run to wait out.
struct StepCeilingError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct StabilizeStats {
    uint64_t instructions = 0;
};

struct ChanceRecord {
    uint64_t ch = 0;
    uint64_t ach = 0;
    std::vector<uint8_t> sleep_trials;  // one outcome per completed jump-out
    std::optional<uint64_t> first_success_iteration;  // 1-based
    Configuration final_config;
    // Snapshot taken at the first successful sleep trial with the origin put
    // to sleep; equals the true stabilization of the input. Filled only when
    // capture is requested.
    std::optional<Configuration> predicted_true;
};

// Slim result for high-volume trials: no configuration copies.
struct ChanceSummary {
    uint64_t ch = 0;
    uint64_t first_success = 0;  // 0 = no sleep trial succeeded
};

struct CoupledRun {
    bool origin_in_true_stab = false;
    ChanceRecord record;
    Configuration true_stab;
    bool coupling_holds = false;     // occupied <=> some trial succeeded
    bool prediction_matches = false;  // snapshot == true stabilization
};

struct FillResult {
    Configuration config;  // weak stabilization w.r.t. U
    uint64_t filled = 0;   // sites of U holding exactly one active particle
    double fill_fraction = 0.0;
};

struct FiveStepRecord {
    Site x;                 // neighbor entered by the first jump-out
    int64_t x_index = -1;
    bool jump1 = false;     // a particle reached the origin in step 3
    bool jump2 = false;     // the step-4 instruction jumped to the origin
    bool tau1_x_sleeping = false;
    bool ch_ge_2 = false;
    uint64_t ch = 0;
    bool trial1_slept = false;
};

struct LeastActionReport {
    uint64_t orders = 0;
    uint64_t violations = 0;
    uint64_t wake_sequences = 0;  // orders that woke at least one sleeper
};

// Toppling and stabilization on one box. The engine caches per-site stack
// keys and keeps scratch buffers, so methods are not reentrant: use one
// engine per thread. Configurations passed in must live on the same box.
class Engine {
public:
    explicit Engine(std::shared_ptr<const Box> box);

    const Box& box() const { return *box_; }
    const std::shared_ptr<const Box>& box_ptr() const { return box_; }

    // Next unconsumed instruction at `site`, without consuming it.
    Instruction peek(const Configuration& cfg, const StackSource& src, int64_t site) const;

    // One toppling: apply instruction odometer(site) and advance the
    // odometer. Rejects empty sites always and sleeping sites unless
    // `acceptable` permits waking first.
    void topple(Configuration& cfg, const StackSource& src, int64_t site,
                bool acceptable = false) const;

    StabilizeStats stabilize(Configuration& cfg, const StackSource& src,
                             const StabilizationMode& mode,
                             const StabilizeOptions& opts = {}) const;

    // The iterative procedure behind chance counting: weakly stabilize with
    // respect to the origin, then repeat {jump the origin particle out;
    // weakly stabilize} until the origin is empty. Input must be all-active.
    ChanceRecord strong_stabilize_iterative(const Configuration& sigma, const StackSource& src,
                                            const StabilizeOptions& opts = {},
                                            bool capture_prediction = false) const;

    // In-place variant used by estimator loops; cfg ends strongly stable at
    // the origin and only the integer outcomes are returned.
    ChanceSummary run_chances(Configuration& cfg, const StackSource& src,
                              const StabilizeOptions& opts = {}) const;

    // Runs the iterative procedure and an independent true stabilization on
    // the same stacks and checks their coupling both ways.
    CoupledRun coupled_true_vs_strong(const Configuration& sigma, const StackSource& src,
                                      const StabilizeOptions& opts = {}) const;

    // Weak stabilization w.r.t. U, reporting how much of U ends with exactly
    // one active particle.
    FillResult fill_attempt(const Configuration& sigma, const StackSource& src,
                            std::span<const int64_t> u,
                            const StabilizeOptions& opts = {}) const;

    // The five-step decomposition of strong stabilization. Requires tau to
    // hold exactly one active particle on the origin and each neighbor, all
    // neighbors inside the box, and no sleepers anywhere.
    FiveStepRecord five_step_experiment(const Configuration& tau, const StackSource& src,
                                        const StabilizeOptions& opts = {}) const;

    // Random acceptable-toppling sequences (including waking sleepers) must
    // consume at least the stabilizing odometer everywhere.
    LeastActionReport least_action_replay(const Configuration& cfg, const StackSource& src,
                                          int orders, uint64_t policy_seed, int max_wakes = 3,
                                          const StabilizeOptions& opts = {}) const;

private:
    struct Budget {
        uint64_t remaining;
        uint64_t used = 0;
        void spend() {
            if (remaining == 0)
                throw StepCeilingError("instruction ceiling exceeded; stabilization on a box "
                                       "terminates a.s., so this is an engine defect");
            --remaining;
            ++used;
        }
    };

    // One instruction at `site`; wake_ok permits sleeping input, sleep_noop
    // disables the sleep effect (strong mode inside U). Returns the landing
    // site of a jump, -2 for sleep instructions, -1 for a killed particle.
    int64_t topple_one(Configuration& cfg, const StackSource& src, int64_t site,
                       bool wake_ok, bool sleep_noop, Budget& budget) const;

    void stabilize_impl(Configuration& cfg, const StackSource& src,
                        const StabilizationMode& mode, const StabilizeOptions& opts,
                        Budget& budget) const;

    // Topples `site` until a jump instruction fires; sleeps are consumed
    // (re-activated by acceptable toppling). Returns the landing site or -1
    // when the particle is killed; slept reports whether any sleep occurred.
    // When `capture` points at an empty optional, the configuration at the
    // first sleep is stored there with `site` put to sleep.
    int64_t jump_out(Configuration& cfg, const StackSource& src, int64_t site,
                     bool& slept, Budget& budget,
                     std::optional<Configuration>* capture = nullptr) const;

    ChanceSummary run_chances_impl(Configuration& cfg, const StackSource& src,
                                   const StabilizeOptions& opts,
                                   std::vector<uint8_t>* trials_out,
                                   std::optional<Configuration>* predicted_out) const;

    void require_same_box(const Configuration& cfg) const;

    std::shared_ptr<const Box> box_;
    std::vector<uint64_t> keys_;
    mutable std::vector<int64_t> ring_;
    mutable std::vector<uint8_t> queued_;
    mutable std::vector<int64_t> list_;
};

}  // namespace arw
