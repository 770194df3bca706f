#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "arw/lattice.hpp"

namespace arw {

// Model parameters. A walker at a site with no other particle present
// sleeps with probability p_s = lambda/(1+lambda) and otherwise jumps to
// a uniformly random neighbor; p_j = 1 - p_s.
struct Params {
    int d = 1;
    double lambda = 1.0;
    double p_s = 0.5;
    double p_j = 0.5;

    static Params make(int d, double lambda);
};

// One stack entry: either a sleep instruction or a jump in direction
// jump_dir (see lattice.hpp for the direction encoding).
struct Instruction {
    int32_t jump_dir = -1;  // -1 encodes sleep

    bool is_sleep() const { return jump_dir < 0; }
};

// 64-bit finalizer (splitmix64). Bijective, so distinct inputs never collide.
inline uint64_t mix64(uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Stream tags keep the independent random sources of one trial apart:
// instruction stacks, initial-condition sampling, toppling-order policies,
// and free random walks all hash the same master seed through different
// tags.
inline constexpr uint64_t kStreamStacks = 0x0101;
inline constexpr uint64_t kStreamLaw = 0x0202;
inline constexpr uint64_t kStreamOrder = 0x0303;
inline constexpr uint64_t kStreamWalk = 0x0404;

// Per-trial seed for one named stream. Documented in the README so runs
// can be reproduced piecemeal.
inline uint64_t derive_trial_seed(uint64_t master_seed, uint64_t trial_index,
                                  uint64_t stream_tag) {
    return mix64(mix64(master_seed ^ mix64(stream_tag)) + trial_index);
}

// Small stateful stream for everything that is not an instruction stack:
// initial-law sampling, order policies, free walks.
class SplitMix64 {
public:
    explicit SplitMix64(uint64_t seed) : state_(seed) {}

    uint64_t next() { return mix64(state_++); }

    // Uniform in [0, n); n > 0. Multiply-shift, bias < 2^-64.
    uint64_t below(uint64_t n) {
        return static_cast<uint64_t>(
            (static_cast<unsigned __int128>(next()) * n) >> 64);
    }

    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

private:
    uint64_t state_;
};

// Seed-free coordinate hash. Site keys are a pure function of the
// coordinates (not of any box), so stacks agree across nested boxes.
uint64_t coord_key(std::span<const Coord> coords);

// Immutable i.i.d. instruction stacks in counter mode: instruction k at
// site x is a pure function of (seed, x, k), so no stack state is ever
// stored and any prefix can be re-read. P(sleep) = p_s, each of the 2d
// jump directions has probability p_j/2d.
class StackSource {
public:
    StackSource(uint64_t seed, const Params& params);

    uint64_t seed() const { return seed_; }
    const Params& params() const { return params_; }

    // Hot path: the caller caches coord_key per site.
    Instruction at_key(uint64_t site_key, uint64_t k) const {
        uint64_t u = mix64((site_key ^ seed_mix_) + 0x9e3779b97f4a7c15ULL * k);
        return decode(mix64(u ^ 0x6a09e667f3bcc909ULL));
    }

    Instruction instruction(std::span<const Coord> coords, uint64_t k) const {
        return at_key(coord_key(coords), k);
    }

private:
    Instruction decode(uint64_t bits) const;

    uint64_t seed_;
    uint64_t seed_mix_;
    Params params_;
    double slice_;  // p_j / 2d
};

// Number of jump instructions pointing at `target` among the first
// odometer[x] instructions of each lattice neighbor x of target. All
// neighbors must lie inside the box (odometer is indexed by box site).
uint64_t jump_count_into(const StackSource& src, const Box& box,
                         std::span<const Coord> target,
                         std::span<const uint64_t> odometer);

}  // namespace arw
