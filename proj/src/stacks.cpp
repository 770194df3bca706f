#include "arw/stacks.hpp"

#include <stdexcept>

namespace arw {

Params Params::make(int d, double lambda) {
    if (d < 1) throw std::invalid_argument("dimension must be >= 1");
    if (!(lambda > 0.0)) throw std::invalid_argument("sleep rate must be > 0");
    Params p;
    p.d = d;
    p.lambda = lambda;
    p.p_s = lambda / (1.0 + lambda);
    p.p_j = 1.0 - p.p_s;
    return p;
}

uint64_t coord_key(std::span<const Coord> coords) {
    uint64_t h = mix64(0x243f6a8885a308d3ULL + coords.size());
    for (Coord c : coords)
        h = mix64(h ^ static_cast<uint64_t>(static_cast<int64_t>(c)));
    return h;
}

StackSource::StackSource(uint64_t seed, const Params& params)
    : seed_(seed), seed_mix_(mix64(seed ^ 0x452821e638d01377ULL)), params_(params) {
    slice_ = params_.p_j / (2.0 * params_.d);
}

Instruction StackSource::decode(uint64_t bits) const {
    // Top 53 bits give a uniform double in [0,1). [0,p_s) is sleep, then
    // 2d equal slices of width p_j/2d in direction order.
    const double u = static_cast<double>(bits >> 11) * 0x1.0p-53;
    if (u < params_.p_s) return Instruction{-1};
    int dir = static_cast<int>((u - params_.p_s) / slice_);
    if (dir >= 2 * params_.d) dir = 2 * params_.d - 1;  // guard the u ~ 1 edge
    return Instruction{static_cast<int32_t>(dir)};
}

uint64_t jump_count_into(const StackSource& src, const Box& box,
                         std::span<const Coord> target,
                         std::span<const uint64_t> odometer) {
    if (static_cast<int64_t>(odometer.size()) != box.volume())
        throw std::invalid_argument("odometer size must match box volume");
    const int64_t t_idx = box.index_of(target);
    uint64_t total = 0;
    for (int j = 0; j < 2 * box.d(); ++j) {
        const int64_t x_idx = box.neighbor(t_idx, j);
        if (x_idx < 0)
            throw std::invalid_argument("target has a neighbor outside the box");
        // x = target + step(j); the jump that carries x onto target is the
        // opposite direction.
        const int back = opposite_direction(j);
        const std::vector<Coord> xc = box.coords_of(x_idx);
        const uint64_t key = coord_key(xc);
        for (uint64_t k = 0; k < odometer[static_cast<size_t>(x_idx)]; ++k) {
            if (src.at_key(key, k).jump_dir == back) ++total;
        }
    }
    return total;
}

}  // namespace arw
