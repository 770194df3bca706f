#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

namespace arw {

using Coord = int32_t;

// A point of Z^d. Kept as a plain coordinate vector; box-independent.
struct Site {
    std::vector<Coord> coords;

    bool operator==(const Site&) const = default;
};

// Direction encoding used everywhere: direction j in [0, 2d) acts on axis
// j/2, with even j stepping -1 and odd j stepping +1. So the enumeration
// order is axis0-, axis0+, axis1-, axis1+, ...
inline constexpr int opposite_direction(int j) { return j ^ 1; }

// The centered box {-n,...,n}^d with dense mixed-radix site indexing.
// index = sum_i (c_i + n) * (2n+1)^i, so axis 0 varies fastest. The
// neighbor table is precomputed; -1 marks a neighbor outside the box
// (particles jumping there are killed).
class Box {
public:
    Box(int d, int n);

    int d() const { return d_; }
    int n() const { return n_; }
    int64_t side() const { return side_; }
    int64_t volume() const { return volume_; }

    bool contains(std::span<const Coord> coords) const;
    int64_t index_of(std::span<const Coord> coords) const;
    std::vector<Coord> coords_of(int64_t index) const;
    Site site_of(int64_t index) const { return Site{coords_of(index)}; }
    int64_t origin_index() const { return origin_; }

    // Neighbor of site `index` in direction j, or -1 if outside the box.
    int64_t neighbor(int64_t index, int j) const {
        return neighbors_[index * 2 * d_ + j];
    }

    // True when at least one neighbor lies outside the box.
    bool is_boundary(int64_t index) const;

private:
    int d_;
    int n_;
    int64_t side_;
    int64_t volume_;
    int64_t origin_;
    std::vector<int64_t> neighbors_;
};

// Boxes are immutable after construction and safe to share across threads.
std::shared_ptr<const Box> make_box(int d, int n);

// The 2d lattice neighbors of x, in direction order.
std::vector<Site> neighbors(const Site& x, int d);

// Sites of {-(n-margin),...,n-margin}^d as indices into `box`, in dense
// index order. margin 0 returns every site.
std::vector<int64_t> inner_box_sites(const Box& box, int margin);

}  // namespace arw
