#include "arw/lattice.hpp"

#include <limits>
#include <stdexcept>
#include <string>

namespace arw {

namespace {

int64_t checked_volume(int d, int n) {
    if (d < 1) throw std::invalid_argument("box dimension must be >= 1");
    if (n < 0) throw std::invalid_argument("box radius must be >= 0");
    const int64_t side = 2 * static_cast<int64_t>(n) + 1;
    int64_t vol = 1;
    for (int i = 0; i < d; ++i) {
        if (vol > std::numeric_limits<int64_t>::max() / side)
            throw std::overflow_error("box volume overflows int64");
        vol *= side;
    }
    // The neighbor table holds volume * 2d entries; keep it addressable.
    if (vol > (int64_t{1} << 40))
        throw std::overflow_error("box volume exceeds 2^40 sites");
    return vol;
}

}  // namespace

Box::Box(int d, int n)
    : d_(d), n_(n), side_(2 * static_cast<int64_t>(n) + 1), volume_(checked_volume(d, n)) {
    std::vector<Coord> zero(static_cast<size_t>(d), 0);
    origin_ = index_of(zero);

    neighbors_.assign(static_cast<size_t>(volume_) * 2 * d_, -1);
    std::vector<Coord> c(static_cast<size_t>(d_), static_cast<Coord>(-n_));
    for (int64_t idx = 0; idx < volume_; ++idx) {
        int64_t stride = 1;
        for (int a = 0; a < d_; ++a) {
            if (c[a] > -n_) neighbors_[idx * 2 * d_ + 2 * a] = idx - stride;
            if (c[a] < n_) neighbors_[idx * 2 * d_ + 2 * a + 1] = idx + stride;
            stride *= side_;
        }
        // advance mixed-radix counter, axis 0 fastest
        for (int a = 0; a < d_; ++a) {
            if (c[a] < n_) {
                ++c[a];
                break;
            }
            c[a] = static_cast<Coord>(-n_);
        }
    }
}

bool Box::contains(std::span<const Coord> coords) const {
    if (static_cast<int>(coords.size()) != d_) return false;
    for (Coord c : coords)
        if (c < -n_ || c > n_) return false;
    return true;
}

int64_t Box::index_of(std::span<const Coord> coords) const {
    if (!contains(coords))
        throw std::out_of_range("site not inside box");
    int64_t idx = 0;
    int64_t stride = 1;
    for (int a = 0; a < d_; ++a) {
        idx += (static_cast<int64_t>(coords[a]) + n_) * stride;
        stride *= side_;
    }
    return idx;
}

std::vector<Coord> Box::coords_of(int64_t index) const {
    if (index < 0 || index >= volume_)
        throw std::out_of_range("site index out of range");
    std::vector<Coord> c(static_cast<size_t>(d_));
    for (int a = 0; a < d_; ++a) {
        c[a] = static_cast<Coord>(index % side_ - n_);
        index /= side_;
    }
    return c;
}

bool Box::is_boundary(int64_t index) const {
    for (int j = 0; j < 2 * d_; ++j)
        if (neighbor(index, j) < 0) return true;
    return false;
}

std::shared_ptr<const Box> make_box(int d, int n) {
    return std::make_shared<const Box>(d, n);
}

std::vector<Site> neighbors(const Site& x, int d) {
    if (static_cast<int>(x.coords.size()) != d)
        throw std::invalid_argument("site dimension mismatch");
    std::vector<Site> out;
    out.reserve(2 * static_cast<size_t>(d));
    for (int j = 0; j < 2 * d; ++j) {
        Site y = x;
        y.coords[j / 2] += (j & 1) ? 1 : -1;
        out.push_back(std::move(y));
    }
    return out;
}

std::vector<int64_t> inner_box_sites(const Box& box, int margin) {
    if (margin < 0 || margin > box.n())
        throw std::invalid_argument("margin must lie in [0, n]");
    const int m = box.n() - margin;
    std::vector<int64_t> out;
    std::vector<Coord> c(static_cast<size_t>(box.d()), static_cast<Coord>(-m));
    for (;;) {
        out.push_back(box.index_of(c));
        int a = 0;
        for (; a < box.d(); ++a) {
            if (c[a] < m) {
                ++c[a];
                break;
            }
            c[a] = static_cast<Coord>(-m);
        }
        if (a == box.d()) break;
    }
    return out;
}

}  // namespace arw
