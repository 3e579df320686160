#include "barrier/grid.hpp"

#include "barrier/errors.hpp"

#include <algorithm>
#include <cmath>

namespace barrier {

Box::Box(std::vector<double> lo_, std::vector<double> hi_) : lo(std::move(lo_)), hi(std::move(hi_)) {
    if (lo.size() != hi.size()) throw ConfigError("box bounds differ in dimension");
    for (std::size_t d = 0; d < lo.size(); ++d)
        if (!(lo[d] < hi[d])) throw ConfigError("box needs lo < hi in every dimension");
}

bool Box::contains(std::span<const double> x) const {
    for (std::size_t d = 0; d < lo.size(); ++d)
        if (x[d] < lo[d] || x[d] > hi[d]) return false;
    return true;
}

std::vector<double> Box::center() const {
    std::vector<double> c(lo.size());
    for (std::size_t d = 0; d < lo.size(); ++d) c[d] = 0.5 * (lo[d] + hi[d]);
    return c;
}

Box Box::scaled(double factor) const {
    Box b = *this;
    for (std::size_t d = 0; d < lo.size(); ++d) {
        double c = 0.5 * (lo[d] + hi[d]);
        double half = 0.5 * (hi[d] - lo[d]) * factor;
        b.lo[d] = c - half;
        b.hi[d] = c + half;
    }
    return b;
}

Grid::Grid(Box box, std::vector<int> counts) : box_(std::move(box)), counts_(std::move(counts)) {
    if (counts_.size() != box_.dim()) throw ConfigError("grid counts do not match box dimension");
    size_ = 1;
    for (int c : counts_) {
        if (c < 2) throw ConfigError("grid needs at least 2 points per dimension");
        size_ *= static_cast<std::size_t>(c);
    }
}

double Grid::coordinate(std::size_t d, int i) const {
    if (i == counts_[d] - 1) return box_.hi[d];
    return box_.lo[d] + (box_.hi[d] - box_.lo[d]) * i / (counts_[d] - 1);
}

double Grid::spacing(std::size_t d) const { return (box_.hi[d] - box_.lo[d]) / (counts_[d] - 1); }

double Grid::min_spacing() const {
    double s = spacing(0);
    for (std::size_t d = 1; d < dim(); ++d) s = std::min(s, spacing(d));
    return s;
}

void Grid::unravel(std::size_t index, std::span<int> out) const {
    for (std::size_t d = dim(); d-- > 0;) {
        out[d] = static_cast<int>(index % static_cast<std::size_t>(counts_[d]));
        index /= static_cast<std::size_t>(counts_[d]);
    }
}

std::size_t Grid::ravel(std::span<const int> idx) const {
    std::size_t k = 0;
    for (std::size_t d = 0; d < dim(); ++d) k = k * static_cast<std::size_t>(counts_[d]) + static_cast<std::size_t>(idx[d]);
    return k;
}

void Grid::point(std::size_t index, std::span<double> out) const {
    for (std::size_t d = dim(); d-- > 0;) {
        int i = static_cast<int>(index % static_cast<std::size_t>(counts_[d]));
        index /= static_cast<std::size_t>(counts_[d]);
        out[d] = coordinate(d, i);
    }
}

std::vector<double> Grid::point(std::size_t index) const {
    std::vector<double> x(dim());
    point(index, x);
    return x;
}

bool Grid::on_face(std::size_t index) const {
    for (std::size_t d = dim(); d-- > 0;) {
        int i = static_cast<int>(index % static_cast<std::size_t>(counts_[d]));
        index /= static_cast<std::size_t>(counts_[d]);
        if (i == 0 || i == counts_[d] - 1) return true;
    }
    return false;
}

std::size_t Grid::nearest(std::span<const double> x) const {
    std::size_t k = 0;
    for (std::size_t d = 0; d < dim(); ++d) {
        double t = (x[d] - box_.lo[d]) / spacing(d);
        long i = std::lround(t);
        i = std::clamp<long>(i, 0, counts_[d] - 1);
        k = k * static_cast<std::size_t>(counts_[d]) + static_cast<std::size_t>(i);
    }
    return k;
}

Grid Grid::expanded(double factor) const {
    if (!(factor > 1.0)) throw ConfigError("expansion factor must exceed 1");
    Box b = box_;
    std::vector<int> counts = counts_;
    for (std::size_t d = 0; d < dim(); ++d) {
        double h = spacing(d);
        long cells = std::lround((counts_[d] - 1) * factor);
        // Keep the cell count change even so the centre stays on the lattice.
        if ((cells - (counts_[d] - 1)) % 2 != 0) ++cells;
        double extra = 0.5 * static_cast<double>(cells - (counts_[d] - 1)) * h;
        b.lo[d] = box_.lo[d] - extra;
        b.hi[d] = box_.hi[d] + extra;
        counts[d] = static_cast<int>(cells + 1);
    }
    return Grid(std::move(b), std::move(counts));
}

} // namespace barrier
