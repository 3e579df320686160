#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace barrier {

struct Box {
    std::vector<double> lo, hi;

    Box() = default;
    Box(std::vector<double> lo_, std::vector<double> hi_);

    std::size_t dim() const { return lo.size(); }
    bool contains(std::span<const double> x) const;
    std::vector<double> center() const;
    /// Same centre, every half-width multiplied by `factor`.
    Box scaled(double factor) const;
};

/// Regular lattice over a box; point i along dimension d sits at
/// lo + (hi - lo) * i / (N - 1), so the box corners are lattice points.
/// Linear indices are row-major with dimension 0 varying slowest.
class Grid {
public:
    Grid() = default;
    Grid(Box box, std::vector<int> counts);

    const Box& box() const { return box_; }
    const std::vector<int>& counts() const { return counts_; }
    std::size_t dim() const { return counts_.size(); }
    std::size_t size() const { return size_; }

    double coordinate(std::size_t d, int i) const;
    double spacing(std::size_t d) const;
    double min_spacing() const;

    void point(std::size_t index, std::span<double> out) const;
    std::vector<double> point(std::size_t index) const;
    void unravel(std::size_t index, std::span<int> out) const;
    std::size_t ravel(std::span<const int> idx) const;
    bool on_face(std::size_t index) const;

    /// Lattice index nearest to x (clamped into the box).
    std::size_t nearest(std::span<const double> x) const;

    /// Grow about the centre by `factor` while keeping the spacing. With an
    /// integer factor and odd point counts the old lattice is a sub-lattice.
    Grid expanded(double factor) const;

private:
    Box box_;
    std::vector<int> counts_;
    std::size_t size_ = 0;
};

} // namespace barrier
