#pragma once

#include "barrier/field.hpp"
#include "barrier/grid.hpp"

#include <cstddef>
#include <string>
#include <vector>

namespace barrier {

/// Lattice points with 0 <= h(x) <= r, in lattice order. Throws EmptyBand if none.
std::vector<std::vector<double>> sample_band(const Field& h, const Grid& grid, double r);

enum class Sign { Negative, Nonnegative };

struct Component {
    std::size_t cells = 0;
    std::vector<double> representative; ///< centre of the first cell in lattice order
    bool touches_boundary = false;
    /// Same cell count and still clear of the faces on the twice-larger box.
    bool stable = false;
    bool bounded() const { return !touches_boundary && stable; }
};

/// Connected components of the cells whose centre has the requested sign of h.
/// Cells are face-adjacent (2n neighbours). Boundedness is a finite-box
/// judgement backed by one expansion of the box at the same spacing.
struct ComponentReport {
    Sign sign = Sign::Negative;
    std::vector<Component> components;
    std::size_t cells_total = 0;
    /// Every component kept its cell count and boundary status on the expanded box.
    bool stable = true;
    std::size_t bounded_count() const;
};

ComponentReport flood_fill(const Field& h, const Grid& grid, Sign sign);

/// Geometrically growing boxes with the centre of `base`; factor > 1 and steps >= 1.
std::vector<Box> expansion_schedule(const Box& base, double factor, int steps);

/// Same schedule on lattices that keep the spacing of `base`.
std::vector<Grid> grid_schedule(const Grid& base, double factor, int steps);

/// Components found on a cell grid, without the expansion check. Exposed for tests.
struct CellLabels {
    std::vector<int> label;         ///< per cell, -1 if the cell has the other sign
    std::vector<std::size_t> sizes; ///< per component
    std::vector<bool> touches;      ///< per component
    std::vector<std::size_t> first; ///< first cell per component
};
CellLabels label_cells(const std::vector<bool>& mask, const std::vector<int>& cell_counts);

} // namespace barrier
