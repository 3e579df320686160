#include "barrier/domain.hpp"

#include "barrier/errors.hpp"
#include "barrier/parallel.hpp"

#include <algorithm>
#include <cmath>

namespace barrier {

std::vector<std::vector<double>> sample_band(const Field& h, const Grid& grid, double r) {
    if (!(r >= 0)) throw ConfigError("band level must be nonnegative");
    std::vector<double> hv = evaluate_on_grid(h, grid);
    std::vector<std::vector<double>> out;
    for (std::size_t i = 0; i < grid.size(); ++i)
        if (hv[i] >= 0 && hv[i] <= r) out.push_back(grid.point(i));
    if (out.empty()) throw EmptyBand(r);
    return out;
}

std::size_t ComponentReport::bounded_count() const {
    return static_cast<std::size_t>(std::count_if(components.begin(), components.end(),
                                                  [](const Component& c) { return c.bounded(); }));
}

CellLabels label_cells(const std::vector<bool>& mask, const std::vector<int>& cell_counts) {
    const std::size_t n = cell_counts.size();
    std::size_t total = 1;
    for (int c : cell_counts) total *= static_cast<std::size_t>(c);
    CellLabels out;
    out.label.assign(total, -1);
    std::vector<std::size_t> stride(n);
    {
        std::size_t s = 1;
        for (std::size_t d = n; d-- > 0;) {
            stride[d] = s;
            s *= static_cast<std::size_t>(cell_counts[d]);
        }
    }
    auto coord = [&](std::size_t k, std::size_t d) {
        return static_cast<int>((k / stride[d]) % static_cast<std::size_t>(cell_counts[d]));
    };
    std::vector<std::size_t> stack;
    for (std::size_t start = 0; start < total; ++start) {
        if (!mask[start] || out.label[start] >= 0) continue;
        int id = static_cast<int>(out.sizes.size());
        out.sizes.push_back(0);
        out.touches.push_back(false);
        out.first.push_back(start);
        out.label[start] = id;
        stack.push_back(start);
        while (!stack.empty()) {
            std::size_t k = stack.back();
            stack.pop_back();
            ++out.sizes[static_cast<std::size_t>(id)];
            for (std::size_t d = 0; d < n; ++d) {
                int c = coord(k, d);
                if (c == 0 || c == cell_counts[d] - 1) out.touches[static_cast<std::size_t>(id)] = true;
                if (c > 0) {
                    std::size_t nb = k - stride[d];
                    if (mask[nb] && out.label[nb] < 0) {
                        out.label[nb] = id;
                        stack.push_back(nb);
                    }
                }
                if (c < cell_counts[d] - 1) {
                    std::size_t nb = k + stride[d];
                    if (mask[nb] && out.label[nb] < 0) {
                        out.label[nb] = id;
                        stack.push_back(nb);
                    }
                }
            }
        }
    }
    return out;
}

namespace {

struct CellGrid {
    std::vector<int> counts;
    std::vector<bool> mask;
    CellLabels labels;
};

CellGrid classify(const Field& h, const Grid& grid, Sign sign) {
    const std::size_t n = grid.dim();
    CellGrid cg;
    std::size_t total = 1;
    for (int c : grid.counts()) {
        cg.counts.push_back(c - 1);
        total *= static_cast<std::size_t>(c - 1);
    }
    std::vector<char> m(total, 0);
    parallel_for(total, [&](std::size_t k) {
        double x[16];
        std::size_t rest = k;
        for (std::size_t d = n; d-- > 0;) {
            int i = static_cast<int>(rest % static_cast<std::size_t>(cg.counts[d]));
            rest /= static_cast<std::size_t>(cg.counts[d]);
            x[d] = 0.5 * (grid.coordinate(d, i) + grid.coordinate(d, i + 1));
        }
        double v = h.value(std::span<const double>(x, n));
        m[k] = sign == Sign::Negative ? (v < 0) : (v >= 0);
    });
    cg.mask.assign(m.begin(), m.end());
    cg.labels = label_cells(cg.mask, cg.counts);
    return cg;
}

std::vector<double> cell_center(const Grid& grid, const std::vector<int>& counts, std::size_t k) {
    const std::size_t n = grid.dim();
    std::vector<double> x(n);
    for (std::size_t d = n; d-- > 0;) {
        int i = static_cast<int>(k % static_cast<std::size_t>(counts[d]));
        k /= static_cast<std::size_t>(counts[d]);
        x[d] = 0.5 * (grid.coordinate(d, i) + grid.coordinate(d, i + 1));
    }
    return x;
}

// Cell of the expanded grid containing the point x.
std::size_t cell_of(const Grid& grid, const std::vector<int>& counts, const std::vector<double>& x) {
    std::size_t k = 0;
    for (std::size_t d = 0; d < grid.dim(); ++d) {
        int i = static_cast<int>(std::floor((x[d] - grid.box().lo[d]) / grid.spacing(d)));
        i = std::clamp(i, 0, counts[d] - 1);
        k = k * static_cast<std::size_t>(counts[d]) + static_cast<std::size_t>(i);
    }
    return k;
}

} // namespace

ComponentReport flood_fill(const Field& h, const Grid& grid, Sign sign) {
    ComponentReport rep;
    rep.sign = sign;
    CellGrid base = classify(h, grid, sign);
    Grid big = grid.expanded(2.0);
    CellGrid wide = classify(h, big, sign);
    for (std::size_t c = 0; c < base.labels.sizes.size(); ++c) {
        Component comp;
        comp.cells = base.labels.sizes[c];
        comp.representative = cell_center(grid, base.counts, base.labels.first[c]);
        comp.touches_boundary = base.labels.touches[c];
        std::size_t k = cell_of(big, wide.counts, comp.representative);
        int w = wide.labels.label[k];
        if (w >= 0) {
            bool same_size = wide.labels.sizes[static_cast<std::size_t>(w)] == comp.cells;
            bool same_touch = wide.labels.touches[static_cast<std::size_t>(w)] == comp.touches_boundary;
            comp.stable = same_size && same_touch;
        }
        rep.stable = rep.stable && comp.stable;
        rep.cells_total += comp.cells;
        rep.components.push_back(std::move(comp));
    }
    return rep;
}

std::vector<Box> expansion_schedule(const Box& base, double factor, int steps) {
    if (!(factor > 1.0)) throw ConfigError("expansion factor must exceed 1");
    if (steps < 1) throw ConfigError("expansion needs at least one step");
    std::vector<Box> out{base};
    for (int k = 1; k < steps; ++k) out.push_back(out.back().scaled(factor));
    return out;
}

std::vector<Grid> grid_schedule(const Grid& base, double factor, int steps) {
    if (!(factor > 1.0)) throw ConfigError("expansion factor must exceed 1");
    if (steps < 1) throw ConfigError("expansion needs at least one step");
    std::vector<Grid> out{base};
    for (int k = 1; k < steps; ++k) out.push_back(out.back().expanded(factor));
    return out;
}

} // namespace barrier
