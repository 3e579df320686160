#pragma once

// Cell table for two-argument envelopes. A sample with h in (r_i, r_{i+1}]
// and c in [c_j, c_{j+1}) lands on v[i][j]; bilinear interpolation of any
// table dominating the entries then dominates the sample at (h, s) for s >= c.

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace barrier::detail {

class KkTable {
public:
    KkTable(std::vector<double> r, std::vector<double> c, double delta)
        : r_(std::move(r)), c_(std::move(c)), delta_(delta),
          v_(r_.size(), std::vector<double>(c_.size(), std::numeric_limits<double>::quiet_NaN())) {}

    /// Returns the row used (0 for the boundary band).
    std::size_t add(double h, double c, double value) {
        std::size_t col = static_cast<std::size_t>(std::upper_bound(c_.begin(), c_.end(), std::max(c, 0.0)) - c_.begin()) - 1;
        std::size_t row;
        if (h <= delta_) {
            row = 0;
        } else {
            row = static_cast<std::size_t>(std::upper_bound(r_.begin(), r_.end(), h) - r_.begin()) - 1;
            if (r_.size() > 1 && row == 0) {
                // h in (delta, r_1]: scaled so the line through (0, 0) still covers it.
                row = 1;
                if (value > 0) value *= r_[1] / h;
            }
        }
        double& cell = v_[row][col];
        cell = std::isnan(cell) ? value : std::max(cell, value);
        return row;
    }

    const std::vector<double>& r() const { return r_; }
    const std::vector<double>& c() const { return c_; }
    const std::vector<std::vector<double>>& values() const { return v_; }

private:
    std::vector<double> r_, c_;
    double delta_;
    std::vector<std::vector<double>> v_;
};

} // namespace barrier::detail
