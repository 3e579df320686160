#pragma once

#include "barrier/field.hpp"
#include "barrier/grid.hpp"

#include <span>
#include <string>
#include <utility>
#include <vector>

namespace barrier {

/// Extended class-K-infinity function of one argument. Negative arguments
/// use the odd extension alpha(-r) = -alpha(r).
class KappaFunction {
public:
    enum class Kind { Linear, Power, PiecewiseLinear };

    KappaFunction() = default; // linear, c = 1
    static KappaFunction linear(double c);
    static KappaFunction power(double c, double p);
    /// Knots must start at (0, 0) and be strictly increasing in both coordinates.
    static KappaFunction piecewise(std::vector<double> r, std::vector<double> v, double tail_slope);

    double operator()(double r) const;

    Kind kind() const { return kind_; }
    double coefficient() const { return c_; }
    double exponent() const { return p_; }
    const std::vector<double>& knot_r() const { return r_; }
    const std::vector<double>& knot_v() const { return v_; }
    double tail_slope() const { return tail_; }
    std::string describe() const;

    /// alpha * k, still in the family.
    KappaFunction scaled(double k) const;

private:
    double positive(double r) const;

    Kind kind_ = Kind::Linear;
    double c_ = 1.0, p_ = 1.0;
    std::vector<double> r_, v_;
    double tail_ = 0.0;
};

/// Two-argument comparison function alpha(r, s), s >= 0 (typically s = |x|).
/// Negative r uses the odd extension in r; negative s is treated as 0.
class KappaKappaFunction {
public:
    enum class Kind { Separable, Product, Tabulated };

    KappaKappaFunction() = default; // product, c = 1, eps = 1e-3
    /// alpha(r) (s + 1).
    static KappaKappaFunction separable(KappaFunction alpha);
    /// c r s + eps r.
    static KappaKappaFunction product(double c, double eps = 1e-3);
    /// Bilinear over the table; value(i, j) at (r[i], s[j]), r[0] = s[0] = 0 and
    /// value(0, .) = 0. Beyond the last knots the function continues with
    /// r-slope `tail_r` and s-slope eps * r, which keeps it strictly increasing.
    static KappaKappaFunction tabulated(std::vector<double> r, std::vector<double> s,
                                        std::vector<std::vector<double>> values, double tail_r, double eps);

    double operator()(double r, double s) const;

    Kind kind() const { return kind_; }
    const KappaFunction& inner() const { return alpha_; }
    double coefficient() const { return c_; }
    double eps() const { return eps_; }
    const std::vector<double>& table_r() const { return r_; }
    const std::vector<double>& table_s() const { return s_; }
    const std::vector<std::vector<double>>& table() const { return t_; }
    double tail_r() const { return tail_r_; }
    std::string describe() const;

private:
    double positive(double r, double s) const;

    Kind kind_ = Kind::Product;
    KappaFunction alpha_;
    double c_ = 1.0, eps_ = 1e-3;
    std::vector<double> r_, s_;
    std::vector<std::vector<double>> t_;
    double tail_r_ = 0.0;
};

struct MajorantOptions {
    double tol0 = 1e-6; ///< largest value tolerated at r = 0
    double eps = 1e-3;  ///< slope of the strict lift
};

/// Piecewise-linear extended class-K-infinity function that dominates the
/// running maximum of the samples (r >= 0, v) plus eps r. Samples need not be
/// sorted; repeated r values are merged by maximum. Throws InfeasibleMajorant
/// if a sample at r = 0 exceeds tol0.
KappaFunction fit_majorant(std::vector<std::pair<double, double>> samples, const MajorantOptions& opt = {});

/// Two-argument version over a rectangular grid r x c; v[i][j] samples (r[i], c[j]).
/// NaN entries are treated as absent. r[0] must be 0. Throws InfeasibleMajorant
/// if some v[0][j] exceeds tol0.
KappaKappaFunction fit_kk_majorant(std::span<const double> r, std::span<const double> c,
                                   const std::vector<std::vector<double>>& v, const MajorantOptions& opt = {});

/// alpha(r) (s + 1): a state-dependent function that dominates alpha for s >= 0.
KappaKappaFunction cbf_alpha_to_ecbf(const KappaFunction& alpha);

/// Majorant of r -> sup { alpha(r, |x|) : 0 <= h(x) <= r } over the lattice.
/// Throws NotCompact if {h >= 0} reaches a face of the grid box.
KappaFunction ecbf_alpha_to_cbf(const KappaKappaFunction& alpha, const Field& h, const Grid& grid,
                                std::span<const double> r_grid, const MajorantOptions& opt = {});

/// Checks strict monotonicity on `points` samples of [0, r_max], alpha(0) = 0
/// and odd symmetry. Returns an empty string when all hold, else the first failure.
std::string check_kappa(const KappaFunction& alpha, double r_max, int points = 1000);

} // namespace barrier
