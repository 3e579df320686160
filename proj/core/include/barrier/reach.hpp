#pragma once

// Minimum of h along closed-loop trajectories, and its smoothing.
//
// Time runs forward here: the minimum over the window [0, T] from x0 equals
// the minimum over [-T, 0] of a trajectory that reaches x0 at time 0 when the
// dynamics are time-invariant.

#include "barrier/classk.hpp"
#include "barrier/field.hpp"
#include "barrier/grid.hpp"
#include "barrier/synth.hpp"
#include "barrier/system.hpp"

#include <span>
#include <vector>

namespace barrier {

struct RunningMin {
    double value = 0.0;
    bool blew_up = false;
};

/// RK4 over [0, T]; min of h over the step states including x0. Stops at the
/// first state with norm above blowup_bound and flags it.
RunningMin running_min(const ControlSystem& sys, const Controller& k, const Field& h, std::span<const double> x0,
                       double T, double dt, double blowup_bound = 1e6);

struct ValueField {
    Grid grid;
    std::vector<double> horizons;
    /// values[j][i]: running min at horizons[j] for lattice point i.
    std::vector<std::vector<double>> values;
    std::vector<bool> converged; ///< last two horizons within conv_tol
    std::vector<bool> blew_up;
    const std::vector<double>& final() const { return values.back(); }
};

/// One integration per lattice point up to the largest horizon, reading off
/// the running minimum at every horizon.
ValueField value_field(const ControlSystem& sys, const Controller& k, const Field& h, const Grid& grid,
                       const std::vector<double>& horizons, double dt, double conv_tol = 1e-6);

struct SmoothedField {
    Grid grid;
    std::vector<double> values;
    std::vector<double> sigma;     ///< bandwidth used per point (0 where copied)
    std::vector<bool> bound_ok;    ///< |V - psi| < min(V/2, 1) where V > 0
    double base_sigma = 0.0;
};

/// Gaussian smoothing of the field over {V > 0}, the kernel renormalised over
/// the part of the stencil inside that set. Points where the result strays
/// from V by min(V/2, 1) or more are recomputed with half the bandwidth, up to
/// four times; remaining failures raise BandwidthExhausted. Points with V <= 0
/// keep their value.
SmoothedField mollify(const Grid& grid, const std::vector<double>& V, double sigma);
SmoothedField mollify(const ValueField& field, double sigma);

/// Plain masked Gaussian convolution at fixed bandwidth (linear in the values
/// for a fixed mask).
std::vector<double> convolve(const Grid& grid, const std::vector<double>& values, const std::vector<bool>& mask,
                             double sigma);

struct DecreaseReport {
    std::size_t checked = 0;
    std::size_t passed = 0;
    double pass_fraction = 0.0;
    double worst_slack = 0.0;
    std::vector<std::size_t> failures;
};

/// Checks grad psi . f(x, k(x)) >= -2 alpha(V(x)) - margin_tol at interior
/// lattice points with V > 0, using central differences of psi.
DecreaseReport verify_smoothed_decrease(const ControlSystem& sys, const Controller& k, const SmoothedField& psi,
                                        const std::vector<double>& V, const KappaFunction& alpha,
                                        double margin_tol = 1e-6);

} // namespace barrier
