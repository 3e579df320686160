#pragma once

// Joint feasibility of the Lyapunov decrease and barrier inequalities, the
// single-function (Lyapunov-barrier) alternative, and diagnostics for when
// neither can exist.

#include "barrier/certify.hpp"
#include "barrier/classk.hpp"
#include "barrier/domain.hpp"
#include "barrier/field.hpp"
#include "barrier/reach.hpp"
#include "barrier/synth.hpp"
#include "barrier/system.hpp"

#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace barrier {

struct ClfSpec {
    FieldPtr V;
    FieldPtr W;
};

/// Comparison function of a barrier inequality: alpha(h) or alpha(h, |x|).
class BarrierAlpha {
public:
    BarrierAlpha() = default;
    BarrierAlpha(KappaFunction a) : alpha_(std::move(a)) {}
    BarrierAlpha(KappaKappaFunction a) : alpha_(std::move(a)) {}
    double operator()(double h, double norm_x) const;
    std::string describe() const;

private:
    std::variant<KappaFunction, KappaKappaFunction> alpha_{KappaFunction::linear(1.0)};
};

enum class PairStatus { StrictlyCompatible, Compatible, Incompatible };
std::string pair_status_name(PairStatus s);

struct CompatOptions {
    double strict_tol = 1e-6;
    double lg_threshold = 1e-8;
    double angle_tol = 1e-3;     ///< Lg V and Lg h count as collinear below this angle
    double origin_radius = 0.0;  ///< points this close to 0 are compatible by convention
};

/// The two inequalities as half-spaces in u: p.u <= A and q.u >= B.
struct HalfSpaces {
    std::vector<double> p, q;
    double A = 0.0, B = 0.0;
};

struct PointCompat {
    PairStatus status = PairStatus::Incompatible;
    std::vector<double> u;          ///< witness input (empty when none)
    double clf_slack = 0.0;         ///< A - p.u at the witness
    double cbf_slack = 0.0;         ///< q.u - B at the witness
    bool origin = false;
    HalfSpaces data;
};

HalfSpaces pair_half_spaces(const ControlSystem& sys, const ClfSpec& clf, const Field& h, const BarrierAlpha& alpha,
                            std::span<const double> x);

/// Analytic case analysis of the two half-spaces.
PointCompat classify_half_spaces(const HalfSpaces& hs, const CompatOptions& opt = {});

/// Throws NotAffine for systems without a split.
PointCompat point_compat(const ControlSystem& sys, const ClfSpec& clf, const Field& h, const BarrierAlpha& alpha,
                         std::span<const double> x, const CompatOptions& opt = {});

struct PairReport {
    Grid grid;
    std::vector<std::size_t> indices; ///< lattice points scanned
    std::vector<PointCompat> points;
    PairStatus region = PairStatus::Incompatible;
    std::size_t strict = 0, compatible = 0, incompatible = 0, origin = 0;
    double worst_slack = 0.0;                 ///< min over non-origin points of min(clf, cbf) slack
    std::optional<std::vector<double>> worst_point;
    std::vector<std::vector<double>> non_strict_points;
    std::vector<std::string> notes;
};

/// point_compat over grid points with region(x) >= 0 (region defaults to h).
/// Throws EmptyRegion if there are none.
PairReport compat_scan(const ControlSystem& sys, const ClfSpec& clf, const Field& h, const BarrierAlpha& alpha,
                       const Grid& grid, const CompatOptions& opt = {}, const Field* region = nullptr);

struct ClbfOptions {
    double strict_tol = 1e-6;
    double lg_threshold = 1e-8;
    double origin_cells = 2.0;
    int input_resolution = 401; ///< for systems without an affine split
};

struct ClbfCheck {
    bool proper = false;             ///< {Vbar <= 0} stays clear of the box faces
    bool positive_outside = false;   ///< Vbar > 0 wherever h < 0
    bool sublevel_nonempty = false;  ///< {Vbar <= 0} has lattice points
    bool closure_disjoint = false;   ///< dilated (C minus U) misses {h < 0}
    bool decrease = false;           ///< inf_u grad Vbar . f < 0 on C away from 0
    std::vector<std::string> violations;
    std::vector<std::vector<double>> decrease_failures;
    bool pass() const { return proper && positive_outside && sublevel_nonempty && closure_disjoint && decrease; }
};

ClbfCheck clbf_verify(const ControlSystem& sys, const Field& Vbar, const Field& h, const Grid& grid,
                      const ClbfOptions& opt = {});

struct ClbfConstruction {
    FieldPtr Vbar;
    double m_star = 0.0;
    double eps = 0.0;
    double lambda = 0.0;
    std::shared_ptr<const SampledField> psi;
    ClbfCheck check;
    std::vector<std::string> log;
};

/// Builds Vbar = -h + psi - eps/2 from an inward controller u_str, a
/// stabilising controller u_st and a Lyapunov function V. Throws
/// StageFailure(stage, evidence) with stages 1..7.
ClbfConstruction clbf_construct(const ControlSystem& sys, FieldPtr h, const Controller& u_str,
                                const Controller& u_st, const ClfSpec& clf, const Grid& grid,
                                const ClbfOptions& opt = {});

struct DerivedPair {
    ClfSpec clf;          ///< Vhat = Vbar - Vbar(0), W from the witnesses
    FieldPtr h;           ///< hhat = -Vbar
    KappaFunction alpha;  ///< identity
    PairReport report;
    std::vector<double> argmin;
};

/// Throws ArgminNotOrigin when the lattice minimiser of Vbar is more than
/// origin_cells cells from 0. The report scans the original safe set.
DerivedPair clbf_to_pair(const ControlSystem& sys, const ClbfConstruction& clbf, const Field& h_original,
                         const std::vector<const Controller*>& witnesses, const Grid& grid,
                         const ClbfOptions& opt = {});

struct Obstruction {
    std::string kind;    ///< "bounded_unsafe_component" or "unbounded_safe_set"
    std::string message;
    std::vector<double> evidence;
    std::size_t cells = 0;
};

/// A bounded component of {h < 0} rules out a strictly compatible pair and a
/// Lyapunov-barrier function; a safe set that reaches the faces of the box
/// and of its expansion rules out the latter.
std::vector<Obstruction> obstruction_diagnose(const Field& h, const Grid& grid);

struct StabilizerPair {
    PairReport report;
    CertificationReport certification;
    double w_coefficient = 0.0; ///< W = c |x|^2 when no W was supplied
    FieldPtr W;
    std::vector<std::vector<double>> clf_failures;
    std::vector<std::vector<double>> cbf_failures;
};

/// Uses u_ss as the witness for both inequalities at every sampled point of C.
StabilizerPair pair_from_safe_stabilizer(const ControlSystem& sys, ControllerPtr u_ss, const Field& h,
                                         const ClfSpec& clf, const CertificationConfig& config,
                                         const CompatOptions& opt = {});

struct EcbfPairOptions {
    double angle_tol = 1e-3;
    double iota = 1e-3;       ///< |Lg V . Lg h| at or below this is masked
    double band = 0.0;        ///< width of the masked boundary band (0: two grid cells of h)
    double lg_threshold = 1e-8;
    double strict_tol = 1e-6;
    double origin_radius = 0.0;
};

struct EcbfPairAlpha {
    KappaKappaFunction alpha;
    double c_min = 0.0;
    std::size_t total = 0, masked = 0;
    double masked_fraction = 0.0;
    PairReport check; ///< compat_scan over the unmasked points
};

/// Throws HypothesisFailed with the offending boundary point.
EcbfPairAlpha ecbf_pair_alpha(const ControlSystem& sys, const ClfSpec& clf, const Field& h, const Grid& grid,
                              std::span<const double> r_grid, std::span<const double> c_grid,
                              const EcbfPairOptions& opt = {});

/// Lattice points with h >= 0 that have a face neighbour with h < 0, or |h| <= delta.
std::vector<std::size_t> boundary_points(const std::vector<double>& hvals, const Grid& grid, double delta);

} // namespace barrier
