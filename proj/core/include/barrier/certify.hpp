#pragma once

#include "barrier/classk.hpp"
#include "barrier/extended.hpp"
#include "barrier/field.hpp"
#include "barrier/grid.hpp"
#include "barrier/synth.hpp"
#include "barrier/system.hpp"

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace barrier {

enum class Verdict { Certified, Refuted, Inconclusive };
std::string verdict_name(Verdict v);

struct Tolerances {
    double tol0 = 1e-6;         ///< allowed value of the fitted envelope at r = 0
    double margin_tol = 1e-6;   ///< also the half-width of the r = 0 band
    double lg_threshold = 1e-8; ///< |Lg h| above this means the input can push arbitrarily
    double strict_tol = 1e-6;
    double eps = 1e-3;          ///< strict lift of fitted majorants
};

/// How the best input at a point is chosen.
struct InputPolicy {
    enum class Kind { UnboundedAffine, BoxSearch, Feedback };
    Kind kind = Kind::UnboundedAffine;
    int resolution = 401; ///< BoxSearch points per input dimension
    ControllerPtr controller;

    static InputPolicy unbounded_affine() { return {}; }
    static InputPolicy box_search(int resolution = 401) { return {Kind::BoxSearch, resolution, nullptr}; }
    static InputPolicy feedback(ControllerPtr k) { return {Kind::Feedback, 0, std::move(k)}; }
    std::string describe() const;
};

struct DivergenceRule {
    double drop_factor = 4.0;
    int min_steps = 2;
};

struct CertificationConfig {
    Grid grid;
    std::vector<double> r_grid;
    std::vector<double> c_grid; ///< state-norm levels for the two-argument envelope
    double expansion_factor = 2.0;
    int expansion_steps = 1;
    InputPolicy policy;
    Tolerances tol;
    DivergenceRule divergence;
};

struct SupRate {
    double value = 0.0; ///< +inf when the input can make the rate arbitrarily large
    std::vector<double> u;
    bool unbounded = false;
};

/// sup over inputs of grad h(x) . f(x, u) under the policy (for Feedback, the
/// rate under that controller).
SupRate sup_rate(const ControlSystem& sys, const Field& h, std::span<const double> x, const InputPolicy& policy,
                 const Tolerances& tol = {});

struct EnvelopeColumn {
    Box box;
    /// beta(r_i) = -(inf of the best rate over 0 <= h <= r_i), running max over r.
    /// NaN where the band is empty.
    std::vector<double> beta;
    std::vector<std::string> notes;
};

EnvelopeColumn envelope(const ControlSystem& sys, const Field& h, const InputPolicy& policy, const Grid& grid,
                        std::span<const double> r_grid, const Tolerances& tol = {});

struct MarginRow {
    std::vector<double> x;
    double h = 0.0, rate = 0.0, alpha_h = 0.0, slack = 0.0;
};

struct CertificationReport {
    std::string kind; ///< "cbf" or "ecbf"
    Verdict verdict = Verdict::Inconclusive;
    std::optional<KappaFunction> alpha;
    std::optional<KappaKappaFunction> alpha2;
    std::optional<MarginRow> worst;   ///< smallest slack over the sampled safe set
    std::optional<MarginRow> witness; ///< point where the boundary condition fails
    std::vector<double> r_grid;
    std::vector<double> c_grid;
    std::vector<EnvelopeColumn> envelopes;
    /// (r, envelope values across expansions) for the r level that diverged.
    std::optional<std::pair<double, std::vector<double>>> divergence;
    std::string policy;
    std::vector<std::string> notes;
    std::vector<MarginRow> margins;
    /// For certify_ecbf with a candidate alpha: min of rate + alpha(h, |x|) over C.
    std::optional<double> candidate_margin;
    double c_min = 0.0;
};

CertificationReport certify_cbf(const ControlSystem& sys, const Field& h, const CertificationConfig& config);

/// Two-argument envelope of the proof's construction under `config.policy`,
/// which should be a Feedback policy. When `candidate` is given its sampled
/// margin is reported as well.
CertificationReport certify_ecbf(const ControlSystem& sys, const Field& h, const CertificationConfig& config,
                                 const std::optional<KappaKappaFunction>& candidate = std::nullopt);

struct SequenceEvidence {
    std::vector<double> h;
    std::vector<double> rate;
    bool divergent = false;
    std::string summary;
};

/// Evaluates h and its rate along f(x, k(x)) at each point in quad precision.
/// Every h must lie in [band_lo, band_hi] (else BandViolation). Divergence is
/// flagged when rates strictly decrease and last/first >= drop_factor.
SequenceEvidence refute_via_sequence(const ControlSystem& sys, const ScalarField& h,
                                     const std::vector<std::vector<Extended>>& points, double band_lo,
                                     double band_hi, const ExpressionFeedback* k = nullptr,
                                     double drop_factor = 4.0);

/// h e^{-h} and e^{-|f(x, k(x))|^2} h. Both keep the sign of h.
std::pair<ScalarField, ScalarField> exp_rescale(const ControlSystem& sys, const ScalarField& h,
                                                const ExpressionFeedback& k);

/// Quad-precision bisection of g(a) = target on [lo, hi], assuming a sign change.
Extended bisect(const expr::Expression& g, Extended lo, Extended hi, Extended target, int iterations = 400);

} // namespace barrier
