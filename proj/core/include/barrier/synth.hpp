#pragma once

#include "barrier/classk.hpp"
#include "barrier/field.hpp"
#include "barrier/system.hpp"

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace barrier {

/// State feedback u = k(x).
class Controller {
public:
    virtual ~Controller() = default;
    virtual std::size_t input_dim() const = 0;
    /// Writes k(x) into u and returns the relaxation used (0 unless the
    /// controller softens a constraint). Throws ControllerInfeasible.
    virtual double compute(std::span<const double> x, std::span<double> u) const = 0;
    virtual std::string describe() const = 0;
};

using ControllerPtr = std::shared_ptr<const Controller>;

class ExpressionFeedback : public Controller {
public:
    /// One expression per input, over the state variables.
    ExpressionFeedback(std::vector<expr::Expression> exprs);
    ExpressionFeedback(const std::vector<std::string>& texts, const std::vector<std::string>& state_vars);

    std::size_t input_dim() const override { return exprs_.size(); }
    double compute(std::span<const double> x, std::span<double> u) const override;
    std::string describe() const override;
    const std::vector<expr::Expression>& expressions() const { return exprs_; }

private:
    std::vector<expr::Expression> exprs_;
};

/// Smallest-norm input with La h + Lg h u + alpha(h) >= 0.
class MinNormCbf : public Controller {
public:
    MinNormCbf(const ControlSystem& sys, FieldPtr h, KappaFunction alpha, double lg_threshold = 1e-8);
    std::size_t input_dim() const override { return sys_->m(); }
    double compute(std::span<const double> x, std::span<double> u) const override;
    std::string describe() const override;

private:
    const ControlSystem* sys_;
    FieldPtr h_;
    KappaFunction alpha_;
    double lg_threshold_;
};

/// min |u|^2 + penalty delta^2 s.t. grad V.(a + g u) <= -W + delta (soft),
/// grad h.(a + g u) >= -alpha(h) (hard).
class ClfCbfQp : public Controller {
public:
    ClfCbfQp(const ControlSystem& sys, FieldPtr V, FieldPtr W, FieldPtr h, KappaFunction alpha, double penalty,
             double lg_threshold = 1e-8);
    std::size_t input_dim() const override { return sys_->m(); }
    double compute(std::span<const double> x, std::span<double> u) const override;
    std::string describe() const override;

private:
    const ControlSystem* sys_;
    FieldPtr V_, W_, h_;
    KappaFunction alpha_;
    double penalty_, lg_threshold_;
};

/// For systems without an affine split: the input-box lattice point of least
/// norm meeting the barrier inequality, falling back to the best rate.
class LatticeCbf : public Controller {
public:
    LatticeCbf(const ControlSystem& sys, FieldPtr h, KappaFunction alpha, int resolution = 401);
    std::size_t input_dim() const override { return sys_->m(); }
    double compute(std::span<const double> x, std::span<double> u) const override;
    std::string describe() const override;

private:
    const ControlSystem* sys_;
    FieldPtr h_;
    KappaFunction alpha_;
    std::vector<std::vector<double>> lattice_; // sorted by norm, then lattice index
};

/// Closed form of the min-norm barrier filter at one point.
std::vector<double> min_norm_cbf(const ControlSystem& sys, const Field& h, const KappaFunction& alpha,
                                 std::span<const double> x, double lg_threshold = 1e-8);

struct QpSolution {
    std::vector<double> u;
    double delta = 0.0;
    int pattern = 0; ///< 0 none, 1 CLF, 2 CBF, 3 both active
};

/// Two-constraint QP in (u, delta); see ClfCbfQp. Infinite penalty forces delta = 0
/// when the CLF row can be met.
QpSolution clf_cbf_qp(const ControlSystem& sys, const Field& V, const Field& W, const Field& h,
                      const KappaFunction& alpha, std::span<const double> x, double penalty,
                      double lg_threshold = 1e-8);

/// The same QP from raw half-space data: p.u - delta <= A (soft), q.u >= B (hard).
QpSolution solve_clf_cbf_qp(std::span<const double> p, double A, std::span<const double> q, double B, double penalty,
                            double lg_threshold = 1e-8);

enum class Termination { HorizonReached, BlowUp, ControllerInfeasible };

struct SimulationResult {
    std::vector<double> times;
    std::vector<std::vector<double>> states;
    std::vector<std::vector<double>> inputs;
    std::vector<double> h;
    std::vector<double> V;     ///< empty without a V field
    std::vector<double> delta; ///< controller relaxation per sample
    Termination termination = Termination::HorizonReached;
    double termination_time = 0.0;
    std::string message;
};

struct SimulateOptions {
    double blowup_bound = 1e6;
    FieldPtr h;
    FieldPtr V;
};

/// Fixed-step RK4, feedback evaluated at every stage state. Never throws for
/// numerical trouble; the result records how it ended.
SimulationResult simulate(const ControlSystem& sys, const Controller& k, std::span<const double> x0, double T,
                          double dt, const SimulateOptions& opt = {});

struct InvarianceResult {
    bool pass = true;
    double min_h = 0.0;
    std::optional<double> first_violation;
};

/// Passes iff min of the h trace is >= -tol. Throws MalformedResult on an empty trace.
InvarianceResult invariance_check(const SimulationResult& result, double tol);
/// Same, re-evaluating h along the recorded states.
InvarianceResult invariance_check(const SimulationResult& result, const Field& h, double tol);

std::string termination_name(Termination t);

} // namespace barrier
