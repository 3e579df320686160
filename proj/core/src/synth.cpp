#include "barrier/synth.hpp"

#include "barrier/errors.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>

namespace barrier {

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double norm2(std::span<const double> a) { return dot(a, a); }

} // namespace

ExpressionFeedback::ExpressionFeedback(std::vector<expr::Expression> exprs) : exprs_(std::move(exprs)) {}

ExpressionFeedback::ExpressionFeedback(const std::vector<std::string>& texts, const std::vector<std::string>& state_vars) {
    for (const auto& t : texts) exprs_.push_back(expr::Expression::parse(t, state_vars));
}

double ExpressionFeedback::compute(std::span<const double> x, std::span<double> u) const {
    for (std::size_t j = 0; j < exprs_.size(); ++j) u[j] = exprs_[j].eval(x);
    return 0.0;
}

std::string ExpressionFeedback::describe() const {
    std::string s = "feedback(";
    for (std::size_t j = 0; j < exprs_.size(); ++j) s += (j ? ", " : "") + exprs_[j].to_string();
    return s + ")";
}

std::vector<double> min_norm_cbf(const ControlSystem& sys, const Field& h, const KappaFunction& alpha,
                                 std::span<const double> x, double lg_threshold) {
    LieDerivatives L = lie_derivatives(sys, h, x);
    std::vector<double> u(sys.m(), 0.0);
    double s = L.La + alpha(L.value);
    if (s >= 0) return u;
    double q2 = norm2(L.Lg);
    if (std::sqrt(q2) <= lg_threshold)
        throw ControllerInfeasible("barrier constraint infeasible: Lg h vanishes while La h + alpha(h) < 0");
    for (std::size_t j = 0; j < u.size(); ++j) u[j] = -s / q2 * L.Lg[j];
    return u;
}

MinNormCbf::MinNormCbf(const ControlSystem& sys, FieldPtr h, KappaFunction alpha, double lg_threshold)
    : sys_(&sys), h_(std::move(h)), alpha_(std::move(alpha)), lg_threshold_(lg_threshold) {
    if (!sys.is_affine()) throw NotAffine();
}

double MinNormCbf::compute(std::span<const double> x, std::span<double> u) const {
    auto v = min_norm_cbf(*sys_, *h_, alpha_, x, lg_threshold_);
    std::copy(v.begin(), v.end(), u.begin());
    return 0.0;
}

std::string MinNormCbf::describe() const { return "min-norm barrier filter on " + h_->describe(); }

QpSolution solve_clf_cbf_qp(std::span<const double> p, double A, std::span<const double> q, double B, double penalty,
                            double lg_threshold) {
    const std::size_t m = p.size();
    const bool hard_clf = std::isinf(penalty);
    const double qn = std::sqrt(norm2(q));
    bool cbf_active_possible = true;
    if (qn <= lg_threshold) {
        if (B > 0) throw ControllerInfeasible("barrier constraint infeasible at this state");
        cbf_active_possible = false; // 0 >= B always holds
    }
    // Variables z = (u, delta); constraints G z <= b with
    //   g1 = (p, -1), b1 = A      (Lyapunov row, softened by delta)
    //   g2 = (-q, 0), b2 = -B     (barrier row)
    // Objective |u|^2 + P delta^2, so H^{-1} = diag(1/2 I, 1/(2P)).
    const double inv_p = hard_clf ? 0.0 : 1.0 / (2.0 * penalty);
    const double M11 = 0.5 * norm2(p) + inv_p;
    const double M22 = 0.5 * norm2(q);
    const double M12 = -0.5 * dot(p, q);

    auto build = [&](double l1, double l2, QpSolution& s) {
        s.u.assign(m, 0.0);
        for (std::size_t j = 0; j < m; ++j) s.u[j] = -0.5 * (l1 * p[j] - l2 * q[j]);
        s.delta = l1 * inv_p;
    };
    auto feasible = [&](const QpSolution& s) {
        const double tol = 1e-9 * (1.0 + std::abs(A) + std::abs(B));
        bool c1 = dot(p, s.u) - s.delta <= A + tol;
        bool c2 = !cbf_active_possible || dot(q, s.u) >= B - tol;
        return c1 && c2;
    };
    auto objective = [&](const QpSolution& s) {
        return norm2(s.u) + (hard_clf ? 0.0 : penalty * s.delta * s.delta);
    };

    std::optional<QpSolution> best;
    double best_obj = std::numeric_limits<double>::infinity();
    auto consider = [&](QpSolution s) {
        if (!feasible(s)) return;
        double obj = objective(s);
        if (!best || obj < best_obj - 1e-12 * (1.0 + std::abs(best_obj))) {
            best_obj = obj;
            best = std::move(s);
        }
    };

    {
        QpSolution s;
        build(0, 0, s);
        s.pattern = 0;
        consider(s);
    }
    if (M11 > 0) {
        double l1 = -A / M11;
        if (l1 >= 0) {
            QpSolution s;
            build(l1, 0, s);
            s.pattern = 1;
            consider(s);
        }
    }
    if (cbf_active_possible && M22 > 0) {
        double l2 = B / M22;
        if (l2 >= 0) {
            QpSolution s;
            build(0, l2, s);
            s.pattern = 2;
            consider(s);
        }
    }
    if (cbf_active_possible) {
        double det = M11 * M22 - M12 * M12;
        if (std::abs(det) > 1e-14 * (M11 * M22 + 1e-300)) {
            // M lambda = -b with b = (A, -B).
            double r1 = -A, r2 = B;
            double l1 = (M22 * r1 - M12 * r2) / det;
            double l2 = (M11 * r2 - M12 * r1) / det;
            if (l1 >= 0 && l2 >= 0) {
                QpSolution s;
                build(l1, l2, s);
                s.pattern = 3;
                consider(s);
            }
        }
    }
    if (!best) {
        if (hard_clf) return solve_clf_cbf_qp(p, A, q, B, 1e12, lg_threshold);
        throw ControllerInfeasible("no feasible active set found");
    }
    if (hard_clf) {
        // Rounding residue of an active CLF row is not a relaxation.
        const double excess = dot(p, best->u) - A;
        best->delta = excess > 1e-9 * (1.0 + std::abs(A) + std::abs(B)) ? excess : 0.0;
    }
    return *best;
}

QpSolution clf_cbf_qp(const ControlSystem& sys, const Field& V, const Field& W, const Field& h,
                      const KappaFunction& alpha, std::span<const double> x, double penalty, double lg_threshold) {
    LieDerivatives LV = lie_derivatives(sys, V, x);
    LieDerivatives Lh = lie_derivatives(sys, h, x);
    double A = -W.value(x) - LV.La;
    double B = -Lh.La - alpha(Lh.value);
    return solve_clf_cbf_qp(LV.Lg, A, Lh.Lg, B, penalty, lg_threshold);
}

ClfCbfQp::ClfCbfQp(const ControlSystem& sys, FieldPtr V, FieldPtr W, FieldPtr h, KappaFunction alpha, double penalty,
                   double lg_threshold)
    : sys_(&sys), V_(std::move(V)), W_(std::move(W)), h_(std::move(h)), alpha_(std::move(alpha)),
      penalty_(penalty), lg_threshold_(lg_threshold) {
    if (!sys.is_affine()) throw NotAffine();
}

double ClfCbfQp::compute(std::span<const double> x, std::span<double> u) const {
    QpSolution s = clf_cbf_qp(*sys_, *V_, *W_, *h_, alpha_, x, penalty_, lg_threshold_);
    std::copy(s.u.begin(), s.u.end(), u.begin());
    return s.delta;
}

std::string ClfCbfQp::describe() const { return "Lyapunov/barrier QP on " + h_->describe(); }

LatticeCbf::LatticeCbf(const ControlSystem& sys, FieldPtr h, KappaFunction alpha, int resolution)
    : sys_(&sys), h_(std::move(h)), alpha_(std::move(alpha)) {
    const std::size_t m = sys.m();
    if (resolution < 2) throw ConfigError("input lattice needs at least 2 points per input");
    Grid g(sys.input_box(), std::vector<int>(m, resolution));
    std::vector<std::size_t> order(g.size());
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> norms(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) norms[i] = norm2(g.point(i));
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return norms[a] < norms[b]; });
    for (std::size_t i : order) lattice_.push_back(g.point(i));
}

double LatticeCbf::compute(std::span<const double> x, std::span<double> u) const {
    const std::size_t n = sys_->n();
    double grad[16];
    double hv = h_->value_gradient(x, std::span<double>(grad, n));
    const double need = -alpha_(hv);
    double best = -std::numeric_limits<double>::infinity();
    const std::vector<double>* best_u = &lattice_.front();
    for (const auto& cand : lattice_) {
        double r = directional_rate_from_gradient(*sys_, std::span<const double>(grad, n), x, cand);
        if (r >= need) {
            std::copy(cand.begin(), cand.end(), u.begin());
            return 0.0;
        }
        if (r > best) {
            best = r;
            best_u = &cand;
        }
    }
    std::copy(best_u->begin(), best_u->end(), u.begin());
    return 0.0;
}

std::string LatticeCbf::describe() const { return "least-norm input lattice filter on " + h_->describe(); }

SimulationResult simulate(const ControlSystem& sys, const Controller& k, std::span<const double> x0, double T,
                          double dt, const SimulateOptions& opt) {
    if (!(T > 0) || !(dt > 0)) throw ConfigError("simulation needs T > 0 and dt > 0");
    const std::size_t n = sys.n(), m = sys.m();
    if (x0.size() != n) throw ConfigError("initial state has the wrong dimension");
    SimulationResult res;
    const long steps = std::lround(T / dt);
    std::vector<double> x(x0.begin(), x0.end()), u(m), tmp(n), k1(n), k2(n), k3(n), k4(n);

    auto record = [&](double t, const std::vector<double>& state) {
        double delta = k.compute(state, u);
        res.times.push_back(t);
        res.states.push_back(state);
        res.inputs.push_back(u);
        res.delta.push_back(delta);
        if (opt.h) res.h.push_back(opt.h->value(state));
        if (opt.V) res.V.push_back(opt.V->value(state));
    };
    auto rhs = [&](const std::vector<double>& state, std::vector<double>& out) {
        std::vector<double> uu(m);
        k.compute(state, uu);
        sys.f(state, uu, out);
    };
    auto finite_and_bounded = [&](const std::vector<double>& s) {
        double nn = 0.0;
        for (double v : s) {
            if (!std::isfinite(v)) return false;
            nn += v * v;
        }
        return std::sqrt(nn) <= opt.blowup_bound;
    };

    try {
        record(0.0, x);
        for (long i = 0; i < steps; ++i) {
            rhs(x, k1);
            for (std::size_t d = 0; d < n; ++d) tmp[d] = x[d] + 0.5 * dt * k1[d];
            rhs(tmp, k2);
            for (std::size_t d = 0; d < n; ++d) tmp[d] = x[d] + 0.5 * dt * k2[d];
            rhs(tmp, k3);
            for (std::size_t d = 0; d < n; ++d) tmp[d] = x[d] + dt * k3[d];
            rhs(tmp, k4);
            for (std::size_t d = 0; d < n; ++d) x[d] += dt / 6.0 * (k1[d] + 2 * k2[d] + 2 * k3[d] + k4[d]);
            double t = static_cast<double>(i + 1) * dt;
            if (!finite_and_bounded(x)) {
                res.termination = Termination::BlowUp;
                res.termination_time = t;
                res.message = "state norm exceeded " + std::to_string(opt.blowup_bound);
                return res;
            }
            record(t, x);
        }
    } catch (const ControllerInfeasible& e) {
        res.termination = Termination::ControllerInfeasible;
        res.termination_time = res.times.empty() ? 0.0 : res.times.back();
        res.message = e.what();
        return res;
    } catch (const DomainError& e) {
        res.termination = Termination::BlowUp;
        res.termination_time = res.times.empty() ? 0.0 : res.times.back();
        res.message = e.what();
        return res;
    }
    res.termination = Termination::HorizonReached;
    res.termination_time = res.times.back();
    return res;
}

InvarianceResult invariance_check(const SimulationResult& result, double tol) {
    if (result.times.empty() || result.h.size() != result.times.size())
        throw MalformedResult("simulation result has no h trace");
    InvarianceResult out;
    out.min_h = result.h.front();
    for (std::size_t i = 0; i < result.h.size(); ++i) {
        out.min_h = std::min(out.min_h, result.h[i]);
        if (result.h[i] < -tol && !out.first_violation) out.first_violation = result.times[i];
    }
    out.pass = !out.first_violation.has_value();
    return out;
}

InvarianceResult invariance_check(const SimulationResult& result, const Field& h, double tol) {
    if (result.times.empty() || result.states.size() != result.times.size())
        throw MalformedResult("simulation result has no states");
    SimulationResult copy;
    copy.times = result.times;
    for (const auto& s : result.states) copy.h.push_back(h.value(s));
    return invariance_check(copy, tol);
}

std::string termination_name(Termination t) {
    switch (t) {
    case Termination::HorizonReached: return "HorizonReached";
    case Termination::BlowUp: return "BlowUp";
    case Termination::ControllerInfeasible: return "ControllerInfeasible";
    }
    return "?";
}

} // namespace barrier
