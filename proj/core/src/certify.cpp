#include "barrier/certify.hpp"

#include "barrier/domain.hpp"
#include "barrier/errors.hpp"
#include "barrier/parallel.hpp"
#include "kk_table.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

namespace barrier {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

std::string fmt_point(const std::vector<double>& x) {
    std::string s = "(";
    for (std::size_t i = 0; i < x.size(); ++i) s += (i ? ", " : "") + fmt(x[i]);
    return s + ")";
}

double norm(std::span<const double> x) {
    double s = 0.0;
    for (double v : x) s += v * v;
    return std::sqrt(s);
}

// Best achievable rate at a point under an input policy.
class RateEvaluator {
public:
    RateEvaluator(const ControlSystem& sys, const Field& h, const InputPolicy& policy, const Tolerances& tol)
        : sys_(sys), h_(h), policy_(policy), tol_(tol) {
        if (policy.kind == InputPolicy::Kind::UnboundedAffine && !sys.is_affine()) throw NotAffine();
        if (policy.kind == InputPolicy::Kind::Feedback && !policy.controller)
            throw ConfigError("feedback policy needs a controller");
        if (policy.kind == InputPolicy::Kind::BoxSearch) {
            if (policy.resolution < 2) throw ConfigError("input lattice needs at least 2 points per input");
            if (sys.m() == 0) {
                lattice_.emplace_back();
            } else {
                Grid g(sys.input_box(), std::vector<int>(sys.m(), policy.resolution));
                for (std::size_t i = 0; i < g.size(); ++i) lattice_.push_back(g.point(i));
            }
        }
    }

    /// Returns h(x); writes the best rate and its input.
    double eval(std::span<const double> x, double& rate, std::vector<double>& u) const {
        const std::size_t n = sys_.n(), m = sys_.m();
        u.assign(m, 0.0);
        switch (policy_.kind) {
        case InputPolicy::Kind::UnboundedAffine: {
            LieDerivatives L = lie_derivatives(sys_, h_, x);
            double lg = norm(L.Lg);
            if (lg > tol_.lg_threshold) {
                rate = kInf;
                for (std::size_t j = 0; j < m; ++j) u[j] = L.Lg[j] / lg;
            } else {
                rate = L.La;
            }
            return L.value;
        }
        case InputPolicy::Kind::BoxSearch: {
            double grad[16];
            double hv = h_.value_gradient(x, std::span<double>(grad, n));
            double best = -kInf;
            const std::vector<double>* arg = &lattice_.front();
            for (const auto& cand : lattice_) {
                double r = directional_rate_from_gradient(sys_, std::span<const double>(grad, n), x, cand);
                if (r > best) {
                    best = r;
                    arg = &cand;
                }
            }
            rate = best;
            u = *arg;
            return hv;
        }
        case InputPolicy::Kind::Feedback: {
            double grad[16];
            double hv = h_.value_gradient(x, std::span<double>(grad, n));
            policy_.controller->compute(x, u);
            rate = directional_rate_from_gradient(sys_, std::span<const double>(grad, n), x, u);
            return hv;
        }
        }
        return 0.0;
    }

    /// h only; cheap filter before the rate.
    double value(std::span<const double> x) const { return h_.value(x); }

private:
    const ControlSystem& sys_;
    const Field& h_;
    const InputPolicy& policy_;
    const Tolerances& tol_;
    std::vector<std::vector<double>> lattice_;
};

struct PointData {
    Grid grid;
    std::vector<double> h, rate;
    std::vector<char> active; ///< rate evaluated (h >= -delta and no error)
    std::size_t failures = 0;
    std::string first_failure;
};

PointData evaluate_points(const ControlSystem& sys, const Field& h, const InputPolicy& policy, const Grid& grid,
                          const Tolerances& tol) {
    RateEvaluator ev(sys, h, policy, tol);
    PointData d;
    d.grid = grid;
    d.h.assign(grid.size(), kNaN);
    d.rate.assign(grid.size(), kNaN);
    d.active.assign(grid.size(), 0);
    std::vector<std::string> errors(grid.size());
    const double delta = tol.margin_tol;
    parallel_for(grid.size(), [&](std::size_t i) {
        double x[16];
        grid.point(i, std::span<double>(x, grid.dim()));
        std::span<const double> xs(x, grid.dim());
        try {
            double hv = ev.value(xs);
            d.h[i] = hv;
            if (!(hv >= -delta)) return;
            std::vector<double> u;
            double r = 0.0;
            ev.eval(xs, r, u);
            d.rate[i] = r;
            d.active[i] = 1;
        } catch (const Error& e) {
            errors[i] = e.what();
        }
    });
    for (std::size_t i = 0; i < grid.size(); ++i)
        if (!errors[i].empty()) {
            if (d.failures++ == 0) d.first_failure = errors[i];
        }
    return d;
}

EnvelopeColumn column_from(const PointData& d, std::span<const double> r_grid, const Tolerances& tol) {
    EnvelopeColumn col;
    col.box = d.grid.box();
    const double delta = tol.margin_tol;
    double running = -kInf;
    bool any = false;
    for (double r : r_grid) {
        double worst = kInf; // min rate
        bool hit = false;
        for (std::size_t i = 0; i < d.h.size(); ++i) {
            if (!d.active[i]) continue;
            double hv = d.h[i];
            bool in = r == 0.0 ? std::abs(hv) <= delta : (hv >= 0 && hv <= r);
            if (!in) continue;
            hit = true;
            worst = std::min(worst, d.rate[i]);
        }
        if (!hit) {
            col.notes.push_back("no lattice point in the band at r=" + fmt(r));
            col.beta.push_back(any ? running : kNaN);
            continue;
        }
        any = true;
        running = std::max(running, -worst);
        col.beta.push_back(running);
    }
    return col;
}

// Face-neighbour pairs where h changes sign but the safe endpoint lies above
// every band level: no envelope column sees that part of the boundary.
std::size_t unresolved_crossings(const PointData& d, std::span<const double> r_grid,
                                 std::optional<std::vector<double>>& example) {
    const double r_top = *std::max_element(r_grid.begin(), r_grid.end());
    const Grid& g = d.grid;
    const std::size_t n = g.dim();
    std::vector<int> idx(n);
    std::size_t count = 0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        g.unravel(i, idx);
        for (std::size_t k = 0; k < n; ++k) {
            if (idx[k] + 1 >= g.counts()[k]) continue;
            ++idx[k];
            std::size_t j = g.ravel(idx);
            --idx[k];
            double a = d.h[i], b = d.h[j];
            if (std::isnan(a) || std::isnan(b)) continue;
            if ((a >= 0) == (b >= 0)) continue;
            if (std::max(a, b) > r_top && count++ == 0) example = g.point(a >= 0 ? i : j);
        }
    }
    return count;
}

MarginRow make_row(const Grid& g, std::size_t i, double h, double rate, double ah) {
    MarginRow row;
    row.x = g.point(i);
    row.h = h;
    row.rate = rate;
    row.alpha_h = ah;
    row.slack = rate + ah;
    return row;
}

} // namespace

std::string verdict_name(Verdict v) {
    switch (v) {
    case Verdict::Certified: return "Certified";
    case Verdict::Refuted: return "Refuted";
    case Verdict::Inconclusive: return "Inconclusive";
    }
    return "?";
}

std::string InputPolicy::describe() const {
    switch (kind) {
    case Kind::UnboundedAffine: return "unbounded affine input";
    case Kind::BoxSearch: return "input-box lattice search (" + std::to_string(resolution) + " points per input)";
    case Kind::Feedback: return "witness controller " + (controller ? controller->describe() : std::string("?"));
    }
    return "?";
}

SupRate sup_rate(const ControlSystem& sys, const Field& h, std::span<const double> x, const InputPolicy& policy,
                 const Tolerances& tol) {
    RateEvaluator ev(sys, h, policy, tol);
    SupRate out;
    ev.eval(x, out.value, out.u);
    out.unbounded = std::isinf(out.value);
    return out;
}

EnvelopeColumn envelope(const ControlSystem& sys, const Field& h, const InputPolicy& policy, const Grid& grid,
                        std::span<const double> r_grid, const Tolerances& tol) {
    PointData d = evaluate_points(sys, h, policy, grid, tol);
    EnvelopeColumn col = column_from(d, r_grid, tol);
    if (d.failures) col.notes.push_back(std::to_string(d.failures) + " lattice points failed: " + d.first_failure);
    return col;
}

CertificationReport certify_cbf(const ControlSystem& sys, const Field& h, const CertificationConfig& config) {
    const Tolerances& tol = config.tol;
    if (!(tol.tol0 > 0 && tol.margin_tol > 0 && tol.lg_threshold > 0 && tol.strict_tol > 0 && tol.eps > 0))
        throw ConfigError("all tolerances must be positive");
    if (config.r_grid.empty()) throw ConfigError("r grid is empty");
    CertificationReport rep;
    rep.kind = "cbf";
    rep.r_grid = config.r_grid;
    rep.policy = config.policy.describe();

    std::vector<Grid> grids =
        config.expansion_steps > 1 ? grid_schedule(config.grid, config.expansion_factor, config.expansion_steps)
                                   : std::vector<Grid>{config.grid};
    PointData last;
    bool numeric_trouble = false;
    std::vector<std::string> unresolved;
    for (const Grid& g : grids) {
        PointData d = evaluate_points(sys, h, config.policy, g, tol);
        EnvelopeColumn col = column_from(d, config.r_grid, tol);
        if (d.failures) {
            numeric_trouble = true;
            col.notes.push_back(std::to_string(d.failures) + " lattice points failed: " + d.first_failure);
        }
        std::optional<std::vector<double>> where;
        if (std::size_t c = unresolved_crossings(d, config.r_grid, where); c && unresolved.empty())
            unresolved.push_back(std::to_string(c) + " sign changes of h between lattice neighbours have their safe end"
                                 " above every band level, e.g. at " + fmt_point(*where) + "; the lattice is too coarse to sample the"
                                 " boundary there");
        rep.envelopes.push_back(std::move(col));
        last = std::move(d);
    }

    // Divergence across expansions.
    const int ms = config.divergence.min_steps;
    const std::size_t K = rep.envelopes.size();
    for (std::size_t i = 0; i < config.r_grid.size() && !rep.divergence; ++i) {
        std::vector<double> col;
        for (const auto& e : rep.envelopes) col.push_back(e.beta[i]);
        for (std::size_t k = 0; k + static_cast<std::size_t>(ms) < K; ++k) {
            bool increasing = true;
            for (int s = 0; s < ms; ++s)
                if (!(col[k + static_cast<std::size_t>(s) + 1] > col[k + static_cast<std::size_t>(s)])) increasing = false;
            double first = col[k], lastv = col[k + static_cast<std::size_t>(ms)];
            if (increasing && first > 0 && lastv >= config.divergence.drop_factor * first) {
                rep.divergence = std::make_pair(config.r_grid[i], col);
                break;
            }
        }
    }
    if (rep.divergence) {
        rep.verdict = Verdict::Refuted;
        rep.notes.push_back("envelope at r=" + fmt(rep.divergence->first) + " grows by at least a factor " +
                            fmt(config.divergence.drop_factor) + " over " + std::to_string(ms) +
                            " box expansions; no fixed comparison function can dominate it");
        return rep;
    }

    // Per-point samples on the largest box.
    const double delta = tol.margin_tol;
    std::vector<std::pair<double, double>> samples;
    std::size_t worst_zero = last.h.size();
    double worst_zero_v = -kInf;
    for (std::size_t i = 0; i < last.h.size(); ++i) {
        if (!last.active[i]) continue;
        double v = -last.rate[i];
        if (std::isinf(v) && v < 0) continue;
        double r = last.h[i] <= delta ? 0.0 : last.h[i];
        samples.emplace_back(r, v);
        if (r == 0.0 && v > worst_zero_v) {
            worst_zero_v = v;
            worst_zero = i;
        }
    }
    MajorantOptions mo{tol.tol0, tol.eps};
    try {
        rep.alpha = fit_majorant(samples, mo);
    } catch (const InfeasibleMajorant& e) {
        rep.verdict = Verdict::Refuted;
        if (worst_zero < last.h.size())
            rep.witness = make_row(last.grid, worst_zero, last.h[worst_zero], last.rate[worst_zero], 0.0);
        rep.notes.push_back("boundary rate " + fmt(-e.value()) + " is below -tol0: the flow leaves the safe set");
        return rep;
    }

    for (std::size_t i = 0; i < last.h.size(); ++i) {
        if (!last.active[i] || last.h[i] < 0) continue;
        MarginRow row = make_row(last.grid, i, last.h[i], last.rate[i], (*rep.alpha)(last.h[i]));
        if (!rep.worst || row.slack < rep.worst->slack) rep.worst = row;
        rep.margins.push_back(std::move(row));
    }

    if (numeric_trouble) {
        rep.verdict = Verdict::Inconclusive;
        rep.notes.push_back("evaluation failed at some lattice points; not certifying");
        return rep;
    }
    if (!unresolved.empty()) {
        rep.verdict = Verdict::Inconclusive;
        rep.notes.push_back(unresolved.front());
        return rep;
    }
    if (K >= 2) {
        const auto& a = rep.envelopes[K - 2].beta;
        const auto& b = rep.envelopes[K - 1].beta;
        for (std::size_t i = 0; i < a.size(); ++i) {
            double pa = std::isnan(a[i]) ? 0.0 : std::max(a[i], 0.0);
            double pb = std::isnan(b[i]) ? 0.0 : std::max(b[i], 0.0);
            if (pb > pa + tol.margin_tol * (1.0 + pa)) {
                rep.verdict = Verdict::Inconclusive;
                rep.notes.push_back("envelope at r=" + fmt(config.r_grid[i]) + " still grows on the last expansion (" +
                                    fmt(pa) + " -> " + fmt(pb) + "); the fit may not hold beyond the box");
                return rep;
            }
        }
    }
    if (rep.worst && rep.worst->slack < -tol.margin_tol) {
        rep.verdict = Verdict::Inconclusive;
        rep.notes.push_back("fitted comparison function misses the margin at a sampled point");
        return rep;
    }
    rep.verdict = Verdict::Certified;
    return rep;
}

CertificationReport certify_ecbf(const ControlSystem& sys, const Field& h, const CertificationConfig& config,
                                 const std::optional<KappaKappaFunction>& candidate) {
    const Tolerances& tol = config.tol;
    CertificationReport rep;
    rep.kind = "ecbf";
    rep.policy = config.policy.describe();
    const Grid& grid = config.grid;
    const std::size_t n = grid.dim();
    PointData d = evaluate_points(sys, h, config.policy, grid, tol);
    if (d.failures) rep.notes.push_back(std::to_string(d.failures) + " lattice points failed: " + d.first_failure);

    std::vector<double> r = config.r_grid;
    if (r.empty() || r.front() != 0.0) r.insert(r.begin(), 0.0);
    std::vector<double> norms(grid.size());
    double max_norm = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        norms[i] = norm(grid.point(i));
        max_norm = std::max(max_norm, norms[i]);
    }
    const double delta = tol.margin_tol;
    rep.c_min = kInf;
    {
        std::vector<int> idx(n), nb(n);
        for (std::size_t i = 0; i < grid.size(); ++i) {
            if (!(d.h[i] >= -delta)) continue;
            bool boundary = std::abs(d.h[i]) <= delta;
            grid.unravel(i, idx);
            for (std::size_t k = 0; k < n && !boundary; ++k)
                for (int s : {-1, 1}) {
                    nb = idx;
                    nb[k] += s;
                    if (nb[k] < 0 || nb[k] >= grid.counts()[k]) continue;
                    if (d.h[grid.ravel(nb)] < 0) boundary = true;
                }
            if (boundary) rep.c_min = std::min(rep.c_min, norms[i]);
        }
    }
    if (!std::isfinite(rep.c_min)) {
        rep.c_min = 0.0;
        rep.notes.push_back("no boundary point found on the lattice; c_min set to 0");
    }
    std::vector<double> c = config.c_grid;
    if (c.empty()) {
        for (int k = 0; k <= 8; ++k) c.push_back(max_norm * k / 8.0);
    }
    if (c.front() != 0.0) c.insert(c.begin(), 0.0);
    rep.r_grid = r;
    rep.c_grid = c;

    detail::KkTable table(r, c, delta);
    std::size_t witness = grid.size();
    double witness_v = -kInf;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (!d.active[i]) continue;
        double val = -d.rate[i];
        if (std::isinf(val) && val < 0) continue;
        if (table.add(d.h[i], norms[i] - rep.c_min, val) == 0 && val > witness_v) {
            witness_v = val;
            witness = i;
        }
    }
    try {
        rep.alpha2 = fit_kk_majorant(r, c, table.values(), MajorantOptions{tol.tol0, tol.eps});
    } catch (const InfeasibleMajorant& e) {
        rep.verdict = Verdict::Refuted;
        if (witness < grid.size()) rep.witness = make_row(grid, witness, d.h[witness], d.rate[witness], 0.0);
        rep.notes.push_back("boundary rate " + fmt(-e.value()) + " is below -tol0: the flow leaves the safe set");
        return rep;
    }
    double cand_min = kInf;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (!d.active[i] || d.h[i] < 0) continue;
        MarginRow row = make_row(grid, i, d.h[i], d.rate[i], (*rep.alpha2)(d.h[i], norms[i]));
        if (!rep.worst || row.slack < rep.worst->slack) rep.worst = row;
        if (candidate) cand_min = std::min(cand_min, d.rate[i] + (*candidate)(d.h[i], norms[i]));
        rep.margins.push_back(std::move(row));
    }
    if (candidate) rep.candidate_margin = cand_min;
    if (d.failures) {
        rep.verdict = Verdict::Inconclusive;
        return rep;
    }
    if (rep.worst && rep.worst->slack < -tol.margin_tol) {
        rep.verdict = Verdict::Inconclusive;
        rep.notes.push_back("fitted comparison function misses the margin at a sampled point");
        return rep;
    }
    rep.verdict = Verdict::Certified;
    return rep;
}

SequenceEvidence refute_via_sequence(const ControlSystem& sys, const ScalarField& h,
                                     const std::vector<std::vector<Extended>>& points, double band_lo,
                                     double band_hi, const ExpressionFeedback* k, double drop_factor) {
    std::vector<expr::Expression> f;
    if (sys.m() == 0) {
        for (const auto& fi : sys.dynamics()) f.push_back(fi.rebind(sys.state_vars()));
    } else {
        if (!k) throw ConfigError("a feedback is needed for systems with inputs");
        f = closed_loop(sys, k->expressions());
    }
    const std::size_t n = sys.n();
    const expr::Expression he = h.expression().rebind(sys.state_vars());
    SequenceEvidence ev;
    for (std::size_t p = 0; p < points.size(); ++p) {
        const auto& x = points[p];
        if (x.size() != n) throw ConfigError("sequence point has the wrong dimension");
        std::vector<ExtendedDual> xd(n);
        for (std::size_t i = 0; i < n; ++i) {
            xd[i] = ExtendedDual(x[i], static_cast<int>(n));
            for (std::size_t j = 0; j < n; ++j) xd[i].partials[j] = Extended(i == j ? 1 : 0);
        }
        ExtendedDual hv = eval_dual_extended(he, xd);
        Extended rate = 0;
        for (std::size_t i = 0; i < n; ++i) rate += hv.partials[i] * eval_extended(f[i], x);
        double hd = static_cast<double>(hv.value);
        if (!(hd >= band_lo && hd <= band_hi)) throw BandViolation(p, hd);
        ev.h.push_back(hd);
        ev.rate.push_back(static_cast<double>(rate));
    }
    bool decreasing = ev.rate.size() >= 2;
    for (std::size_t i = 1; i < ev.rate.size(); ++i)
        if (!(ev.rate[i] < ev.rate[i - 1])) decreasing = false;
    if (decreasing && ev.rate.front() < 0) ev.divergent = ev.rate.back() / ev.rate.front() >= drop_factor;
    ev.summary = ev.divergent ? "rates fall without bound while h stays in [" + fmt(band_lo) + ", " + fmt(band_hi) + "]"
                              : "no divergence detected";
    return ev;
}

std::pair<ScalarField, ScalarField> exp_rescale(const ControlSystem& sys, const ScalarField& h,
                                                const ExpressionFeedback& k) {
    const auto& xs = sys.state_vars();
    expr::Expression he = h.expression().rebind(xs);
    expr::Expression tilde = he * expr::call(expr::Function::Exp, {-he});
    std::vector<expr::Expression> f =
        sys.m() == 0 ? std::vector<expr::Expression>{} : closed_loop(sys, k.expressions());
    if (sys.m() == 0)
        for (const auto& fi : sys.dynamics()) f.push_back(fi.rebind(xs));
    expr::Expression sq = f[0] * f[0];
    for (std::size_t i = 1; i < f.size(); ++i) sq = sq + f[i] * f[i];
    expr::Expression bar = expr::call(expr::Function::Exp, {-sq}) * he;
    return {ScalarField(tilde), ScalarField(bar)};
}

Extended bisect(const expr::Expression& g, Extended lo, Extended hi, Extended target, int iterations) {
    auto at = [&](const Extended& a) {
        Extended x[1] = {a};
        return eval_extended(g, std::span<const Extended>(x, 1)) - target;
    };
    Extended flo = at(lo), fhi = at(hi);
    if ((flo > 0) == (fhi > 0)) throw Error("bisection interval does not bracket the target");
    for (int it = 0; it < iterations; ++it) {
        Extended mid = (lo + hi) / 2;
        if (mid == lo || mid == hi) break;
        Extended fm = at(mid);
        if ((fm > 0) == (flo > 0)) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    return (lo + hi) / 2;
}

} // namespace barrier
