#include "barrier/compat.hpp"

#include "barrier/errors.hpp"
#include "barrier/parallel.hpp"
#include "kk_table.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

namespace barrier {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

std::string fmt_point(std::span<const double> x) {
    std::string s = "(";
    for (std::size_t i = 0; i < x.size(); ++i) s += (i ? ", " : "") + fmt(x[i]);
    return s + ")";
}

std::vector<double> scaled(std::span<const double> v, double k) {
    std::vector<double> out(v.begin(), v.end());
    for (double& e : out) e *= k;
    return out;
}

void fill_slacks(PointCompat& pc) {
    const HalfSpaces& hs = pc.data;
    pc.clf_slack = hs.A - dot(hs.p, pc.u);
    pc.cbf_slack = dot(hs.q, pc.u) - hs.B;
}

void aggregate(PairReport& rep) {
    rep.strict = rep.compatible = rep.incompatible = rep.origin = 0;
    rep.worst_slack = kInf;
    rep.worst_point.reset();
    rep.non_strict_points.clear();
    for (std::size_t k = 0; k < rep.points.size(); ++k) {
        const PointCompat& pc = rep.points[k];
        if (pc.origin) {
            ++rep.origin;
            continue;
        }
        switch (pc.status) {
        case PairStatus::StrictlyCompatible: ++rep.strict; break;
        case PairStatus::Compatible: ++rep.compatible; break;
        case PairStatus::Incompatible: ++rep.incompatible; break;
        }
        std::vector<double> x = rep.grid.point(rep.indices[k]);
        if (pc.status != PairStatus::StrictlyCompatible) rep.non_strict_points.push_back(x);
        double s = std::min(pc.clf_slack, pc.cbf_slack);
        if (s < rep.worst_slack) {
            rep.worst_slack = s;
            rep.worst_point = x;
        }
    }
    if (!rep.worst_point) rep.worst_slack = 0.0;
    if (rep.incompatible)
        rep.region = PairStatus::Incompatible;
    else if (rep.compatible)
        rep.region = PairStatus::Compatible;
    else
        rep.region = PairStatus::StrictlyCompatible;
}

double origin_ball(const Grid& grid, double cells) { return cells * grid.min_spacing() * (1.0 + 1e-9); }

} // namespace

double BarrierAlpha::operator()(double h, double norm_x) const {
    if (const auto* a = std::get_if<KappaFunction>(&alpha_)) return (*a)(h);
    return std::get<KappaKappaFunction>(alpha_)(h, norm_x);
}

std::string BarrierAlpha::describe() const {
    return std::visit([](const auto& a) { return a.describe(); }, alpha_);
}

std::string pair_status_name(PairStatus s) {
    switch (s) {
    case PairStatus::StrictlyCompatible: return "StrictlyCompatible";
    case PairStatus::Compatible: return "Compatible";
    case PairStatus::Incompatible: return "Incompatible";
    }
    return "?";
}

HalfSpaces pair_half_spaces(const ControlSystem& sys, const ClfSpec& clf, const Field& h, const BarrierAlpha& alpha,
                            std::span<const double> x) {
    if (!clf.V || !clf.W) throw ConfigError("CLF needs both V and W");
    LieDerivatives LV = lie_derivatives(sys, *clf.V, x);
    LieDerivatives Lh = lie_derivatives(sys, h, x);
    HalfSpaces hs;
    hs.p = LV.Lg;
    hs.A = -clf.W->value(x) - LV.La;
    hs.q = Lh.Lg;
    hs.B = -Lh.La - alpha(Lh.value, norm(x));
    return hs;
}

PointCompat classify_half_spaces(const HalfSpaces& hs, const CompatOptions& opt) {
    PointCompat pc;
    pc.data = hs;
    const double s = opt.strict_tol;
    const double np = norm(hs.p), nq = norm(hs.q);
    const bool p0 = np <= opt.lg_threshold, q0 = nq <= opt.lg_threshold;
    const std::size_t m = hs.p.size();
    auto finish = [&](bool feasible) {
        if (!feasible) {
            pc.status = PairStatus::Incompatible;
            pc.u.clear();
            return pc;
        }
        pc.status = pc.clf_slack >= s && pc.cbf_slack >= s ? PairStatus::StrictlyCompatible : PairStatus::Compatible;
        return pc;
    };

    if (p0 && q0) {
        pc.u.assign(m, 0.0);
        fill_slacks(pc);
        return finish(hs.A >= 0 && hs.B <= 0);
    }
    if (p0) {
        pc.u = scaled(hs.q, (hs.B + 1.0) / (nq * nq));
        fill_slacks(pc);
        return finish(hs.A >= 0);
    }
    if (q0) {
        pc.u = scaled(hs.p, (hs.A - 1.0) / (np * np));
        fill_slacks(pc);
        return finish(hs.B <= 0);
    }
    const double pq = dot(hs.p, hs.q);
    const double cosine = pq / (np * nq);
    if (std::abs(cosine) < std::cos(opt.angle_tol)) {
        // u = a p + b q with p.u = A - 1 and q.u = B + 1.
        const double pp = np * np, qq = nq * nq;
        const double det = pp * qq - pq * pq;
        const double a = ((hs.A - 1.0) * qq - pq * (hs.B + 1.0)) / det;
        const double b = (pp * (hs.B + 1.0) - pq * (hs.A - 1.0)) / det;
        pc.u.assign(m, 0.0);
        for (std::size_t i = 0; i < m; ++i) pc.u[i] = a * hs.p[i] + b * hs.q[i];
        fill_slacks(pc);
        return finish(true);
    }
    // Collinear: p ~ kappa q, reduce to t = q.u.
    const double qq = dot(hs.q, hs.q);
    const double kappa = pq / qq;
    double t;
    bool feasible = true;
    if (kappa > 0) {
        const double hi = hs.A / kappa;
        // Touching half-spaces must survive the rounding in kappa.
        const double touch = 1e-12 * (1.0 + std::abs(hs.B) + std::abs(hi));
        if (hs.B + s <= (hs.A - s) / kappa)
            t = 0.5 * ((hs.B + s) + (hs.A - s) / kappa);
        else if (hs.B <= hi + touch)
            t = std::max(hs.B, 0.5 * (hs.B + hi));
        else {
            feasible = false;
            t = hs.B;
        }
    } else {
        t = std::max(hs.B + 1.0, (hs.A - 1.0) / kappa);
    }
    pc.u = scaled(hs.q, t / qq);
    fill_slacks(pc);
    return finish(feasible);
}

PointCompat point_compat(const ControlSystem& sys, const ClfSpec& clf, const Field& h, const BarrierAlpha& alpha,
                         std::span<const double> x, const CompatOptions& opt) {
    if (!sys.is_affine()) throw NotAffine();
    PointCompat pc = classify_half_spaces(pair_half_spaces(sys, clf, h, alpha, x), opt);
    if (norm(x) <= opt.origin_radius) {
        pc.origin = true;
        pc.status = PairStatus::Compatible;
    }
    return pc;
}

PairReport compat_scan(const ControlSystem& sys, const ClfSpec& clf, const Field& h, const BarrierAlpha& alpha,
                       const Grid& grid, const CompatOptions& opt, const Field* region) {
    if (!sys.is_affine()) throw NotAffine();
    const Field& reg = region ? *region : h;
    std::vector<double> rv = evaluate_on_grid(reg, grid);
    PairReport rep;
    rep.grid = grid;
    for (std::size_t i = 0; i < grid.size(); ++i)
        if (rv[i] >= 0) rep.indices.push_back(i);
    if (rep.indices.empty()) throw EmptyRegion();
    rep.points.resize(rep.indices.size());
    parallel_for(rep.indices.size(), [&](std::size_t k) {
        std::vector<double> x = grid.point(rep.indices[k]);
        rep.points[k] = point_compat(sys, clf, h, alpha, x, opt);
    });
    aggregate(rep);
    return rep;
}

std::vector<std::size_t> boundary_points(const std::vector<double>& hvals, const Grid& grid, double delta) {
    const std::size_t n = grid.dim();
    std::vector<std::size_t> out;
    std::vector<int> idx(n), nb(n);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (!(hvals[i] >= -delta)) continue;
        bool hit = std::abs(hvals[i]) <= delta;
        if (!hit && hvals[i] >= 0) {
            grid.unravel(i, idx);
            for (std::size_t d = 0; d < n && !hit; ++d)
                for (int s : {-1, 1}) {
                    nb = idx;
                    nb[d] += s;
                    if (nb[d] < 0 || nb[d] >= grid.counts()[d]) continue;
                    if (hvals[grid.ravel(nb)] < 0) hit = true;
                }
        }
        if (hit) out.push_back(i);
    }
    return out;
}

ClbfCheck clbf_verify(const ControlSystem& sys, const Field& Vbar, const Field& h, const Grid& grid,
                      const ClbfOptions& opt) {
    const std::size_t n = grid.dim();
    std::vector<double> vb = evaluate_on_grid(Vbar, grid);
    std::vector<double> hv = evaluate_on_grid(h, grid);
    ClbfCheck chk;

    chk.proper = true;
    chk.positive_outside = true;
    chk.sublevel_nonempty = false;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (vb[i] <= 0) {
            chk.sublevel_nonempty = true;
            if (grid.on_face(i) && chk.proper) {
                chk.proper = false;
                chk.violations.push_back("sublevel set {Vbar <= 0} reaches the box face at " +
                                         fmt_point(grid.point(i)) + "; no proper function has this sublevel set, "
                                         "and no such function exists for an unbounded safe set");
            }
        }
        if (hv[i] < 0 && !(vb[i] > 0) && chk.positive_outside) {
            chk.positive_outside = false;
            chk.violations.push_back("Vbar <= 0 outside the safe set at " + fmt_point(grid.point(i)));
        }
    }
    if (!chk.sublevel_nonempty) chk.violations.push_back("sublevel set {Vbar <= 0} has no lattice point");

    // One-cell dilation of C minus U must miss the unsafe set.
    chk.closure_disjoint = true;
    {
        std::vector<int> idx(n), nb(n), off(n);
        for (std::size_t i = 0; i < grid.size() && chk.closure_disjoint; ++i) {
            if (!(hv[i] >= 0 && vb[i] > 0)) continue;
            grid.unravel(i, idx);
            std::fill(off.begin(), off.end(), -1);
            while (true) {
                bool inside = true;
                for (std::size_t d = 0; d < n; ++d) {
                    nb[d] = idx[d] + off[d];
                    if (nb[d] < 0 || nb[d] >= grid.counts()[d]) inside = false;
                }
                if (inside && hv[grid.ravel(nb)] < 0) {
                    chk.closure_disjoint = false;
                    chk.violations.push_back("closure of the safe set minus {Vbar <= 0} touches the unsafe set at " +
                                             fmt_point(grid.point(i)));
                    break;
                }
                std::size_t d = n;
                bool done = true;
                while (d > 0) {
                    --d;
                    if (++off[d] <= 1) {
                        done = false;
                        break;
                    }
                    off[d] = -1;
                }
                if (done) break;
            }
        }
    }

    // Decrease on C away from the origin.
    const double ball = origin_ball(grid, opt.origin_cells);
    std::vector<std::vector<double>> lattice;
    if (!sys.is_affine()) {
        if (sys.m() == 0) {
            lattice.emplace_back();
        } else {
            Grid ug(sys.input_box(), std::vector<int>(sys.m(), opt.input_resolution));
            for (std::size_t k = 0; k < ug.size(); ++k) lattice.push_back(ug.point(k));
        }
    }
    std::vector<double> best(grid.size(), -kInf);
    parallel_for(grid.size(), [&](std::size_t i) {
        if (!(hv[i] >= 0)) return;
        std::vector<double> x = grid.point(i);
        if (norm(x) <= ball) return;
        if (sys.is_affine()) {
            LieDerivatives L = lie_derivatives(sys, Vbar, x);
            best[i] = norm(L.Lg) > opt.lg_threshold ? -kInf : L.La;
        } else {
            std::vector<double> grad(n);
            Vbar.value_gradient(x, grad);
            double m = kInf;
            for (const auto& u : lattice) m = std::min(m, directional_rate_from_gradient(sys, grad, x, u));
            best[i] = m;
        }
    });
    chk.decrease = true;
    for (std::size_t i = 0; i < grid.size(); ++i)
        if (best[i] >= -opt.strict_tol) {
            chk.decrease = false;
            chk.decrease_failures.push_back(grid.point(i));
        }
    if (!chk.decrease)
        chk.violations.push_back(std::to_string(chk.decrease_failures.size()) +
                                 " points of the safe set where no input decreases Vbar, first at " +
                                 fmt_point(chk.decrease_failures.front()));
    return chk;
}

ClbfConstruction clbf_construct(const ControlSystem& sys, FieldPtr h, const Controller& u_str,
                                const Controller& u_st, const ClfSpec& clf, const Grid& grid,
                                const ClbfOptions& opt) {
    (void)u_st;
    if (!h || !clf.V) throw ConfigError("construction needs h and V");
    const std::size_t n = grid.dim();
    ClbfConstruction out;
    std::vector<double> hv = evaluate_on_grid(*h, grid);
    std::vector<double> Vv = evaluate_on_grid(*clf.V, grid);
    std::vector<double> rate(grid.size());
    std::vector<char> rate_ok(grid.size(), 1);
    parallel_for(grid.size(), [&](std::size_t i) {
        if (!(hv[i] >= 0)) return;
        std::vector<double> x = grid.point(i), u(sys.m());
        try {
            u_str.compute(x, u);
            rate[i] = directional_rate(sys, *h, x, u);
        } catch (const Error&) {
            rate_ok[i] = 0;
        }
    });

    // 1: inward rate on the boundary band.
    std::vector<std::size_t> band = boundary_points(hv, grid, opt.strict_tol);
    if (band.empty()) throw StageFailure(1, "no boundary lattice points");
    out.m_star = kInf;
    std::size_t arg = band.front();
    for (std::size_t i : band) {
        double r = rate_ok[i] ? rate[i] : -kInf;
        if (r < out.m_star) {
            out.m_star = r;
            arg = i;
        }
    }
    out.log.push_back("stage 1: min inward rate on the boundary " + fmt(out.m_star));
    if (!(out.m_star > opt.strict_tol))
        throw StageFailure(1, "inward rate " + fmt(out.m_star) + " at " + fmt_point(grid.point(arg)));

    // 2: band width.
    double hmax = -kInf, h0 = h->value(std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < grid.size(); ++i) hmax = std::max(hmax, hv[i]);
    out.eps = 0.0;
    for (int k = 0; k <= 20 && out.eps == 0.0; ++k) {
        double eps = hmax / std::pow(2.0, k);
        if (!(h0 > eps)) continue;
        bool ok = true;
        for (std::size_t i = 0; i < grid.size() && ok; ++i)
            if (hv[i] >= 0 && hv[i] <= eps) {
                std::vector<double> x = grid.point(i);
                if (norm(x) <= origin_ball(grid, opt.origin_cells)) continue;
                if (!rate_ok[i] || !(rate[i] > 0)) ok = false;
            }
        if (ok) out.eps = eps;
    }
    if (out.eps == 0.0) throw StageFailure(2, "no band width in the halving schedule keeps the inward rate positive");
    out.log.push_back("stage 2: eps = " + fmt(out.eps));

    // 3: weight of V.
    const double half = 0.5 * out.eps;
    std::vector<double> phi(grid.size());
    auto try_lambda = [&](double lambda) {
        for (std::size_t i = 0; i < grid.size(); ++i) phi[i] = Vv[i] / lambda + hv[i] - half;
        bool crosses = false, clear = true;
        std::vector<int> idx(n), nb(n);
        for (std::size_t i = 0; i < grid.size(); ++i) {
            if (!(hv[i] >= 0)) continue;
            grid.unravel(i, idx);
            for (std::size_t d = 0; d < n; ++d)
                for (int s : {-1, 1}) {
                    nb = idx;
                    nb[d] += s;
                    if (nb[d] < 0 || nb[d] >= grid.counts()[d]) continue;
                    std::size_t j = grid.ravel(nb);
                    bool in_t = hv[i] <= out.eps && hv[j] >= 0 && hv[j] <= out.eps;
                    if (in_t && (phi[i] >= 0) != (phi[j] >= 0)) crosses = true;
                }
            if (phi[i] >= 0) {
                // Pi must stay one cell away from the unsafe set.
                std::vector<int> off(n, -1);
                while (true) {
                    bool inside = true;
                    for (std::size_t d = 0; d < n; ++d) {
                        nb[d] = idx[d] + off[d];
                        if (nb[d] < 0 || nb[d] >= grid.counts()[d]) inside = false;
                    }
                    if (!inside || hv[grid.ravel(nb)] < 0) clear = false;
                    std::size_t d = n;
                    bool done = true;
                    while (d > 0) {
                        --d;
                        if (++off[d] <= 1) {
                            done = false;
                            break;
                        }
                        off[d] = -1;
                    }
                    if (done || !clear) break;
                }
            }
            if (!clear) return false;
        }
        return crosses;
    };
    out.lambda = 0.0;
    for (int k = 0; k <= 20; ++k) {
        double lambda = std::pow(2.0, k);
        if (try_lambda(lambda)) {
            out.lambda = lambda;
            break;
        }
    }
    if (out.lambda == 0.0)
        throw StageFailure(3, "no power of two up to 2^20 puts the level set V/lambda + h = eps/2 inside the band");
    out.log.push_back("stage 3: lambda = " + fmt(out.lambda));

    // 4: clipped function, shifted by eps/2 so the clip level is 0.
    std::vector<double> clipped(grid.size(), 0.0);
    for (std::size_t i = 0; i < grid.size(); ++i)
        if (hv[i] >= 0) clipped[i] = std::max(phi[i], 0.0);
    out.log.push_back("stage 4: clipped at eps/2 outside the level set");

    // 5: smoothing.
    SmoothedField sf;
    try {
        sf = mollify(grid, clipped, 2.0 * grid.min_spacing());
    } catch (const BandwidthExhausted& e) {
        throw StageFailure(5, std::to_string(e.points().size()) + " points violate the smoothing bound, first at " +
                                  fmt_point(grid.point(e.points().front())));
    }
    std::vector<double> psi(sf.values);
    for (double& v : psi) v += half;
    out.psi = std::make_shared<SampledField>(grid, std::move(psi), "smoothed value");
    out.log.push_back("stage 5: smoothed with bandwidth " + fmt(sf.base_sigma));

    // 6: Vbar = -h + psi - eps/2.
    out.Vbar = std::make_shared<LinearField>(std::vector<std::pair<double, FieldPtr>>{{-1.0, h}, {1.0, out.psi}}, -half);
    out.log.push_back("stage 6: Vbar = -h + psi - eps/2");

    // 7: verification.
    out.check = clbf_verify(sys, *out.Vbar, *h, grid, opt);
    if (!out.check.pass()) {
        std::string ev;
        for (const auto& v : out.check.violations) ev += (ev.empty() ? "" : "; ") + v;
        throw StageFailure(7, ev);
    }
    out.log.push_back("stage 7: all conditions hold on the lattice");
    return out;
}

DerivedPair clbf_to_pair(const ControlSystem& sys, const ClbfConstruction& clbf, const Field& h_original,
                         const std::vector<const Controller*>& witnesses, const Grid& grid, const ClbfOptions& opt) {
    if (!sys.is_affine()) throw NotAffine();
    const std::size_t n = grid.dim();
    std::vector<double> vb = evaluate_on_grid(*clbf.Vbar, grid);
    std::size_t amin = static_cast<std::size_t>(std::min_element(vb.begin(), vb.end()) - vb.begin());
    std::vector<double> argmin = grid.point(amin);
    double cell = 0.0;
    for (std::size_t d = 0; d < n; ++d) cell = std::max(cell, grid.spacing(d));
    if (norm(argmin) > opt.origin_cells * cell * (1.0 + 1e-9)) throw ArgminNotOrigin(argmin);

    const double v0 = clbf.Vbar->value(std::vector<double>(n, 0.0));
    DerivedPair out;
    out.argmin = argmin;
    out.clf.V = std::make_shared<LinearField>(std::vector<std::pair<double, FieldPtr>>{{1.0, clbf.Vbar}}, -v0);
    out.h = std::make_shared<LinearField>(std::vector<std::pair<double, FieldPtr>>{{-1.0, clbf.Vbar}}, 0.0);
    out.alpha = KappaFunction::linear(1.0);

    std::vector<double> W(grid.size());
    parallel_for(grid.size(), [&](std::size_t i) {
        std::vector<double> x = grid.point(i), u(sys.m());
        LieDerivatives L = lie_derivatives(sys, *clbf.Vbar, x);
        double best = kInf;
        for (const Controller* k : witnesses) {
            try {
                k->compute(x, u);
                best = std::min(best, directional_rate(sys, *clbf.Vbar, x, u));
            } catch (const Error&) {
            }
        }
        double lg2 = dot(L.Lg, L.Lg);
        best = std::min(best, L.La - lg2); // u = -Lg Vbar^T
        W[i] = -0.5 * best;
    });
    out.clf.W = std::make_shared<SampledField>(grid, std::move(W), "half the witness decrease rate");

    CompatOptions co;
    co.strict_tol = opt.strict_tol;
    co.lg_threshold = opt.lg_threshold;
    co.origin_radius = origin_ball(grid, opt.origin_cells);
    out.report = compat_scan(sys, out.clf, *out.h, BarrierAlpha(out.alpha), grid, co, &h_original);
    return out;
}

std::vector<Obstruction> obstruction_diagnose(const Field& h, const Grid& grid) {
    std::vector<Obstruction> out;
    ComponentReport neg = flood_fill(h, grid, Sign::Negative);
    for (const auto& c : neg.components) {
        if (!c.bounded()) continue;
        Obstruction o;
        o.kind = "bounded_unsafe_component";
        o.message = "the unsafe set has a bounded component near " + fmt_point(c.representative) +
                    ": no strictly compatible CLF-CBF pair and no Lyapunov-barrier function exist "
                    "(boundedness judged on the sampled boxes only)";
        o.evidence = c.representative;
        o.cells = c.cells;
        out.push_back(std::move(o));
    }
    ComponentReport pos = flood_fill(h, grid, Sign::Nonnegative);
    const Component* reaching = nullptr;
    for (const auto& c : pos.components)
        if (c.touches_boundary) {
            reaching = &c;
            break;
        }
    if (reaching) {
        ComponentReport wide = flood_fill(h, grid.expanded(2.0), Sign::Nonnegative);
        bool still = std::any_of(wide.components.begin(), wide.components.end(),
                                 [](const Component& c) { return c.touches_boundary; });
        if (still) {
            Obstruction o;
            o.kind = "unbounded_safe_set";
            o.message = "the safe set reaches the faces of the box and of its expansion: no Lyapunov-barrier "
                        "function exists for an unbounded safe set (unboundedness judged on the sampled boxes only)";
            o.evidence = reaching->representative;
            o.cells = reaching->cells;
            out.push_back(std::move(o));
        }
    }
    return out;
}

StabilizerPair pair_from_safe_stabilizer(const ControlSystem& sys, ControllerPtr u_ss, const Field& h,
                                         const ClfSpec& clf, const CertificationConfig& config,
                                         const CompatOptions& opt) {
    if (!u_ss || !clf.V) throw ConfigError("pair construction needs a controller and V");
    const Grid& grid = config.grid;
    const std::size_t n = grid.dim();
    const double ball = opt.origin_radius > 0 ? opt.origin_radius : origin_ball(grid, 2.0);
    std::vector<double> hv = evaluate_on_grid(h, grid);

    StabilizerPair out;
    PairReport& rep = out.report;
    rep.grid = grid;
    for (std::size_t i = 0; i < grid.size(); ++i)
        if (hv[i] >= 0) rep.indices.push_back(i);
    if (rep.indices.empty()) throw EmptyRegion();

    const std::size_t K = rep.indices.size();
    std::vector<std::vector<double>> us(K, std::vector<double>(sys.m()));
    std::vector<double> rate_v(K), rate_h(K);
    parallel_for(K, [&](std::size_t k) {
        std::vector<double> x = grid.point(rep.indices[k]);
        u_ss->compute(x, us[k]);
        rate_v[k] = directional_rate(sys, *clf.V, x, us[k]);
        rate_h[k] = directional_rate(sys, h, x, us[k]);
    });

    if (clf.W) {
        out.W = clf.W;
    } else {
        double c = kInf;
        for (std::size_t k = 0; k < K; ++k) {
            std::vector<double> x = grid.point(rep.indices[k]);
            double r2 = dot(x, x);
            if (std::sqrt(r2) <= ball) continue;
            c = std::min(c, -rate_v[k] / r2);
        }
        out.w_coefficient = std::isfinite(c) ? 0.5 * c : 0.0;
        if (!(out.w_coefficient > 0))
            rep.notes.push_back("u_ss does not decrease V everywhere; W = " + fmt(out.w_coefficient) + " |x|^2");
        char buf[40];
        std::snprintf(buf, sizeof buf, "%.17g", out.w_coefficient);
        std::string text = std::string(buf) + "*(";
        for (std::size_t d = 0; d < n; ++d) text += (d ? " + " : "") + sys.state_vars()[d] + "^2";
        text += ")";
        out.W = make_field(text, sys.state_vars());
    }

    CertificationConfig cc = config;
    cc.policy = InputPolicy::feedback(u_ss);
    out.certification = certify_cbf(sys, h, cc);
    const auto& alpha = out.certification.alpha;
    if (!alpha) rep.notes.push_back("no comparison function fitted: " + verdict_name(out.certification.verdict));

    const double s = opt.strict_tol;
    rep.points.resize(K);
    for (std::size_t k = 0; k < K; ++k) {
        std::vector<double> x = grid.point(rep.indices[k]);
        PointCompat& pc = rep.points[k];
        pc.u = us[k];
        pc.origin = norm(x) <= ball;
        if (sys.is_affine()) pc.data = pair_half_spaces(sys, {clf.V, out.W}, h, alpha ? BarrierAlpha(*alpha) : BarrierAlpha(), x);
        pc.clf_slack = -out.W->value(x) - rate_v[k];
        double ah = alpha ? (*alpha)(hv[rep.indices[k]]) : 0.0;
        pc.cbf_slack = rate_h[k] + ah;
        bool clf_ok = pc.origin || pc.clf_slack >= 0;
        bool cbf_ok = pc.cbf_slack >= -config.tol.margin_tol && (alpha || hv[rep.indices[k]] > config.tol.margin_tol ||
                                                                  rate_h[k] >= -config.tol.tol0);
        if (!clf_ok) out.clf_failures.push_back(x);
        if (!cbf_ok) out.cbf_failures.push_back(x);
        if (pc.origin)
            pc.status = PairStatus::Compatible;
        else if (!clf_ok || !cbf_ok)
            pc.status = PairStatus::Incompatible;
        else if (pc.clf_slack >= s && pc.cbf_slack >= s)
            pc.status = PairStatus::StrictlyCompatible;
        else
            pc.status = PairStatus::Compatible;
    }
    aggregate(rep);
    return out;
}

EcbfPairAlpha ecbf_pair_alpha(const ControlSystem& sys, const ClfSpec& clf, const Field& h, const Grid& grid,
                              std::span<const double> r_grid, std::span<const double> c_grid,
                              const EcbfPairOptions& opt) {
    if (!sys.is_affine()) throw NotAffine();
    if (!clf.V || !clf.W) throw ConfigError("CLF needs both V and W");
    const std::size_t N = grid.size();
    std::vector<double> hv(N), norms(N), value(N, std::numeric_limits<double>::quiet_NaN()), inner(N), lgh(N);
    std::vector<char> collinear_pos(N), hyp_ok(N, 1);
    std::vector<std::string> why(N);
    double max_grad = 0.0;
    std::vector<double> gradn(N);
    parallel_for(N, [&](std::size_t i) {
        std::vector<double> x = grid.point(i);
        LieDerivatives LV = lie_derivatives(sys, *clf.V, x);
        LieDerivatives Lh = lie_derivatives(sys, h, x);
        hv[i] = Lh.value;
        norms[i] = norm(x);
        gradn[i] = norm(Lh.grad);
        const double nv = norm(LV.Lg), nh = norm(Lh.Lg);
        const double ip = dot(LV.Lg, Lh.Lg);
        inner[i] = ip;
        lgh[i] = nh;
        bool both_zero = nv <= opt.lg_threshold && nh <= opt.lg_threshold;
        bool col = false;
        if (nv > opt.lg_threshold && nh > opt.lg_threshold) col = ip > 0 && ip / (nv * nh) >= std::cos(opt.angle_tol);
        collinear_pos[i] = both_zero || col;
        if (both_zero) {
            hyp_ok[i] = 0;
            why[i] = "Lg h vanishes on the boundary where Lg V and Lg h are collinear";
        } else if (col && !(LV.La < ip / (nh * nh) * Lh.La)) {
            hyp_ok[i] = 0;
            why[i] = "La V = " + fmt(LV.La) + " is not below (Lg V . Lg h / |Lg h|^2) La h = " +
                     fmt(ip / (nh * nh) * Lh.La);
        }
        if (nh > 0 && ip != 0) value[i] = (LV.La + clf.W->value(x)) * nh * nh / ip - Lh.La;
    });

    std::vector<std::size_t> bnd = boundary_points(hv, grid, opt.strict_tol);
    for (std::size_t i : bnd)
        if (collinear_pos[i] && !hyp_ok[i]) throw HypothesisFailed(grid.point(i), why[i] + " at " + fmt_point(grid.point(i)));

    EcbfPairAlpha out;
    out.c_min = kInf;
    for (std::size_t i : bnd) {
        out.c_min = std::min(out.c_min, norms[i]);
        max_grad = std::max(max_grad, gradn[i]);
    }
    if (!std::isfinite(out.c_min)) out.c_min = 0.0;
    const double band = opt.band > 0 ? opt.band : 2.0 * grid.min_spacing() * max_grad;

    std::vector<double> r(r_grid.begin(), r_grid.end()), c(c_grid.begin(), c_grid.end());
    if (r.empty() || r.front() != 0.0) r.insert(r.begin(), 0.0);
    if (c.empty() || c.front() != 0.0) c.insert(c.begin(), 0.0);
    detail::KkTable table(r, c, opt.strict_tol);
    std::vector<std::size_t> kept;
    for (std::size_t i = 0; i < N; ++i) {
        if (!(hv[i] >= 0)) continue;
        ++out.total;
        if (hv[i] <= band || std::abs(inner[i]) <= opt.iota || std::isnan(value[i])) {
            ++out.masked;
            continue;
        }
        kept.push_back(i);
        table.add(hv[i], norms[i] - out.c_min, value[i]);
    }
    out.masked_fraction = out.total ? static_cast<double>(out.masked) / static_cast<double>(out.total) : 0.0;
    out.alpha = fit_kk_majorant(r, c, table.values(), MajorantOptions{1e-6, 1e-3});

    PairReport& rep = out.check;
    rep.grid = grid;
    rep.indices = kept;
    rep.points.resize(kept.size());
    CompatOptions co;
    co.strict_tol = opt.strict_tol;
    co.lg_threshold = opt.lg_threshold;
    co.angle_tol = opt.angle_tol;
    co.origin_radius = opt.origin_radius;
    BarrierAlpha ba(out.alpha);
    parallel_for(kept.size(), [&](std::size_t k) {
        std::vector<double> x = grid.point(kept[k]);
        rep.points[k] = point_compat(sys, clf, h, ba, x, co);
    });
    aggregate(rep);
    if (kept.empty()) rep.notes.push_back("every point of the safe set was masked");
    return out;
}

} // namespace barrier
