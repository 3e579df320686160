#include "barrier/classk.hpp"

#include "barrier/errors.hpp"
#include "barrier/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>

namespace barrier {

namespace {

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

// Index i with r[i] <= x < r[i+1], clamped to the table.
std::size_t segment(const std::vector<double>& r, double x) {
    auto it = std::upper_bound(r.begin(), r.end(), x);
    std::size_t i = static_cast<std::size_t>(it - r.begin());
    return i == 0 ? 0 : std::min(i - 1, r.size() - 2);
}

} // namespace

KappaFunction KappaFunction::linear(double c) {
    if (!(c > 0)) throw ConfigError("linear class-K coefficient must be positive");
    KappaFunction k;
    k.kind_ = Kind::Linear;
    k.c_ = c;
    return k;
}

KappaFunction KappaFunction::power(double c, double p) {
    if (!(c > 0) || !(p > 0)) throw ConfigError("power class-K needs positive coefficient and exponent");
    KappaFunction k;
    k.kind_ = Kind::Power;
    k.c_ = c;
    k.p_ = p;
    return k;
}

KappaFunction KappaFunction::piecewise(std::vector<double> r, std::vector<double> v, double tail_slope) {
    if (r.size() != v.size() || r.empty()) throw ConfigError("knot lists must be nonempty and equally long");
    if (r[0] != 0.0 || v[0] != 0.0) throw ConfigError("first knot must be (0, 0)");
    for (std::size_t i = 1; i < r.size(); ++i)
        if (!(r[i] > r[i - 1]) || !(v[i] > v[i - 1])) throw ConfigError("knots must be strictly increasing");
    if (!(tail_slope > 0)) throw ConfigError("tail slope must be positive");
    KappaFunction k;
    k.kind_ = Kind::PiecewiseLinear;
    k.r_ = std::move(r);
    k.v_ = std::move(v);
    k.tail_ = tail_slope;
    return k;
}

double KappaFunction::positive(double r) const {
    switch (kind_) {
    case Kind::Linear: return c_ * r;
    case Kind::Power: return c_ * std::pow(r, p_);
    case Kind::PiecewiseLinear: {
        if (r >= r_.back()) return v_.back() + tail_ * (r - r_.back());
        std::size_t i = segment(r_, r);
        double t = (r - r_[i]) / (r_[i + 1] - r_[i]);
        return v_[i] + t * (v_[i + 1] - v_[i]);
    }
    }
    return 0.0;
}

double KappaFunction::operator()(double r) const { return r < 0 ? -positive(-r) : positive(r); }

KappaFunction KappaFunction::scaled(double k) const {
    if (!(k > 0)) throw ConfigError("scale must be positive");
    KappaFunction out = *this;
    out.c_ *= kind_ == Kind::PiecewiseLinear ? 1.0 : k;
    for (auto& v : out.v_) v *= k;
    out.tail_ *= k;
    return out;
}

std::string KappaFunction::describe() const {
    switch (kind_) {
    case Kind::Linear: return fmt(c_) + "*r";
    case Kind::Power: return fmt(c_) + "*r^" + fmt(p_);
    case Kind::PiecewiseLinear:
        return "piecewise-linear(" + std::to_string(r_.size()) + " knots, tail slope " + fmt(tail_) + ")";
    }
    return "?";
}

KappaKappaFunction KappaKappaFunction::separable(KappaFunction alpha) {
    KappaKappaFunction k;
    k.kind_ = Kind::Separable;
    k.alpha_ = std::move(alpha);
    return k;
}

KappaKappaFunction KappaKappaFunction::product(double c, double eps) {
    if (!(c > 0) || !(eps > 0)) throw ConfigError("product form needs positive c and eps");
    KappaKappaFunction k;
    k.kind_ = Kind::Product;
    k.c_ = c;
    k.eps_ = eps;
    return k;
}

KappaKappaFunction KappaKappaFunction::tabulated(std::vector<double> r, std::vector<double> s,
                                                 std::vector<std::vector<double>> values, double tail_r, double eps) {
    if (r.size() < 2 || s.size() < 1) throw ConfigError("table needs at least two r knots and one s knot");
    if (r[0] != 0.0 || s[0] != 0.0) throw ConfigError("table must start at r = 0 and s = 0");
    if (values.size() != r.size()) throw ConfigError("table rows must match r knots");
    for (const auto& row : values)
        if (row.size() != s.size()) throw ConfigError("table columns must match s knots");
    if (!(tail_r > 0) || !(eps > 0)) throw ConfigError("tail slopes must be positive");
    KappaKappaFunction k;
    k.kind_ = Kind::Tabulated;
    k.r_ = std::move(r);
    k.s_ = std::move(s);
    k.t_ = std::move(values);
    k.tail_r_ = tail_r;
    k.eps_ = eps;
    return k;
}

double KappaKappaFunction::positive(double r, double s) const {
    switch (kind_) {
    case Kind::Separable: return alpha_(r) * (s + 1.0);
    case Kind::Product: return c_ * r * s + eps_ * r;
    case Kind::Tabulated: {
        // Clamp into the table, then add the linear continuations.
        double rc = std::min(r, r_.back()), sc = std::min(s, s_.back());
        double base;
        if (s_.size() == 1) {
            std::size_t i = segment(r_, rc);
            double t = (rc - r_[i]) / (r_[i + 1] - r_[i]);
            base = t * t_[i + 1][0] + (1 - t) * t_[i][0];
        } else {
            std::size_t i = segment(r_, rc), j = segment(s_, sc);
            double t = (rc - r_[i]) / (r_[i + 1] - r_[i]);
            double u = (sc - s_[j]) / (s_[j + 1] - s_[j]);
            base = (1 - t) * (1 - u) * t_[i][j] + t * (1 - u) * t_[i + 1][j] + (1 - t) * u * t_[i][j + 1] +
                   t * u * t_[i + 1][j + 1];
        }
        return base + tail_r_ * std::max(0.0, r - r_.back()) + eps_ * r * std::max(0.0, s - s_.back());
    }
    }
    return 0.0;
}

double KappaKappaFunction::operator()(double r, double s) const {
    s = std::max(s, 0.0);
    return r < 0 ? -positive(-r, s) : positive(r, s);
}

std::string KappaKappaFunction::describe() const {
    switch (kind_) {
    case Kind::Separable: return "(" + alpha_.describe() + ")*(s+1)";
    case Kind::Product: return fmt(c_) + "*r*s + " + fmt(eps_) + "*r";
    case Kind::Tabulated:
        return "tabulated(" + std::to_string(r_.size()) + "x" + std::to_string(s_.size()) + ", tail slope " +
               fmt(tail_r_) + ")";
    }
    return "?";
}

KappaFunction fit_majorant(std::vector<std::pair<double, double>> samples, const MajorantOptions& opt) {
    std::map<double, double> merged;
    for (const auto& [r, v] : samples) {
        if (!(r >= 0)) throw ConfigError("majorant samples need r >= 0");
        if (std::isnan(v)) continue;
        auto it = merged.find(r);
        if (it == merged.end()) merged.emplace(r, v);
        else it->second = std::max(it->second, v);
    }
    auto zero = merged.find(0.0);
    if (zero != merged.end() && zero->second > opt.tol0) throw InfeasibleMajorant(0.0, 0.0, zero->second);

    std::vector<double> kr{0.0}, kv{0.0};
    double running = 0.0;
    for (const auto& [r, v] : merged) {
        if (r == 0.0) continue;
        running = std::max(running, v);
        double value = running + opt.eps * r;
        // Near-equal r can round to the same value; the neighbours then
        // already dominate this sample.
        if (!(value > kv.back())) continue;
        kr.push_back(r);
        kv.push_back(value);
    }
    // Merge runs of knots that lie on a chord up to rounding. Every knot sits
    // eps * r above its samples, so a chord within half of that (and within
    // 1e-12 relative) still dominates them.
    auto slack = [&](std::size_t i) { return std::min(1e-12 * std::max(1.0, std::abs(kv[i])), 0.5 * opt.eps * kr[i]); };
    auto on_chord = [&](std::size_t a, std::size_t b) {
        for (std::size_t k = a + 1; k < b; ++k) {
            double t = (kr[k] - kr[a]) / (kr[b] - kr[a]);
            double chord = kv[a] + t * (kv[b] - kv[a]);
            if (kv[k] > chord + slack(k)) return false;
        }
        return true;
    };
    constexpr std::size_t kMaxRun = 4096;
    std::vector<double> pr{kr[0]}, pv{kv[0]};
    std::size_t anchor = 0;
    for (std::size_t i = 1; i < kr.size(); ++i) {
        bool last = i + 1 == kr.size();
        if (!last && i + 1 - anchor <= kMaxRun && on_chord(anchor, i + 1)) continue;
        pr.push_back(kr[i]);
        pv.push_back(kv[i]);
        anchor = i;
    }
    if (pr.size() == 1) return KappaFunction::piecewise({0.0}, {0.0}, opt.eps);
    std::size_t last = pr.size() - 1;
    double tail = std::max(opt.eps, (pv[last] - pv[last - 1]) / (pr[last] - pr[last - 1]));
    return KappaFunction::piecewise(std::move(pr), std::move(pv), tail);
}

KappaKappaFunction fit_kk_majorant(std::span<const double> r, std::span<const double> c,
                                   const std::vector<std::vector<double>>& v, const MajorantOptions& opt) {
    const std::size_t nr = r.size(), nc = c.size();
    if (nr < 2 || nc < 1) throw ConfigError("two-argument fit needs at least two r levels and one c level");
    if (r[0] != 0.0) throw ConfigError("r levels must start at 0");
    if (c[0] < 0.0) throw ConfigError("c levels must be nonnegative");
    for (std::size_t i = 1; i < nr; ++i)
        if (!(r[i] > r[i - 1])) throw ConfigError("r levels must increase");
    for (std::size_t j = 1; j < nc; ++j)
        if (!(c[j] > c[j - 1])) throw ConfigError("c levels must increase");
    if (v.size() != nr) throw ConfigError("sample table rows must match r levels");
    for (std::size_t j = 0; j < nc; ++j)
        if (!std::isnan(v[0][j]) && v[0][j] > opt.tol0) throw InfeasibleMajorant(0.0, c[j], v[0][j]);

    // The table's s axis starts at 0; shift c so that s = c - c[0].
    std::vector<double> s(c.begin(), c.end());
    const double c0 = s[0];
    for (auto& x : s) x -= c0;

    std::vector<std::vector<double>> run(nr, std::vector<double>(nc, -std::numeric_limits<double>::infinity()));
    for (std::size_t i = 0; i < nr; ++i)
        for (std::size_t j = 0; j < nc; ++j) {
            double m = std::isnan(v[i][j]) ? -std::numeric_limits<double>::infinity() : v[i][j];
            if (i > 0) m = std::max(m, run[i - 1][j]);
            if (j > 0) m = std::max(m, run[i][j - 1]);
            run[i][j] = m;
        }
    std::vector<std::vector<double>> t(nr, std::vector<double>(nc, 0.0));
    for (std::size_t i = 1; i < nr; ++i)
        for (std::size_t j = 0; j < nc; ++j) t[i][j] = std::max(0.0, run[i][j]) + opt.eps * r[i] * (1.0 + s[j]);
    double tail = opt.eps;
    for (std::size_t j = 0; j < nc; ++j)
        tail = std::max(tail, (t[nr - 1][j] - t[nr - 2][j]) / (r[nr - 1] - r[nr - 2]));
    if (nc == 1) {
        // A single s knot; duplicate it so the table has a second column.
        s.push_back(1.0);
        for (std::size_t i = 0; i < nr; ++i) t[i].push_back(t[i][0] + opt.eps * r[i]);
    }
    auto out = KappaKappaFunction::tabulated(std::vector<double>(r.begin(), r.end()), std::move(s), std::move(t),
                                             tail, opt.eps);
    return out;
}

KappaKappaFunction cbf_alpha_to_ecbf(const KappaFunction& alpha) { return KappaKappaFunction::separable(alpha); }

KappaFunction ecbf_alpha_to_cbf(const KappaKappaFunction& alpha, const Field& h, const Grid& grid,
                                std::span<const double> r_grid, const MajorantOptions& opt) {
    const std::size_t n = grid.dim();
    std::vector<double> hv(grid.size()), norm(grid.size());
    parallel_for(grid.size(), [&](std::size_t i) {
        double x[16];
        grid.point(i, std::span<double>(x, n));
        hv[i] = h.value(std::span<const double>(x, n));
        double s = 0.0;
        for (std::size_t d = 0; d < n; ++d) s += x[d] * x[d];
        norm[i] = std::sqrt(s);
    });
    for (std::size_t i = 0; i < grid.size(); ++i)
        if (hv[i] >= 0 && grid.on_face(i)) throw NotCompact();
    std::vector<std::pair<double, double>> samples{{0.0, 0.0}};
    for (double r : r_grid) {
        if (!(r > 0)) continue;
        double sup = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < grid.size(); ++i)
            if (hv[i] >= 0 && hv[i] <= r) sup = std::max(sup, alpha(r, norm[i]));
        if (std::isfinite(sup)) samples.emplace_back(r, sup);
    }
    return fit_majorant(std::move(samples), opt);
}

std::string check_kappa(const KappaFunction& alpha, double r_max, int points) {
    if (alpha(0.0) != 0.0) return "alpha(0) != 0";
    double prev = alpha(0.0);
    for (int k = 1; k <= points; ++k) {
        double r = r_max * k / points;
        double v = alpha(r);
        if (!(v > prev)) return "not strictly increasing at r=" + fmt(r);
        if (alpha(-r) != -v) return "odd extension fails at r=" + fmt(r);
        prev = v;
    }
    return {};
}

} // namespace barrier
