#include "barrier/reach.hpp"

#include "barrier/errors.hpp"
#include "barrier/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace barrier {

namespace {

struct ClosedLoop {
    const ControlSystem& sys;
    const Controller& k;
    std::vector<double> u;

    void operator()(std::span<const double> x, std::span<double> dx) {
        k.compute(x, u);
        sys.f(x, u, dx);
    }
};

// One RK4 step in place; false when the state stops being finite.
bool rk4_step(ClosedLoop& rhs, std::vector<double>& x, double dt, std::vector<double>* scratch) {
    const std::size_t n = x.size();
    auto& k1 = scratch[0];
    auto& k2 = scratch[1];
    auto& k3 = scratch[2];
    auto& k4 = scratch[3];
    auto& y = scratch[4];
    rhs(x, k1);
    for (std::size_t i = 0; i < n; ++i) y[i] = x[i] + 0.5 * dt * k1[i];
    rhs(y, k2);
    for (std::size_t i = 0; i < n; ++i) y[i] = x[i] + 0.5 * dt * k2[i];
    rhs(y, k3);
    for (std::size_t i = 0; i < n; ++i) y[i] = x[i] + dt * k3[i];
    rhs(y, k4);
    bool finite = true;
    for (std::size_t i = 0; i < n; ++i) {
        x[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        if (!std::isfinite(x[i])) finite = false;
    }
    return finite;
}

double norm(const std::vector<double>& x) {
    double s = 0.0;
    for (double v : x) s += v * v;
    return std::sqrt(s);
}

// Running minimum at each checkpoint (in steps); returns whether the state escaped.
bool trajectory_min(const ControlSystem& sys, const Controller& k, const Field& h, std::span<const double> x0,
                    double dt, const std::vector<long>& checkpoints, double blowup_bound, std::vector<double>& out) {
    const std::size_t n = sys.n();
    ClosedLoop rhs{sys, k, std::vector<double>(sys.m())};
    std::vector<double> x(x0.begin(), x0.end());
    std::vector<double> scratch[5];
    for (auto& s : scratch) s.assign(n, 0.0);
    double m = h.value(x);
    out.assign(checkpoints.size(), m);
    bool escaped = false;
    long step = 0;
    for (std::size_t c = 0; c < checkpoints.size(); ++c) {
        while (!escaped && step < checkpoints[c]) {
            bool ok;
            try {
                ok = rk4_step(rhs, x, dt, scratch) && norm(x) <= blowup_bound;
            } catch (const Error&) {
                ok = false;
            }
            if (!ok) {
                escaped = true;
                break;
            }
            ++step;
            m = std::min(m, h.value(x));
        }
        out[c] = m;
    }
    return escaped;
}

long steps_for(double T, double dt) {
    return std::max(1L, std::lround(T / dt));
}

struct Stencil {
    std::vector<std::vector<int>> offsets;
    std::vector<double> weights;
};

Stencil make_stencil(const Grid& grid, double sigma) {
    const std::size_t n = grid.dim();
    std::vector<int> radius(n);
    for (std::size_t d = 0; d < n; ++d) radius[d] = std::max(1, static_cast<int>(std::ceil(3.0 * sigma / grid.spacing(d))));
    Stencil st;
    std::vector<int> off(n);
    for (std::size_t d = 0; d < n; ++d) off[d] = -radius[d];
    while (true) {
        double r2 = 0.0;
        for (std::size_t d = 0; d < n; ++d) {
            double z = off[d] * grid.spacing(d);
            r2 += z * z;
        }
        if (r2 <= 9.0 * sigma * sigma + 1e-12) {
            st.offsets.push_back(off);
            st.weights.push_back(std::exp(-0.5 * r2 / (sigma * sigma)));
        }
        std::size_t d = n;
        while (d > 0) {
            --d;
            if (++off[d] <= radius[d]) break;
            off[d] = -radius[d];
            if (d == 0) return st;
        }
        if (n == 0) return st;
    }
}

double convolve_at(const Grid& grid, const Stencil& st, const std::vector<double>& values,
                   const std::vector<bool>& mask, std::size_t i, std::vector<int>& idx, std::vector<int>& nb) {
    grid.unravel(i, idx);
    double num = 0.0, den = 0.0;
    for (std::size_t s = 0; s < st.offsets.size(); ++s) {
        bool inside = true;
        for (std::size_t d = 0; d < idx.size(); ++d) {
            nb[d] = idx[d] + st.offsets[s][d];
            if (nb[d] < 0 || nb[d] >= grid.counts()[d]) {
                inside = false;
                break;
            }
        }
        if (!inside) continue;
        std::size_t j = grid.ravel(nb);
        if (!mask[j]) continue;
        num += st.weights[s] * values[j];
        den += st.weights[s];
    }
    return den > 0 ? num / den : values[i];
}

bool bound_holds(double v, double psi) {
    return std::abs(v - psi) < std::min(0.5 * v, 1.0);
}

} // namespace

RunningMin running_min(const ControlSystem& sys, const Controller& k, const Field& h, std::span<const double> x0,
                       double T, double dt, double blowup_bound) {
    if (!(T > 0) || !(dt > 0)) throw ConfigError("running_min needs T > 0 and dt > 0");
    if (x0.size() != sys.n()) throw ConfigError("initial state has the wrong dimension");
    std::vector<double> out;
    bool escaped = trajectory_min(sys, k, h, x0, dt, {steps_for(T, dt)}, blowup_bound, out);
    return {out[0], escaped};
}

ValueField value_field(const ControlSystem& sys, const Controller& k, const Field& h, const Grid& grid,
                       const std::vector<double>& horizons, double dt, double conv_tol) {
    if (horizons.size() < 2) throw ConfigError("value_field needs at least two horizons");
    if (!(dt > 0)) throw ConfigError("value_field needs dt > 0");
    for (std::size_t j = 0; j < horizons.size(); ++j)
        if (!(horizons[j] > 0) || (j > 0 && !(horizons[j] > horizons[j - 1])))
            throw ConfigError("horizons must be positive and increasing");
    if (grid.dim() != sys.n()) throw ConfigError("grid dimension does not match the state");
    std::vector<long> checkpoints;
    for (double T : horizons) checkpoints.push_back(steps_for(T, dt));

    ValueField vf;
    vf.grid = grid;
    vf.horizons = horizons;
    vf.values.assign(horizons.size(), std::vector<double>(grid.size()));
    std::vector<char> converged(grid.size()), escaped(grid.size());
    parallel_for(grid.size(), [&](std::size_t i) {
        std::vector<double> x = grid.point(i), out;
        escaped[i] = trajectory_min(sys, k, h, x, dt, checkpoints, 1e6, out);
        for (std::size_t j = 0; j < out.size(); ++j) vf.values[j][i] = out[j];
        converged[i] = std::abs(out[out.size() - 1] - out[out.size() - 2]) <= conv_tol;
    });
    vf.converged.assign(converged.begin(), converged.end());
    vf.blew_up.assign(escaped.begin(), escaped.end());
    return vf;
}

std::vector<double> convolve(const Grid& grid, const std::vector<double>& values, const std::vector<bool>& mask,
                             double sigma) {
    if (!(sigma > 0)) throw ConfigError("bandwidth must be positive");
    if (values.size() != grid.size() || mask.size() != grid.size())
        throw ConfigError("values and mask must cover the grid");
    Stencil st = make_stencil(grid, sigma);
    std::vector<double> out(values);
    parallel_for(grid.size(), [&](std::size_t i) {
        if (!mask[i]) return;
        std::vector<int> idx(grid.dim()), nb(grid.dim());
        out[i] = convolve_at(grid, st, values, mask, i, idx, nb);
    });
    return out;
}

SmoothedField mollify(const Grid& grid, const std::vector<double>& V, double sigma) {
    if (!(sigma > 0)) throw ConfigError("bandwidth must be positive");
    if (V.size() != grid.size()) throw ConfigError("values must cover the grid");
    for (int c : grid.counts())
        if (c < 3) throw ConfigError("smoothing needs at least 3 lattice points per dimension");
    std::vector<bool> mask(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) mask[i] = V[i] > 0;

    SmoothedField sf;
    sf.grid = grid;
    sf.base_sigma = sigma;
    sf.values = V;
    sf.sigma.assign(grid.size(), 0.0);
    std::vector<char> ok(grid.size(), 1);

    std::vector<Stencil> stencils;
    for (int level = 0; level <= 4; ++level) stencils.push_back(make_stencil(grid, sigma / std::pow(2.0, level)));
    parallel_for(grid.size(), [&](std::size_t i) {
        if (!mask[i]) return;
        std::vector<int> idx(grid.dim()), nb(grid.dim());
        for (int level = 0; level <= 4; ++level) {
            double psi = convolve_at(grid, stencils[static_cast<std::size_t>(level)], V, mask, i, idx, nb);
            sf.values[i] = psi;
            sf.sigma[i] = sigma / std::pow(2.0, level);
            if (bound_holds(V[i], psi)) return;
        }
        ok[i] = 0;
    });
    sf.bound_ok.assign(ok.begin(), ok.end());
    std::vector<std::size_t> failed;
    for (std::size_t i = 0; i < grid.size(); ++i)
        if (!ok[i]) failed.push_back(i);
    if (!failed.empty()) throw BandwidthExhausted(std::move(failed));
    return sf;
}

SmoothedField mollify(const ValueField& field, double sigma) {
    return mollify(field.grid, field.final(), sigma);
}

DecreaseReport verify_smoothed_decrease(const ControlSystem& sys, const Controller& k, const SmoothedField& psi,
                                        const std::vector<double>& V, const KappaFunction& alpha, double margin_tol) {
    const Grid& grid = psi.grid;
    const std::size_t n = grid.dim();
    if (n != sys.n()) throw ConfigError("grid dimension does not match the state");
    if (V.size() != grid.size()) throw ConfigError("values must cover the grid");
    std::vector<double> slack(grid.size(), std::numeric_limits<double>::quiet_NaN());
    parallel_for(grid.size(), [&](std::size_t i) {
        if (!(V[i] > 0) || grid.on_face(i)) return;
        std::vector<int> idx(n), nb(n);
        grid.unravel(i, idx);
        std::vector<double> grad(n), x = grid.point(i), u(sys.m()), f(n);
        for (std::size_t d = 0; d < n; ++d) {
            nb = idx;
            nb[d] = idx[d] + 1;
            double up = psi.values[grid.ravel(nb)];
            nb[d] = idx[d] - 1;
            double down = psi.values[grid.ravel(nb)];
            grad[d] = (up - down) / (2.0 * grid.spacing(d));
        }
        k.compute(x, u);
        sys.f(x, u, f);
        double rate = 0.0;
        for (std::size_t d = 0; d < n; ++d) rate += grad[d] * f[d];
        slack[i] = rate + 2.0 * alpha(V[i]);
    });
    DecreaseReport rep;
    rep.worst_slack = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (std::isnan(slack[i])) continue;
        ++rep.checked;
        if (slack[i] >= -margin_tol)
            ++rep.passed;
        else
            rep.failures.push_back(i);
        rep.worst_slack = std::min(rep.worst_slack, slack[i]);
    }
    rep.pass_fraction = rep.checked ? static_cast<double>(rep.passed) / static_cast<double>(rep.checked) : 0.0;
    if (!rep.checked) rep.worst_slack = 0.0;
    return rep;
}

} // namespace barrier
