#include "barrier/system.hpp"

#include "barrier/errors.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace barrier {

namespace {

Box default_box(std::size_t n) {
    return Box(std::vector<double>(n, -10.0), std::vector<double>(n, 10.0));
}

} // namespace

ControlSystem::ControlSystem(std::vector<std::string> state_vars, std::vector<std::string> input_vars,
                             const std::vector<std::string>& dynamics)
    : state_vars_(std::move(state_vars)), input_vars_(std::move(input_vars)) {
    if (state_vars_.empty()) throw ConfigError("system needs at least one state variable");
    if (state_vars_.size() > 16 || input_vars_.size() > 16) throw ConfigError("at most 16 states and inputs");
    if (dynamics.size() != state_vars_.size()) throw ConfigError("need one dynamics expression per state");
    all_vars_ = state_vars_;
    all_vars_.insert(all_vars_.end(), input_vars_.begin(), input_vars_.end());
    for (std::size_t i = 0; i < all_vars_.size(); ++i)
        for (std::size_t j = i + 1; j < all_vars_.size(); ++j)
            if (all_vars_[i] == all_vars_[j]) throw ConfigError("duplicate variable '" + all_vars_[i] + "'");
    for (const auto& text : dynamics) f_.push_back(expr::Expression::parse(text, all_vars_));
    sample_box_ = default_box(n());
    if (m() > 0) input_box_ = default_box(m());
}

void ControlSystem::set_input_box(Box box) {
    if (box.dim() != m()) throw ConfigError("input box dimension does not match the inputs");
    input_box_ = std::move(box);
}

void ControlSystem::set_sample_box(Box box) {
    if (box.dim() != n()) throw ConfigError("sample box dimension does not match the state");
    sample_box_ = std::move(box);
    if (is_affine()) check_affine();
}

void ControlSystem::set_affine(const std::vector<std::string>& a, const std::vector<std::vector<std::string>>& g) {
    if (a.size() != n() || g.size() != n()) throw ConfigError("affine split needs n drift terms and n rows of g");
    std::vector<expr::Expression> aa, gg;
    for (const auto& t : a) aa.push_back(expr::Expression::parse(t, state_vars_));
    for (const auto& row : g) {
        if (row.size() != m()) throw ConfigError("each row of g needs one entry per input");
        for (const auto& t : row) gg.push_back(expr::Expression::parse(t, state_vars_));
    }
    a_ = std::move(aa);
    g_ = std::move(gg);
    try {
        check_affine();
    } catch (...) {
        a_.clear();
        g_.clear();
        throw;
    }
}

void ControlSystem::check_affine() const {
    std::mt19937_64 rng(20240611);
    const std::size_t nn = n(), mm = m();
    std::vector<double> x(nn), u(mm), fx(nn), ax(nn), gx(nn * mm);
    for (int s = 0; s < 1000; ++s) {
        for (std::size_t i = 0; i < nn; ++i)
            x[i] = std::uniform_real_distribution<double>(sample_box_.lo[i], sample_box_.hi[i])(rng);
        for (std::size_t j = 0; j < mm; ++j)
            u[j] = std::uniform_real_distribution<double>(input_box_.lo[j], input_box_.hi[j])(rng);
        try {
            f(x, u, fx);
            a(x, ax);
            g(x, gx);
        } catch (const DomainError&) {
            continue; // outside the natural domain of the model
        }
        double fmax = 0.0, err = 0.0;
        for (std::size_t i = 0; i < nn; ++i) {
            double r = ax[i];
            for (std::size_t j = 0; j < mm; ++j) r += gx[i * mm + j] * u[j];
            err = std::max(err, std::abs(fx[i] - r));
            fmax = std::max(fmax, std::abs(fx[i]));
        }
        if (!(err <= 1e-9 * (1.0 + fmax)))
            throw ConfigError("declared affine split does not reproduce the dynamics (mismatch " +
                              std::to_string(err) + ")");
    }
}

void ControlSystem::f(std::span<const double> x, std::span<const double> u, std::span<double> out) const {
    double xu[32];
    const std::size_t nn = n(), mm = m();
    std::copy(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(nn), xu);
    std::copy(u.begin(), u.begin() + static_cast<std::ptrdiff_t>(mm), xu + nn);
    for (std::size_t i = 0; i < nn; ++i) out[i] = f_[i].eval(std::span<const double>(xu, nn + mm));
}

void ControlSystem::a(std::span<const double> x, std::span<double> out) const {
    if (!is_affine()) throw NotAffine();
    for (std::size_t i = 0; i < n(); ++i) out[i] = a_[i].eval(x);
}

void ControlSystem::g(std::span<const double> x, std::span<double> out) const {
    if (!is_affine()) throw NotAffine();
    for (std::size_t k = 0; k < g_.size(); ++k) out[k] = g_[k].eval(x);
}

LieDerivatives lie_derivatives(const ControlSystem& sys, const Field& field, std::span<const double> x) {
    if (!sys.is_affine()) throw NotAffine();
    const std::size_t n = sys.n(), m = sys.m();
    LieDerivatives out;
    out.grad.resize(n);
    out.Lg.assign(m, 0.0);
    out.value = field.value_gradient(x, out.grad);
    double ax[16], gx[256];
    sys.a(x, std::span<double>(ax, n));
    sys.g(x, std::span<double>(gx, n * m));
    for (std::size_t i = 0; i < n; ++i) {
        out.La += out.grad[i] * ax[i];
        for (std::size_t j = 0; j < m; ++j) out.Lg[j] += gx[i * m + j] * out.grad[i];
    }
    return out;
}

double directional_rate_from_gradient(const ControlSystem& sys, std::span<const double> grad,
                                      std::span<const double> x, std::span<const double> u) {
    double fx[16];
    sys.f(x, u, std::span<double>(fx, sys.n()));
    double r = 0.0;
    for (std::size_t i = 0; i < sys.n(); ++i) r += grad[i] * fx[i];
    return r;
}

double directional_rate(const ControlSystem& sys, const Field& field, std::span<const double> x,
                        std::span<const double> u) {
    double grad[16];
    field.value_gradient(x, std::span<double>(grad, sys.n()));
    return directional_rate_from_gradient(sys, std::span<const double>(grad, sys.n()), x, u);
}

std::vector<expr::Expression> closed_loop(const ControlSystem& sys, const std::vector<expr::Expression>& feedback) {
    if (feedback.size() != sys.m()) throw ConfigError("feedback needs one expression per input");
    std::map<std::string, expr::Expression> repl;
    for (std::size_t j = 0; j < sys.m(); ++j) repl.emplace(sys.input_vars()[j], feedback[j].rebind(sys.state_vars()));
    std::vector<expr::Expression> out;
    for (const auto& fi : sys.dynamics()) out.push_back(fi.substitute(sys.state_vars(), repl));
    return out;
}

} // namespace barrier
