#include "barrier/field.hpp"

#include "barrier/errors.hpp"
#include "barrier/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace barrier {

ScalarField::ScalarField(expr::Expression e) : expr_(std::move(e)) {
    seeds_.resize(expr_.variables().size());
    for (std::size_t i = 0; i < seeds_.size(); ++i) seeds_[i] = static_cast<int>(i);
}

ScalarField::ScalarField(std::string_view text, const std::vector<std::string>& state_vars)
    : ScalarField(expr::Expression::parse(text, state_vars)) {}

double ScalarField::value_gradient(std::span<const double> x, std::span<double> grad) const {
    return expr_.value_gradient(x, seeds_, grad);
}

FieldPtr make_field(std::string_view text, const std::vector<std::string>& state_vars) {
    return std::make_shared<ScalarField>(text, state_vars);
}

std::vector<double> evaluate_on_grid(const Field& f, const Grid& grid) {
    std::vector<double> out(grid.size());
    parallel_for(grid.size(), [&](std::size_t i) {
        double x[16];
        grid.point(i, std::span<double>(x, grid.dim()));
        out[i] = f.value(std::span<const double>(x, grid.dim()));
    });
    return out;
}

namespace {

// Cell containing x (clamped) and the local coordinates in [0, 1].
void locate(const Grid& g, std::span<const double> x, int* cell, double* t) {
    for (std::size_t d = 0; d < g.dim(); ++d) {
        double s = (x[d] - g.box().lo[d]) / g.spacing(d);
        s = std::clamp(s, 0.0, static_cast<double>(g.counts()[d] - 1));
        int i = std::min(static_cast<int>(std::floor(s)), g.counts()[d] - 2);
        cell[d] = i;
        t[d] = s - i;
    }
}

} // namespace

SampledField::SampledField(Grid grid, std::vector<double> values, std::string label)
    : grid_(std::move(grid)), values_(std::move(values)), label_(std::move(label)) {
    if (values_.size() != grid_.size()) throw Error("sampled field size does not match grid");
    if (grid_.dim() > 8) throw Error("sampled fields support at most 8 dimensions");
    const std::size_t n = grid_.dim();
    node_grads_.resize(grid_.size() * n);
    parallel_for(grid_.size(), [&](std::size_t i) { node_gradient(i, std::span<double>(&node_grads_[i * n], n)); });
}

void SampledField::node_gradient(std::size_t index, std::span<double> grad) const {
    const std::size_t n = grid_.dim();
    int idx[8];
    grid_.unravel(index, std::span<int>(idx, n));
    for (std::size_t d = 0; d < n; ++d) {
        int i = idx[d];
        int lo = std::max(i - 1, 0), hi = std::min(i + 1, grid_.counts()[d] - 1);
        idx[d] = lo;
        double vlo = values_[grid_.ravel(std::span<const int>(idx, n))];
        idx[d] = hi;
        double vhi = values_[grid_.ravel(std::span<const int>(idx, n))];
        idx[d] = i;
        grad[d] = (vhi - vlo) / ((hi - lo) * grid_.spacing(d));
    }
}

double SampledField::value(std::span<const double> x) const {
    const std::size_t n = grid_.dim();
    int cell[8], idx[8];
    double t[8];
    locate(grid_, x, cell, t);
    double acc = 0.0;
    for (unsigned corner = 0; corner < (1u << n); ++corner) {
        double w = 1.0;
        for (std::size_t d = 0; d < n; ++d) {
            bool up = corner & (1u << d);
            idx[d] = cell[d] + (up ? 1 : 0);
            w *= up ? t[d] : 1.0 - t[d];
        }
        if (w != 0.0) acc += w * values_[grid_.ravel(std::span<const int>(idx, n))];
    }
    return acc;
}

double SampledField::value_gradient(std::span<const double> x, std::span<double> grad) const {
    const std::size_t n = grid_.dim();
    int cell[8], idx[8];
    double t[8];
    locate(grid_, x, cell, t);
    double acc = 0.0;
    std::fill(grad.begin(), grad.begin() + static_cast<std::ptrdiff_t>(n), 0.0);
    for (unsigned corner = 0; corner < (1u << n); ++corner) {
        double w = 1.0;
        for (std::size_t d = 0; d < n; ++d) {
            bool up = corner & (1u << d);
            idx[d] = cell[d] + (up ? 1 : 0);
            w *= up ? t[d] : 1.0 - t[d];
        }
        if (w == 0.0) continue;
        std::size_t k = grid_.ravel(std::span<const int>(idx, n));
        acc += w * values_[k];
        for (std::size_t d = 0; d < n; ++d) grad[d] += w * node_grads_[k * n + d];
    }
    return acc;
}

LinearField::LinearField(std::vector<std::pair<double, FieldPtr>> terms, double constant)
    : terms_(std::move(terms)), constant_(constant) {
    if (terms_.empty()) throw Error("linear field needs at least one term");
    for (const auto& t : terms_)
        if (t.second->dim() != terms_.front().second->dim()) throw Error("linear field terms differ in dimension");
}

std::size_t LinearField::dim() const { return terms_.front().second->dim(); }

double LinearField::value(std::span<const double> x) const {
    double v = constant_;
    for (const auto& [c, f] : terms_) v += c * f->value(x);
    return v;
}

double LinearField::value_gradient(std::span<const double> x, std::span<double> grad) const {
    const std::size_t n = dim();
    double tmp[16];
    double v = constant_;
    std::fill(grad.begin(), grad.begin() + static_cast<std::ptrdiff_t>(n), 0.0);
    for (const auto& [c, f] : terms_) {
        v += c * f->value_gradient(x, std::span<double>(tmp, n));
        for (std::size_t d = 0; d < n; ++d) grad[d] += c * tmp[d];
    }
    return v;
}

std::string LinearField::describe() const {
    std::string s;
    char buf[64];
    for (const auto& [c, f] : terms_) {
        std::snprintf(buf, sizeof buf, "%s%.17g*", s.empty() ? "" : " + ", c);
        s += buf;
        s += "[" + f->describe() + "]";
    }
    std::snprintf(buf, sizeof buf, " + %.17g", constant_);
    return s + buf;
}

} // namespace barrier
