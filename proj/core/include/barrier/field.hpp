#pragma once

#include "barrier/expr.hpp"
#include "barrier/grid.hpp"

#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace barrier {

/// Differentiable scalar function of the state.
class Field {
public:
    virtual ~Field() = default;
    virtual std::size_t dim() const = 0;
    virtual double value(std::span<const double> x) const = 0;
    /// Writes the gradient into `grad` (size dim()) and returns the value.
    virtual double value_gradient(std::span<const double> x, std::span<double> grad) const = 0;
    virtual std::string describe() const = 0;
};

using FieldPtr = std::shared_ptr<const Field>;

/// Field backed by an expression over the state variables.
class ScalarField : public Field {
public:
    explicit ScalarField(expr::Expression e);
    ScalarField(std::string_view text, const std::vector<std::string>& state_vars);

    std::size_t dim() const override { return expr_.variables().size(); }
    double value(std::span<const double> x) const override { return expr_.eval(x); }
    double value_gradient(std::span<const double> x, std::span<double> grad) const override;
    std::string describe() const override { return expr_.to_string(); }

    const expr::Expression& expression() const { return expr_; }

private:
    expr::Expression expr_;
    std::vector<int> seeds_;
};

/// Lattice values with multilinear interpolation. Gradients interpolate
/// central-difference node gradients (one-sided on faces). Queries outside
/// the box are clamped onto it.
class SampledField : public Field {
public:
    SampledField(Grid grid, std::vector<double> values, std::string label = "sampled");

    std::size_t dim() const override { return grid_.dim(); }
    double value(std::span<const double> x) const override;
    double value_gradient(std::span<const double> x, std::span<double> grad) const override;
    std::string describe() const override { return label_; }

    const Grid& grid() const { return grid_; }
    const std::vector<double>& values() const { return values_; }
    /// Central-difference gradient at a lattice node.
    void node_gradient(std::size_t index, std::span<double> grad) const;

private:
    Grid grid_;
    std::vector<double> values_;
    std::vector<double> node_grads_; // size() * dim()
    std::string label_;
};

/// constant + sum of coefficient * field.
class LinearField : public Field {
public:
    LinearField(std::vector<std::pair<double, FieldPtr>> terms, double constant);

    std::size_t dim() const override;
    double value(std::span<const double> x) const override;
    double value_gradient(std::span<const double> x, std::span<double> grad) const override;
    std::string describe() const override;

    const std::vector<std::pair<double, FieldPtr>>& terms() const { return terms_; }
    double constant() const { return constant_; }

private:
    std::vector<std::pair<double, FieldPtr>> terms_;
    double constant_;
};

FieldPtr make_field(std::string_view text, const std::vector<std::string>& state_vars);

/// Values on every lattice point, in lattice order (parallel, order-preserving).
std::vector<double> evaluate_on_grid(const Field& f, const Grid& grid);

} // namespace barrier
