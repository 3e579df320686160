#pragma once

#include "barrier/expr.hpp"
#include "barrier/field.hpp"
#include "barrier/grid.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace barrier {

/// x' = f(x, u), optionally with a declared split f = a(x) + g(x) u.
class ControlSystem {
public:
    ControlSystem(std::vector<std::string> state_vars, std::vector<std::string> input_vars,
                  const std::vector<std::string>& dynamics);

    /// Declares the affine split and validates it on 1000 seeded samples of
    /// sample_box() x input_box(). Throws ConfigError if it does not match f.
    void set_affine(const std::vector<std::string>& a, const std::vector<std::vector<std::string>>& g);

    void set_input_box(Box box);
    void set_sample_box(Box box);

    std::size_t n() const { return state_vars_.size(); }
    std::size_t m() const { return input_vars_.size(); }
    const std::vector<std::string>& state_vars() const { return state_vars_; }
    const std::vector<std::string>& input_vars() const { return input_vars_; }
    /// state_vars followed by input_vars; the variable list of every f_i.
    const std::vector<std::string>& all_vars() const { return all_vars_; }
    const std::vector<expr::Expression>& dynamics() const { return f_; }

    bool is_affine() const { return !a_.empty(); }
    const std::vector<expr::Expression>& drift() const { return a_; }
    /// g entries, row-major n x m.
    const std::vector<expr::Expression>& input_matrix() const { return g_; }

    /// [-10, 10]^m unless set.
    const Box& input_box() const { return input_box_; }
    /// [-10, 10]^n unless set; used to validate the affine split.
    const Box& sample_box() const { return sample_box_; }

    void f(std::span<const double> x, std::span<const double> u, std::span<double> out) const;
    void a(std::span<const double> x, std::span<double> out) const;
    /// Row-major n x m.
    void g(std::span<const double> x, std::span<double> out) const;

private:
    void check_affine() const;

    std::vector<std::string> state_vars_, input_vars_, all_vars_;
    std::vector<expr::Expression> f_, a_, g_;
    Box input_box_, sample_box_;
};

struct LieDerivatives {
    double value = 0.0;          ///< field value at x
    std::vector<double> grad;    ///< field gradient at x
    double La = 0.0;             ///< grad . a(x)
    std::vector<double> Lg;      ///< g(x)^T grad
};

/// Throws NotAffine without a declared split.
LieDerivatives lie_derivatives(const ControlSystem& sys, const Field& field, std::span<const double> x);

/// grad field(x) . f(x, u); works for any f.
double directional_rate(const ControlSystem& sys, const Field& field, std::span<const double> x,
                        std::span<const double> u);

/// Same, with a precomputed gradient.
double directional_rate_from_gradient(const ControlSystem& sys, std::span<const double> grad,
                                      std::span<const double> x, std::span<const double> u);

/// f(x, k(x)) as n expressions over the state, for expression feedback k.
std::vector<expr::Expression> closed_loop(const ControlSystem& sys, const std::vector<expr::Expression>& feedback);

} // namespace barrier
