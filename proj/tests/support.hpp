#pragma once

#include "barrier/field.hpp"
#include "barrier/system.hpp"

#include <memory>
#include <random>
#include <string>
#include <vector>

namespace barrier::support {

inline std::shared_ptr<ControlSystem> single_integrator() {
    auto sys = std::make_shared<ControlSystem>(std::vector<std::string>{"x", "y"}, std::vector<std::string>{"u1", "u2"},
                                               std::vector<std::string>{"u1", "u2"});
    sys->set_affine({"0", "0"}, {{"1", "0"}, {"0", "1"}});
    return sys;
}

/// x' = x y + 1, y' = -y + u.
inline std::shared_ptr<ControlSystem> wrong_candidate_system() {
    auto sys = std::make_shared<ControlSystem>(std::vector<std::string>{"x", "y"}, std::vector<std::string>{"u"},
                                               std::vector<std::string>{"x*y + 1", "-y + u"});
    sys->set_affine({"x*y + 1", "-y"}, {{"0"}, {"1"}});
    return sys;
}

inline std::shared_ptr<const ScalarField> field(const std::string& text, std::vector<std::string> vars = {"x", "y"}) {
    return std::make_shared<ScalarField>(text, vars);
}

inline std::mt19937_64 rng(unsigned long long seed = 20240607) { return std::mt19937_64(seed); }

inline double uniform(std::mt19937_64& g, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(g);
}

inline int uniform_int(std::mt19937_64& g, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(g); }

/// Random smooth expression over x, y, z. Every primitive stays inside its
/// domain for all real arguments.
inline std::string random_expression(std::mt19937_64& g, int depth) {
    static const char* vars[] = {"x", "y", "z"};
    if (depth == 0 || uniform_int(g, 0, 4) == 0) {
        if (uniform_int(g, 0, 2) == 0) return std::to_string(uniform_int(g, 1, 5)) + "." + std::to_string(uniform_int(g, 0, 9));
        return vars[uniform_int(g, 0, 2)];
    }
    std::string a = random_expression(g, depth - 1);
    std::string b = random_expression(g, depth - 1);
    switch (uniform_int(g, 0, 11)) {
    case 0: return "(" + a + " + " + b + ")";
    case 1: return "(" + a + " - " + b + ")";
    case 2: return "(" + a + ")*(" + b + ")";
    case 3: return "(" + a + ")/(2 + cos(" + b + "))";
    case 4: return "sin(" + a + ")";
    case 5: return "cos(" + a + ")";
    case 6: return "exp(sin(" + a + "))";
    case 7: return "tanh(" + a + ")";
    case 8: return "log(1 + (" + a + ")^2)";
    case 9: return "sqrt(1 + (" + a + ")^2)";
    case 10: return "(" + a + ")^" + std::to_string(uniform_int(g, 2, 3));
    default: return "-(" + a + ")";
    }
}

/// Central difference with one Richardson step (fourth order).
template <class F>
double richardson_derivative(F&& f, std::vector<double> x, std::size_t k, double step = 1e-3) {
    auto central = [&](double hstep) {
        std::vector<double> xp = x, xm = x;
        xp[k] += hstep;
        xm[k] -= hstep;
        return (f(xp) - f(xm)) / (2 * hstep);
    };
    return (4 * central(step / 2) - central(step)) / 3;
}

} // namespace barrier::support
