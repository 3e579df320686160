#pragma once

// Flat postfix form of an expression tree and the templated stack machine that
// runs it. Internal to the core library.

#include "barrier/errors.hpp"
#include "barrier/expr.hpp"

#include <array>
#include <cmath>
#include <string>
#include <vector>

namespace barrier::expr {

std::string print_node(const Node& node, const std::vector<std::string>& variables);

enum class Op : unsigned char {
    Const, Var, Neg, Add, Sub, Mul, Div, Pow, PowInt,
    Sin, Cos, Exp, Log, Sqrt, Abs, Tanh, Min, Max, Norm
};

struct Instr {
    Op op;
    int arg = 0;         // variable index, integer exponent, or argument count
    double number = 0.0; // literal
    const Node* node = nullptr;
};

struct Program {
    std::vector<Instr> code;
    int max_depth = 0;
    std::shared_ptr<const std::vector<std::string>> variables;
    NodePtr root; // keeps `node` pointers alive

    [[noreturn]] void domain_error(const char* what, const Node* node) const {
        throw DomainError(what, node ? print_node(*node, *variables) : std::string("?"));
    }
};

Program compile(const NodePtr& root, std::shared_ptr<const std::vector<std::string>> variables);

namespace detail {

template <class Real>
bool is_integer(const Real& v) {
    using std::floor;
    return floor(v) == v;
}

template <class Real>
Real ipow(Real base, int n) {
    bool invert = n < 0;
    unsigned k = static_cast<unsigned>(invert ? -n : n);
    Real result(1);
    while (k) {
        if (k & 1u) result *= base;
        base *= base;
        k >>= 1u;
    }
    return invert ? Real(1) / result : result;
}

template <class Real>
Real pow_checked(const Program& p, const Instr& in, const Real& a, const Real& b) {
    using std::pow;
    if (a < 0 && !is_integer(b)) p.domain_error("negative base with non-integer exponent", in.node);
    if (a == 0 && b < 0) p.domain_error("zero raised to a negative power", in.node);
    return pow(a, b);
}

template <class V, std::size_t N = 64>
struct Stack {
    std::array<V, N> fixed;
    std::vector<V> heap;
    V* data;
    explicit Stack(int depth) {
        if (depth > static_cast<int>(N)) {
            heap.resize(static_cast<std::size_t>(depth));
            data = heap.data();
        } else {
            data = fixed.data();
        }
    }
};

} // namespace detail

template <class Real>
Real run_scalar(const Program& p, const Real* values) {
    using std::abs;
    using std::cos;
    using std::exp;
    using std::log;
    using std::sin;
    using std::sqrt;
    using std::tanh;
    detail::Stack<Real> stack(p.max_depth);
    Real* s = stack.data;
    int top = -1;
    for (const Instr& in : p.code) {
        switch (in.op) {
        case Op::Const: s[++top] = Real(in.number); break;
        case Op::Var: s[++top] = values[in.arg]; break;
        case Op::Neg: s[top] = -s[top]; break;
        case Op::Add: s[top - 1] = s[top - 1] + s[top]; --top; break;
        case Op::Sub: s[top - 1] = s[top - 1] - s[top]; --top; break;
        case Op::Mul: s[top - 1] = s[top - 1] * s[top]; --top; break;
        case Op::Div:
            if (s[top] == 0) p.domain_error("division by zero", in.node);
            s[top - 1] = s[top - 1] / s[top];
            --top;
            break;
        case Op::Pow: s[top - 1] = detail::pow_checked(p, in, s[top - 1], s[top]); --top; break;
        case Op::PowInt:
            if (s[top] == 0 && in.arg < 0) p.domain_error("zero raised to a negative power", in.node);
            s[top] = detail::ipow(s[top], in.arg);
            break;
        case Op::Sin: s[top] = sin(s[top]); break;
        case Op::Cos: s[top] = cos(s[top]); break;
        case Op::Exp: s[top] = exp(s[top]); break;
        case Op::Log:
            if (!(s[top] > 0)) p.domain_error("log of a non-positive value", in.node);
            s[top] = log(s[top]);
            break;
        case Op::Sqrt:
            if (s[top] < 0) p.domain_error("sqrt of a negative value", in.node);
            s[top] = sqrt(s[top]);
            break;
        case Op::Abs: s[top] = abs(s[top]); break;
        case Op::Tanh: s[top] = tanh(s[top]); break;
        case Op::Min: {
            int base = top - in.arg + 1;
            Real m = s[base];
            for (int i = base + 1; i <= top; ++i)
                if (s[i] < m) m = s[i];
            top = base;
            s[top] = m;
            break;
        }
        case Op::Max: {
            int base = top - in.arg + 1;
            Real m = s[base];
            for (int i = base + 1; i <= top; ++i)
                if (s[i] > m) m = s[i];
            top = base;
            s[top] = m;
            break;
        }
        case Op::Norm: {
            int base = top - in.arg + 1;
            Real acc(0);
            for (int i = base; i <= top; ++i) acc += s[i] * s[i];
            top = base;
            s[top] = sqrt(acc);
            break;
        }
        }
    }
    return s[0];
}

// Forward-mode sweep. Non-smooth primitives use one-sided derivatives from the
// right along each seed direction: |a|' = |a'| at a = 0, and at ties min/max
// take the componentwise min/max of the tied partials.
template <class Real>
BasicDual<Real> run_dual(const Program& p, const BasicDual<Real>* values) {
    using D = BasicDual<Real>;
    using std::abs;
    using std::cos;
    using std::exp;
    using std::log;
    using std::sin;
    using std::sqrt;
    using std::tanh;
    detail::Stack<D> stack(p.max_depth);
    D* s = stack.data;
    int top = -1;
    const int n = p.code.empty() ? 0 : values ? values[0].seeds : 0;

    auto scale = [](D& d, const Real& k) {
        for (int i = 0; i < d.seeds; ++i) d.partials[i] *= k;
    };
    auto check_finite = [&](const D& d, const Instr& in) {
        using std::isfinite;
        for (int i = 0; i < d.seeds; ++i)
            if (!isfinite(static_cast<double>(d.partials[i])))
                p.domain_error("derivative undefined", in.node);
    };

    for (const Instr& in : p.code) {
        switch (in.op) {
        case Op::Const: {
            D& d = s[++top];
            d = D(Real(in.number), n);
            for (int i = 0; i < n; ++i) d.partials[i] = Real(0);
            break;
        }
        case Op::Var: s[++top] = values[in.arg]; break;
        case Op::Neg: {
            D& d = s[top];
            d.value = -d.value;
            for (int i = 0; i < d.seeds; ++i) d.partials[i] = -d.partials[i];
            break;
        }
        case Op::Add: {
            D& a = s[top - 1];
            const D& b = s[top];
            a.value += b.value;
            for (int i = 0; i < a.seeds; ++i) a.partials[i] += b.partials[i];
            --top;
            break;
        }
        case Op::Sub: {
            D& a = s[top - 1];
            const D& b = s[top];
            a.value -= b.value;
            for (int i = 0; i < a.seeds; ++i) a.partials[i] -= b.partials[i];
            --top;
            break;
        }
        case Op::Mul: {
            D& a = s[top - 1];
            const D& b = s[top];
            for (int i = 0; i < a.seeds; ++i) a.partials[i] = a.partials[i] * b.value + a.value * b.partials[i];
            a.value *= b.value;
            --top;
            break;
        }
        case Op::Div: {
            D& a = s[top - 1];
            const D& b = s[top];
            if (b.value == 0) p.domain_error("division by zero", in.node);
            Real q = a.value / b.value;
            for (int i = 0; i < a.seeds; ++i) a.partials[i] = (a.partials[i] - q * b.partials[i]) / b.value;
            a.value = q;
            --top;
            break;
        }
        case Op::Pow: {
            D& a = s[top - 1];
            const D& b = s[top];
            Real v = detail::pow_checked(p, in, a.value, b.value);
            bool exponent_constant = true;
            bool base_constant = true;
            for (int i = 0; i < a.seeds; ++i) {
                if (b.partials[i] != 0) exponent_constant = false;
                if (a.partials[i] != 0) base_constant = false;
            }
            if (exponent_constant) {
                if (!base_constant) {
                    using std::pow;
                    Real k = b.value * pow(a.value, b.value - Real(1));
                    scale(a, k);
                }
            } else {
                if (!(a.value > 0)) p.domain_error("variable exponent needs a positive base", in.node);
                Real la = log(a.value);
                for (int i = 0; i < a.seeds; ++i)
                    a.partials[i] = v * (b.partials[i] * la + b.value * a.partials[i] / a.value);
            }
            a.value = v;
            check_finite(a, in);
            --top;
            break;
        }
        case Op::PowInt: {
            D& a = s[top];
            if (a.value == 0 && in.arg < 0) p.domain_error("zero raised to a negative power", in.node);
            Real k = Real(in.arg) * detail::ipow(a.value, in.arg - 1);
            a.value = detail::ipow(a.value, in.arg);
            scale(a, k);
            break;
        }
        case Op::Sin: {
            D& a = s[top];
            Real c = cos(a.value);
            a.value = sin(a.value);
            scale(a, c);
            break;
        }
        case Op::Cos: {
            D& a = s[top];
            Real k = -sin(a.value);
            a.value = cos(a.value);
            scale(a, k);
            break;
        }
        case Op::Exp: {
            D& a = s[top];
            a.value = exp(a.value);
            scale(a, a.value);
            break;
        }
        case Op::Log: {
            D& a = s[top];
            if (!(a.value > 0)) p.domain_error("log of a non-positive value", in.node);
            Real inv = Real(1) / a.value;
            a.value = log(a.value);
            scale(a, inv);
            break;
        }
        case Op::Sqrt: {
            D& a = s[top];
            if (a.value < 0) p.domain_error("sqrt of a negative value", in.node);
            a.value = sqrt(a.value);
            if (a.value == 0) {
                for (int i = 0; i < a.seeds; ++i)
                    if (a.partials[i] != 0) p.domain_error("derivative of sqrt at zero", in.node);
            } else {
                scale(a, Real(0.5) / a.value);
            }
            break;
        }
        case Op::Abs: {
            D& a = s[top];
            if (a.value > 0) {
            } else if (a.value < 0) {
                a.value = -a.value;
                for (int i = 0; i < a.seeds; ++i) a.partials[i] = -a.partials[i];
            } else {
                for (int i = 0; i < a.seeds; ++i) a.partials[i] = abs(a.partials[i]);
            }
            break;
        }
        case Op::Tanh: {
            D& a = s[top];
            a.value = tanh(a.value);
            scale(a, Real(1) - a.value * a.value);
            break;
        }
        case Op::Min:
        case Op::Max: {
            const bool is_min = in.op == Op::Min;
            int base = top - in.arg + 1;
            D best = s[base];
            for (int j = base + 1; j <= top; ++j) {
                const D& c = s[j];
                bool better = is_min ? c.value < best.value : c.value > best.value;
                if (better) {
                    best = c;
                } else if (c.value == best.value) {
                    for (int i = 0; i < best.seeds; ++i) {
                        bool take = is_min ? c.partials[i] < best.partials[i] : c.partials[i] > best.partials[i];
                        if (take) best.partials[i] = c.partials[i];
                    }
                }
            }
            top = base;
            s[top] = best;
            break;
        }
        case Op::Norm: {
            int base = top - in.arg + 1;
            D out(Real(0), n);
            for (int i = 0; i < n; ++i) out.partials[i] = Real(0);
            for (int j = base; j <= top; ++j) out.value += s[j].value * s[j].value;
            out.value = sqrt(out.value);
            if (out.value > 0) {
                for (int j = base; j <= top; ++j) {
                    Real w = s[j].value / out.value;
                    for (int i = 0; i < n; ++i) out.partials[i] += w * s[j].partials[i];
                }
            }
            top = base;
            s[top] = out;
            break;
        }
        }
    }
    return s[0];
}

} // namespace barrier::expr
