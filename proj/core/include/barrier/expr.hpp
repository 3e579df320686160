#pragma once

// Scalar expressions over named variables with forward-mode derivatives.
//
// Grammar (loosest to tightest binding):
//   sum     := product (('+' | '-') product)*
//   product := unary (('*' | '/') unary)*
//   unary   := '-' unary | power
//   power   := primary ('^' unary)?          right associative
//   primary := number | name | name '(' args ')' | '(' sum ')'
//
// `e` and `pi` are reserved constants and desugar to numeric literals.

#include <array>
#include <cstddef>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace barrier::expr {

inline constexpr std::size_t kMaxSeeds = 8;

/// Value plus partial derivatives with respect to up to kMaxSeeds seeds.
template <class Real>
struct BasicDual {
    Real value{};
    std::array<Real, kMaxSeeds> partials{};
    int seeds = 0;

    BasicDual() = default;
    BasicDual(Real v, int n) : value(v), seeds(n) {}
};

using DualValue = BasicDual<double>;

enum class Function { Sin, Cos, Exp, Log, Sqrt, Abs, Tanh, Min, Max, Norm };

struct Node {
    enum class Kind { Number, Variable, Neg, Add, Sub, Mul, Div, Pow, Call };

    Kind kind = Kind::Number;
    double number = 0.0;
    int variable = -1;
    Function function = Function::Sin;
    std::vector<std::shared_ptr<const Node>> args;
};

using NodePtr = std::shared_ptr<const Node>;

struct Program;

class Expression {
public:
    Expression() = default;

    static Expression parse(std::string_view text, std::vector<std::string> variables);

    /// Literal constant over the given variable list.
    static Expression constant(double value, std::vector<std::string> variables);
    static Expression variable(std::string_view name, std::vector<std::string> variables);

    const std::vector<std::string>& variables() const { return *variables_; }
    const NodePtr& root() const { return root_; }
    bool empty() const { return root_ == nullptr; }

    std::string to_string() const;

    /// Positional evaluation; values[i] binds variables()[i].
    double eval(std::span<const double> values) const;
    double eval(const std::map<std::string, double>& bindings) const;

    /// Forward-mode evaluation; inputs carry their own seed partials.
    DualValue eval_dual(std::span<const DualValue> values) const;

    /// Value and gradient with respect to the variables at `seed_indices`.
    double value_gradient(std::span<const double> values, std::span<const int> seed_indices,
                          std::span<double> gradient) const;

    bool structurally_equal(const Expression& other) const;

    /// Replace variables by expressions; the result lives over `new_variables`.
    /// Variables without a replacement must appear in `new_variables` by name.
    Expression substitute(const std::vector<std::string>& new_variables,
                          const std::map<std::string, Expression>& replacements) const;

    /// Re-express over a superset (or reordering) of the current variables.
    Expression rebind(const std::vector<std::string>& new_variables) const;

    Expression operator-() const;
    friend Expression operator+(const Expression& a, const Expression& b);
    friend Expression operator-(const Expression& a, const Expression& b);
    friend Expression operator*(const Expression& a, const Expression& b);
    friend Expression operator/(const Expression& a, const Expression& b);
    friend Expression pow(const Expression& a, const Expression& b);
    friend Expression call(Function fn, const std::vector<Expression>& args);

    const Program& program() const { return *program_; }

private:
    Expression(NodePtr root, std::shared_ptr<const std::vector<std::string>> variables);

    NodePtr root_;
    std::shared_ptr<const std::vector<std::string>> variables_;
    std::shared_ptr<const Program> program_;
};

Expression pow(const Expression& a, const Expression& b);
Expression call(Function fn, const std::vector<Expression>& args);

std::string print(const Expression& e);
Expression parse(std::string_view text, const std::vector<std::string>& variables);
double eval(const Expression& e, const std::map<std::string, double>& bindings);
std::vector<double> gradient(const Expression& e, const std::map<std::string, double>& bindings,
                             const std::vector<std::string>& seeds);

std::string_view function_name(Function fn);

} // namespace barrier::expr
