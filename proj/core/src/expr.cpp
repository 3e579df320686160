#include "barrier/expr.hpp"

#include "barrier/errors.hpp"
#include "program.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <numbers>

namespace barrier::expr {

namespace {

NodePtr make_number(double v) {
    auto n = std::make_shared<Node>();
    n->kind = Node::Kind::Number;
    n->number = v;
    return n;
}

NodePtr make_variable(int index) {
    auto n = std::make_shared<Node>();
    n->kind = Node::Kind::Variable;
    n->variable = index;
    return n;
}

NodePtr make_unary(NodePtr a) {
    auto n = std::make_shared<Node>();
    n->kind = Node::Kind::Neg;
    n->args.push_back(std::move(a));
    return n;
}

NodePtr make_binary(Node::Kind kind, NodePtr a, NodePtr b) {
    auto n = std::make_shared<Node>();
    n->kind = kind;
    n->args.push_back(std::move(a));
    n->args.push_back(std::move(b));
    return n;
}

NodePtr make_call(Function fn, std::vector<NodePtr> args) {
    auto n = std::make_shared<Node>();
    n->kind = Node::Kind::Call;
    n->function = fn;
    n->args = std::move(args);
    return n;
}

// Literal constant; negative values become Neg(Number) so that printing re-parses.
NodePtr literal(double v) {
    if (std::signbit(v) && !std::isnan(v)) return make_unary(make_number(-v));
    return make_number(v);
}

struct FunctionInfo {
    std::string_view name;
    Function fn;
    int min_args;
    int max_args; // -1 = unbounded
};

constexpr FunctionInfo kFunctions[] = {
    {"sin", Function::Sin, 1, 1},   {"cos", Function::Cos, 1, 1},   {"exp", Function::Exp, 1, 1},
    {"log", Function::Log, 1, 1},   {"sqrt", Function::Sqrt, 1, 1}, {"abs", Function::Abs, 1, 1},
    {"tanh", Function::Tanh, 1, 1}, {"min", Function::Min, 2, -1},  {"max", Function::Max, 2, -1},
    {"norm", Function::Norm, 1, -1},
};

const FunctionInfo* find_function(std::string_view name) {
    for (const auto& f : kFunctions)
        if (f.name == name) return &f;
    return nullptr;
}

const FunctionInfo& info(Function fn) {
    for (const auto& f : kFunctions)
        if (f.fn == fn) return f;
    throw Error("unknown function id");
}

void check_arity(Function fn, std::size_t n, std::size_t offset, bool from_text) {
    const auto& f = info(fn);
    bool ok = static_cast<int>(n) >= f.min_args && (f.max_args < 0 || static_cast<int>(n) <= f.max_args);
    if (ok) return;
    std::string msg = "wrong number of arguments to " + std::string(f.name);
    if (from_text) throw SyntaxError(msg, offset);
    throw Error(msg);
}

class Parser {
public:
    Parser(std::string_view text, const std::vector<std::string>& vars) : text_(text), vars_(vars) {}

    NodePtr parse() {
        skip();
        if (pos_ >= text_.size()) throw SyntaxError("empty expression", pos_);
        NodePtr n = sum();
        skip();
        if (pos_ < text_.size()) throw SyntaxError(std::string("unexpected '") + text_[pos_] + "'", pos_);
        return n;
    }

private:
    void skip() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    }

    bool accept(char c) {
        skip();
        if (pos_ < text_.size() && text_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    NodePtr sum() {
        NodePtr lhs = product();
        for (;;) {
            if (accept('+')) lhs = make_binary(Node::Kind::Add, lhs, product());
            else if (accept('-')) lhs = make_binary(Node::Kind::Sub, lhs, product());
            else return lhs;
        }
    }

    NodePtr product() {
        NodePtr lhs = unary();
        for (;;) {
            if (accept('*')) lhs = make_binary(Node::Kind::Mul, lhs, unary());
            else if (accept('/')) lhs = make_binary(Node::Kind::Div, lhs, unary());
            else return lhs;
        }
    }

    NodePtr unary() {
        if (accept('-')) return make_unary(unary());
        return power();
    }

    NodePtr power() {
        NodePtr base = primary();
        if (accept('^')) return make_binary(Node::Kind::Pow, base, unary());
        return base;
    }

    NodePtr primary() {
        skip();
        if (pos_ >= text_.size()) throw SyntaxError("unexpected end of input", pos_);
        char c = text_[pos_];
        if (c == '(') {
            ++pos_;
            NodePtr inner = sum();
            if (!accept(')')) throw SyntaxError("expected ')'", pos_);
            return inner;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return name();
        throw SyntaxError(std::string("unexpected '") + c + "'", pos_);
    }

    NodePtr number() {
        std::size_t start = pos_;
        auto digits = [&] {
            std::size_t s = pos_;
            while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
            return pos_ - s;
        };
        std::size_t count = digits();
        if (pos_ < text_.size() && text_[pos_] == '.') {
            ++pos_;
            count += digits();
        }
        if (count == 0) throw SyntaxError("malformed number", start);
        if (pos_ < text_.size() && (text_[pos_] == 'e' || text_[pos_] == 'E')) {
            std::size_t save = pos_;
            ++pos_;
            if (pos_ < text_.size() && (text_[pos_] == '+' || text_[pos_] == '-')) ++pos_;
            if (digits() == 0) pos_ = save; // `2e` is 2 followed by the identifier e
        }
        std::string lit(text_.substr(start, pos_ - start));
        return make_number(std::strtod(lit.c_str(), nullptr));
    }

    NodePtr name() {
        std::size_t start = pos_;
        while (pos_ < text_.size() &&
               (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_'))
            ++pos_;
        std::string id(text_.substr(start, pos_ - start));
        skip();
        if (pos_ < text_.size() && text_[pos_] == '(') {
            const FunctionInfo* f = find_function(id);
            if (!f) throw SyntaxError("unknown function '" + id + "'", start);
            ++pos_;
            std::vector<NodePtr> args;
            if (!accept(')')) {
                do {
                    args.push_back(sum());
                } while (accept(','));
                if (!accept(')')) throw SyntaxError("expected ')' or ','", pos_);
            }
            check_arity(f->fn, args.size(), start, true);
            return make_call(f->fn, std::move(args));
        }
        if (id == "e") return make_number(std::numbers::e);
        if (id == "pi") return make_number(std::numbers::pi);
        auto it = std::find(vars_.begin(), vars_.end(), id);
        if (it == vars_.end()) {
            if (find_function(id)) throw SyntaxError("function '" + id + "' needs arguments", start);
            throw UnknownVariable(id);
        }
        return make_variable(static_cast<int>(it - vars_.begin()));
    }

    std::string_view text_;
    const std::vector<std::string>& vars_;
    std::size_t pos_ = 0;
};

std::string format_number(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void print_to(std::string& out, const Node& n, const std::vector<std::string>& vars) {
    using K = Node::Kind;
    switch (n.kind) {
    case K::Number: out += format_number(n.number); return;
    case K::Variable: out += vars.at(static_cast<std::size_t>(n.variable)); return;
    case K::Neg:
        out += "(-";
        print_to(out, *n.args[0], vars);
        out += ')';
        return;
    case K::Call:
        out += function_name(n.function);
        out += '(';
        for (std::size_t i = 0; i < n.args.size(); ++i) {
            if (i) out += ", ";
            print_to(out, *n.args[i], vars);
        }
        out += ')';
        return;
    default: break;
    }
    const char* op = n.kind == K::Add ? " + " : n.kind == K::Sub ? " - " : n.kind == K::Mul ? " * "
                   : n.kind == K::Div ? " / " : "^";
    out += '(';
    print_to(out, *n.args[0], vars);
    out += op;
    print_to(out, *n.args[1], vars);
    out += ')';
}

bool equal_nodes(const Node& a, const Node& b) {
    if (a.kind != b.kind) return false;
    switch (a.kind) {
    case Node::Kind::Number: return a.number == b.number || (std::isnan(a.number) && std::isnan(b.number));
    case Node::Kind::Variable: return a.variable == b.variable;
    case Node::Kind::Call:
        if (a.function != b.function) return false;
        break;
    default: break;
    }
    if (a.args.size() != b.args.size()) return false;
    for (std::size_t i = 0; i < a.args.size(); ++i)
        if (!equal_nodes(*a.args[i], *b.args[i])) return false;
    return true;
}

// Constant integer exponent (possibly negated literal) suitable for repeated squaring.
bool integer_exponent(const Node& n, int& out) {
    double v;
    if (n.kind == Node::Kind::Number) v = n.number;
    else if (n.kind == Node::Kind::Neg && n.args[0]->kind == Node::Kind::Number) v = -n.args[0]->number;
    else return false;
    if (std::floor(v) != v || std::abs(v) > 64) return false;
    out = static_cast<int>(v);
    return true;
}

void emit(Program& p, const NodePtr& node, int depth) {
    using K = Node::Kind;
    const Node& n = *node;
    auto push = [&](Instr in) {
        in.node = &n;
        p.code.push_back(in);
    };
    p.max_depth = std::max(p.max_depth, depth + 1);
    switch (n.kind) {
    case K::Number: push({Op::Const, 0, n.number}); return;
    case K::Variable: push({Op::Var, n.variable}); return;
    case K::Neg:
        emit(p, n.args[0], depth);
        push({Op::Neg});
        return;
    case K::Pow: {
        int k;
        emit(p, n.args[0], depth);
        if (integer_exponent(*n.args[1], k)) {
            push({Op::PowInt, k});
        } else {
            emit(p, n.args[1], depth + 1);
            push({Op::Pow});
        }
        return;
    }
    case K::Add:
    case K::Sub:
    case K::Mul:
    case K::Div: {
        emit(p, n.args[0], depth);
        emit(p, n.args[1], depth + 1);
        Op op = n.kind == K::Add ? Op::Add : n.kind == K::Sub ? Op::Sub : n.kind == K::Mul ? Op::Mul : Op::Div;
        push({op});
        return;
    }
    case K::Call: {
        for (std::size_t i = 0; i < n.args.size(); ++i) emit(p, n.args[i], depth + static_cast<int>(i));
        Op op{};
        switch (n.function) {
        case Function::Sin: op = Op::Sin; break;
        case Function::Cos: op = Op::Cos; break;
        case Function::Exp: op = Op::Exp; break;
        case Function::Log: op = Op::Log; break;
        case Function::Sqrt: op = Op::Sqrt; break;
        case Function::Abs: op = Op::Abs; break;
        case Function::Tanh: op = Op::Tanh; break;
        case Function::Min: op = Op::Min; break;
        case Function::Max: op = Op::Max; break;
        case Function::Norm: op = Op::Norm; break;
        }
        push({op, static_cast<int>(n.args.size())});
        return;
    }
    }
}

NodePtr remap(const NodePtr& node, const std::vector<NodePtr>& table) {
    if (node->kind == Node::Kind::Variable) return table[static_cast<std::size_t>(node->variable)];
    if (node->args.empty()) return node;
    auto copy = std::make_shared<Node>(*node);
    bool changed = false;
    for (auto& a : copy->args) {
        NodePtr r = remap(a, table);
        changed = changed || r != a;
        a = std::move(r);
    }
    return changed ? NodePtr(copy) : node;
}

std::vector<std::string> merged(const std::vector<std::string>& a, const std::vector<std::string>& b) {
    std::vector<std::string> out = a;
    for (const auto& v : b)
        if (std::find(out.begin(), out.end(), v) == out.end()) out.push_back(v);
    return out;
}

std::pair<Expression, Expression> align(const Expression& a, const Expression& b) {
    if (a.empty() || b.empty()) throw Error("operation on an empty expression");
    if (a.variables() == b.variables()) return {a, b};
    auto vars = merged(a.variables(), b.variables());
    return {a.rebind(vars), b.rebind(vars)};
}

} // namespace

std::string print_node(const Node& node, const std::vector<std::string>& variables) {
    std::string out;
    print_to(out, node, variables);
    return out;
}

std::string_view function_name(Function fn) { return info(fn).name; }

Program compile(const NodePtr& root, std::shared_ptr<const std::vector<std::string>> variables) {
    Program p;
    p.variables = std::move(variables);
    p.root = root;
    emit(p, root, 0);
    return p;
}

Expression::Expression(NodePtr root, std::shared_ptr<const std::vector<std::string>> variables)
    : root_(std::move(root)), variables_(std::move(variables)) {
    program_ = std::make_shared<const Program>(compile(root_, variables_));
}

Expression Expression::parse(std::string_view text, std::vector<std::string> variables) {
    Parser parser(text, variables);
    NodePtr root = parser.parse();
    return Expression(root, std::make_shared<const std::vector<std::string>>(std::move(variables)));
}

Expression Expression::constant(double value, std::vector<std::string> variables) {
    return Expression(literal(value), std::make_shared<const std::vector<std::string>>(std::move(variables)));
}

Expression Expression::variable(std::string_view name, std::vector<std::string> variables) {
    auto it = std::find(variables.begin(), variables.end(), name);
    if (it == variables.end()) throw UnknownVariable(std::string(name));
    int index = static_cast<int>(it - variables.begin());
    return Expression(make_variable(index), std::make_shared<const std::vector<std::string>>(std::move(variables)));
}

std::string Expression::to_string() const { return root_ ? print_node(*root_, *variables_) : std::string(); }

double Expression::eval(std::span<const double> values) const {
    if (values.size() < variables_->size()) throw Error("too few values for expression variables");
    return run_scalar<double>(*program_, values.data());
}

double Expression::eval(const std::map<std::string, double>& bindings) const {
    std::vector<double> values(variables_->size(), 0.0);
    std::vector<bool> used(variables_->size(), false);
    for (const auto& in : program_->code)
        if (in.op == Op::Var) used[static_cast<std::size_t>(in.arg)] = true;
    for (std::size_t i = 0; i < values.size(); ++i) {
        auto it = bindings.find((*variables_)[i]);
        if (it != bindings.end()) values[i] = it->second;
        else if (used[i]) throw UnknownVariable((*variables_)[i]);
    }
    return eval(values);
}

DualValue Expression::eval_dual(std::span<const DualValue> values) const {
    if (values.size() < variables_->size()) throw Error("too few values for expression variables");
    return run_dual<double>(*program_, values.data());
}

double Expression::value_gradient(std::span<const double> values, std::span<const int> seed_indices,
                                  std::span<double> gradient) const {
    const std::size_t nv = variables_->size();
    if (values.size() < nv) throw Error("too few values for expression variables");
    if (gradient.size() < seed_indices.size()) throw Error("gradient buffer too small");
    std::array<DualValue, 16> fixed;
    std::vector<DualValue> heap;
    DualValue* in = fixed.data();
    if (nv > fixed.size()) {
        heap.resize(nv);
        in = heap.data();
    }
    double value = 0.0;
    const std::size_t ns = seed_indices.size();
    std::size_t done = 0;
    do {
        const int chunk = static_cast<int>(std::min(kMaxSeeds, ns - done));
        for (std::size_t i = 0; i < nv; ++i) {
            in[i] = DualValue(values[i], chunk);
            for (int k = 0; k < chunk; ++k) in[i].partials[k] = 0.0;
        }
        for (int k = 0; k < chunk; ++k) {
            int idx = seed_indices[done + k];
            if (idx < 0 || static_cast<std::size_t>(idx) >= nv) throw Error("seed index out of range");
            in[idx].partials[k] = 1.0;
        }
        DualValue out = run_dual<double>(*program_, in);
        value = out.value;
        for (int k = 0; k < chunk; ++k) gradient[done + k] = out.partials[k];
        done += static_cast<std::size_t>(chunk);
    } while (done < ns);
    return value;
}

bool Expression::structurally_equal(const Expression& other) const {
    if (empty() || other.empty()) return empty() == other.empty();
    return *variables_ == *other.variables_ && equal_nodes(*root_, *other.root_);
}

Expression Expression::substitute(const std::vector<std::string>& new_variables,
                                  const std::map<std::string, Expression>& replacements) const {
    std::vector<NodePtr> table;
    table.reserve(variables_->size());
    for (const auto& name : *variables_) {
        auto it = replacements.find(name);
        if (it != replacements.end()) {
            table.push_back(it->second.rebind(new_variables).root());
            continue;
        }
        auto pos = std::find(new_variables.begin(), new_variables.end(), name);
        if (pos == new_variables.end()) {
            table.push_back(nullptr); // only an error if actually referenced
            continue;
        }
        table.push_back(make_variable(static_cast<int>(pos - new_variables.begin())));
    }
    for (const auto& in : program_->code)
        if (in.op == Op::Var && !table[static_cast<std::size_t>(in.arg)])
            throw UnknownVariable((*variables_)[static_cast<std::size_t>(in.arg)]);
    return Expression(remap(root_, table), std::make_shared<const std::vector<std::string>>(new_variables));
}

Expression Expression::rebind(const std::vector<std::string>& new_variables) const {
    if (new_variables == *variables_) return *this;
    return substitute(new_variables, {});
}

Expression Expression::operator-() const { return Expression(make_unary(root_), variables_); }

Expression operator+(const Expression& a, const Expression& b) {
    auto [x, y] = align(a, b);
    return Expression(make_binary(Node::Kind::Add, x.root_, y.root_), x.variables_);
}

Expression operator-(const Expression& a, const Expression& b) {
    auto [x, y] = align(a, b);
    return Expression(make_binary(Node::Kind::Sub, x.root_, y.root_), x.variables_);
}

Expression operator*(const Expression& a, const Expression& b) {
    auto [x, y] = align(a, b);
    return Expression(make_binary(Node::Kind::Mul, x.root_, y.root_), x.variables_);
}

Expression operator/(const Expression& a, const Expression& b) {
    auto [x, y] = align(a, b);
    return Expression(make_binary(Node::Kind::Div, x.root_, y.root_), x.variables_);
}

Expression pow(const Expression& a, const Expression& b) {
    auto [x, y] = align(a, b);
    return Expression(make_binary(Node::Kind::Pow, x.root_, y.root_), x.variables_);
}

Expression call(Function fn, const std::vector<Expression>& args) {
    check_arity(fn, args.size(), 0, false);
    std::vector<std::string> vars;
    for (const auto& a : args) vars = merged(vars, a.variables());
    std::vector<NodePtr> nodes;
    for (const auto& a : args) nodes.push_back(a.rebind(vars).root_);
    return Expression(make_call(fn, std::move(nodes)), std::make_shared<const std::vector<std::string>>(vars));
}

std::string print(const Expression& e) { return e.to_string(); }

Expression parse(std::string_view text, const std::vector<std::string>& variables) {
    return Expression::parse(text, variables);
}

double eval(const Expression& e, const std::map<std::string, double>& bindings) { return e.eval(bindings); }

std::vector<double> gradient(const Expression& e, const std::map<std::string, double>& bindings,
                             const std::vector<std::string>& seeds) {
    const auto& vars = e.variables();
    std::vector<double> values(vars.size(), 0.0);
    for (std::size_t i = 0; i < vars.size(); ++i) {
        auto it = bindings.find(vars[i]);
        if (it != bindings.end()) values[i] = it->second;
    }
    std::vector<int> idx;
    for (const auto& s : seeds) {
        auto it = std::find(vars.begin(), vars.end(), s);
        if (it == vars.end() || !bindings.count(s)) throw UnknownVariable(s);
        idx.push_back(static_cast<int>(it - vars.begin()));
    }
    // Referenced variables must all be bound.
    for (const auto& in : e.program().code)
        if (in.op == Op::Var && !bindings.count(vars[static_cast<std::size_t>(in.arg)]))
            throw UnknownVariable(vars[static_cast<std::size_t>(in.arg)]);
    std::vector<double> g(idx.size());
    e.value_gradient(values, idx, g);
    return g;
}

} // namespace barrier::expr
