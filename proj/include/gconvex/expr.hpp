#pragma once

// Expression trees for drivers g(t,y,z) and scalar functions h(y) / phi(x).
//
// Grammar:
//   expr   := term (("+"|"-") term)*
//   term   := factor (("*"|"/") factor)*
//   factor := NUMBER | "t" | STATE | "z" IDX? | "norm(z)"
//           | "abs(" expr ")" | "max(" expr "," expr ")" | "min(" expr "," expr ")"
//           | "-" factor | "(" expr ")"
// Parentheses do not create nodes. NUMBER is unsigned; a leading minus is a Neg node.

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gconvex/errors.hpp"

namespace gconvex::expr {

enum class Op : std::uint8_t {
    constant,
    time,
    state,
    z,
    norm_z,
    neg,
    abs,
    add,
    sub,
    mul,
    div,
    max,
    min,
    // Internal nodes produced by differentiation; not part of the input grammar.
    sign,
    if_nonneg,
};

struct Node;
using Expr = std::shared_ptr<const Node>;

struct Node {
    Op op = Op::constant;
    double value = 0.0;  // Op::constant
    int index = 0;       // Op::z, 1-based
    std::array<Expr, 3> args{};
};

inline int arity(Op op) {
    switch (op) {
    case Op::constant:
    case Op::time:
    case Op::state:
    case Op::z:
    case Op::norm_z:
        return 0;
    case Op::neg:
    case Op::abs:
    case Op::sign:
        return 1;
    case Op::if_nonneg:
        return 3;
    default:
        return 2;
    }
}

// ---------------------------------------------------------------- builders

inline Expr make(Op op, Expr a = nullptr, Expr b = nullptr, Expr c = nullptr) {
    auto n = std::make_shared<Node>();
    n->op = op;
    n->args = {std::move(a), std::move(b), std::move(c)};
    return n;
}

inline Expr constant(double v) {
    auto n = std::make_shared<Node>();
    n->op = Op::constant;
    n->value = v;
    return n;
}

inline Expr time_var() { return make(Op::time); }
inline Expr state_var() { return make(Op::state); }
inline Expr norm_z() { return make(Op::norm_z); }

inline Expr z_var(int index) {
    auto n = std::make_shared<Node>();
    n->op = Op::z;
    n->index = index;
    return n;
}

inline Expr neg(Expr a) { return make(Op::neg, std::move(a)); }
inline Expr abs(Expr a) { return make(Op::abs, std::move(a)); }
inline Expr add(Expr a, Expr b) { return make(Op::add, std::move(a), std::move(b)); }
inline Expr sub(Expr a, Expr b) { return make(Op::sub, std::move(a), std::move(b)); }
inline Expr mul(Expr a, Expr b) { return make(Op::mul, std::move(a), std::move(b)); }
inline Expr div(Expr a, Expr b) { return make(Op::div, std::move(a), std::move(b)); }
inline Expr max(Expr a, Expr b) { return make(Op::max, std::move(a), std::move(b)); }
inline Expr min(Expr a, Expr b) { return make(Op::min, std::move(a), std::move(b)); }

// ---------------------------------------------------------------- inspection

inline bool equal(const Expr& a, const Expr& b) {
    if (a == b) return true;
    if (!a || !b) return false;
    if (a->op != b->op) return false;
    if (a->op == Op::constant) return a->value == b->value;
    if (a->op == Op::z) return a->index == b->index;
    for (int i = 0; i < arity(a->op); ++i)
        if (!equal(a->args[i], b->args[i])) return false;
    return true;
}

template <class Pred>
bool any_node(const Expr& e, Pred&& pred) {
    if (!e) return false;
    if (pred(*e)) return true;
    for (int i = 0; i < arity(e->op); ++i)
        if (any_node(e->args[i], pred)) return true;
    return false;
}

inline bool uses_time(const Expr& e) {
    return any_node(e, [](const Node& n) { return n.op == Op::time; });
}
inline bool uses_state(const Expr& e) {
    return any_node(e, [](const Node& n) { return n.op == Op::state; });
}
inline bool uses_z(const Expr& e) {
    return any_node(e, [](const Node& n) { return n.op == Op::z || n.op == Op::norm_z; });
}

/// True when the tree has no kink-producing nodes (abs/max/min), i.e. the
/// function is C2 wherever it is defined.
inline bool is_smooth(const Expr& e) {
    return !any_node(e, [](const Node& n) {
        return n.op == Op::abs || n.op == Op::max || n.op == Op::min || n.op == Op::sign ||
               n.op == Op::if_nonneg;
    });
}

inline int depth(const Expr& e) {
    int d = 0;
    for (int i = 0; i < arity(e->op); ++i) d = std::max(d, depth(e->args[i]));
    return d + 1;
}

inline void collect_denominators(const Expr& e, std::vector<Expr>& out) {
    if (e->op == Op::div) out.push_back(e->args[1]);
    for (int i = 0; i < arity(e->op); ++i) collect_denominators(e->args[i], out);
}

// ---------------------------------------------------------------- evaluation

inline double sign_of(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

inline double norm(std::span<const double> z) {
    double s = 0.0;
    for (double v : z) s += v * v;
    return std::sqrt(s);
}

/// Tree-walking evaluator; reference semantics for `Program`.
inline double eval(const Expr& e, double t, double s, std::span<const double> z) {
    const auto& a = e->args;
    switch (e->op) {
    case Op::constant: return e->value;
    case Op::time: return t;
    case Op::state: return s;
    case Op::z: return z[static_cast<std::size_t>(e->index - 1)];
    case Op::norm_z: return norm(z);
    case Op::neg: return -eval(a[0], t, s, z);
    case Op::abs: return std::fabs(eval(a[0], t, s, z));
    case Op::sign: return sign_of(eval(a[0], t, s, z));
    case Op::add: return eval(a[0], t, s, z) + eval(a[1], t, s, z);
    case Op::sub: return eval(a[0], t, s, z) - eval(a[1], t, s, z);
    case Op::mul: return eval(a[0], t, s, z) * eval(a[1], t, s, z);
    case Op::div: return eval(a[0], t, s, z) / eval(a[1], t, s, z);
    case Op::max: return std::max(eval(a[0], t, s, z), eval(a[1], t, s, z));
    case Op::min: return std::min(eval(a[0], t, s, z), eval(a[1], t, s, z));
    case Op::if_nonneg:
        return eval(a[0], t, s, z) >= 0.0 ? eval(a[1], t, s, z) : eval(a[2], t, s, z);
    }
    return 0.0;
}

/// Postfix bytecode for hot loops. Produces bit-identical results to `eval`.
class Program {
public:
    Program() = default;

    explicit Program(const Expr& e) {
        emit(e);
        int d = 0;
        for (const auto& ins : code_) {
            d += 1 - arity(ins.op);
            max_stack_ = std::max(max_stack_, d);
        }
    }

    double operator()(double t, double s, std::span<const double> z) const {
        constexpr int kInline = 64;
        if (max_stack_ <= kInline) {
            std::array<double, kInline> stack;
            return run(stack.data(), t, s, z);
        }
        std::vector<double> stack(static_cast<std::size_t>(max_stack_));
        return run(stack.data(), t, s, z);
    }

    bool empty() const { return code_.empty(); }

private:
    struct Instr {
        Op op;
        double value;
        int index;
    };

    void emit(const Expr& e) {
        // if_nonneg needs all three operands evaluated; the selection is
        // value-only, so eager evaluation matches the tree semantics.
        for (int i = 0; i < arity(e->op); ++i) emit(e->args[i]);
        code_.push_back({e->op, e->value, e->index});
    }

    double run(double* st, double t, double s, std::span<const double> z) const {
        int sp = 0;
        for (const auto& ins : code_) {
            switch (ins.op) {
            case Op::constant: st[sp++] = ins.value; break;
            case Op::time: st[sp++] = t; break;
            case Op::state: st[sp++] = s; break;
            case Op::z: st[sp++] = z[static_cast<std::size_t>(ins.index - 1)]; break;
            case Op::norm_z: st[sp++] = norm(z); break;
            case Op::neg: st[sp - 1] = -st[sp - 1]; break;
            case Op::abs: st[sp - 1] = std::fabs(st[sp - 1]); break;
            case Op::sign: st[sp - 1] = sign_of(st[sp - 1]); break;
            case Op::add: --sp; st[sp - 1] = st[sp - 1] + st[sp]; break;
            case Op::sub: --sp; st[sp - 1] = st[sp - 1] - st[sp]; break;
            case Op::mul: --sp; st[sp - 1] = st[sp - 1] * st[sp]; break;
            case Op::div: --sp; st[sp - 1] = st[sp - 1] / st[sp]; break;
            case Op::max: --sp; st[sp - 1] = std::max(st[sp - 1], st[sp]); break;
            case Op::min: --sp; st[sp - 1] = std::min(st[sp - 1], st[sp]); break;
            case Op::if_nonneg:
                sp -= 2;
                st[sp - 1] = st[sp - 1] >= 0.0 ? st[sp] : st[sp + 1];
                break;
            }
        }
        return st[0];
    }

    std::vector<Instr> code_;
    int max_stack_ = 0;
};

// ---------------------------------------------------------------- grammar

/// Variable vocabulary accepted by the parser.
struct Grammar {
    std::string state_name = "y";
    bool allow_time = true;
    int dim_z = 1;  // 0 disables z entirely
};

inline Grammar generator_grammar(int dim_z) { return Grammar{"y", true, dim_z}; }
inline Grammar scalar_grammar(std::string var) { return Grammar{std::move(var), false, 0}; }

namespace detail {

class Parser {
public:
    Parser(std::string_view src, const Grammar& g) : src_(src), g_(g) {}

    Expr parse() {
        skip_ws();
        if (pos_ >= src_.size()) throw SyntaxError(pos_, "empty expression");
        Expr e = parse_expr();
        skip_ws();
        if (pos_ < src_.size()) fail_here("unexpected trailing input");
        return e;
    }

private:
    [[noreturn]] void fail(std::size_t at, const std::string& msg) const { throw SyntaxError(at, msg); }
    [[noreturn]] void fail_here(const std::string& msg) const {
        if (pos_ >= src_.size()) fail(pos_, msg + " (end of input)");
        fail(pos_, msg + " near '" + std::string(1, src_[pos_]) + "'");
    }

    void skip_ws() {
        while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
    }

    bool peek(char c) {
        skip_ws();
        return pos_ < src_.size() && src_[pos_] == c;
    }

    void expect(char c) {
        skip_ws();
        if (pos_ >= src_.size() || src_[pos_] != c) fail_here(std::string("expected '") + c + "'");
        ++pos_;
    }

    Expr parse_expr() {
        Expr lhs = parse_term();
        for (;;) {
            skip_ws();
            if (peek('+')) {
                ++pos_;
                lhs = add(lhs, parse_term());
            } else if (peek('-')) {
                ++pos_;
                lhs = sub(lhs, parse_term());
            } else {
                return lhs;
            }
        }
    }

    Expr parse_term() {
        Expr lhs = parse_factor();
        for (;;) {
            skip_ws();
            if (peek('*')) {
                if (pos_ + 1 < src_.size() && src_[pos_ + 1] == '*') fail(pos_, "power operator '**' is not supported");
                ++pos_;
                lhs = mul(lhs, parse_factor());
            } else if (peek('/')) {
                ++pos_;
                lhs = div(lhs, parse_factor());
            } else {
                return lhs;
            }
        }
    }

    Expr parse_factor() {
        skip_ws();
        if (pos_ >= src_.size()) fail(pos_, "unexpected end of input");
        const char c = src_[pos_];
        if (c == '-') {
            ++pos_;
            return neg(parse_factor());
        }
        if (c == '(') {
            ++pos_;
            Expr e = parse_expr();
            expect(')');
            return e;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return parse_identifier();
        fail_here("unexpected character");
    }

    Expr parse_number() {
        const std::size_t start = pos_;
        auto digits = [&] {
            std::size_t n = 0;
            while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_, ++n;
            return n;
        };
        std::size_t n = digits();
        if (pos_ < src_.size() && src_[pos_] == '.') {
            ++pos_;
            n += digits();
        }
        if (n == 0) fail(start, "malformed number");
        if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
            const std::size_t save = pos_;
            ++pos_;
            if (pos_ < src_.size() && (src_[pos_] == '+' || src_[pos_] == '-')) ++pos_;
            if (digits() == 0) pos_ = save;  // not an exponent; let the caller reject 'e'
        }
        double v = 0.0;
        auto [ptr, ec] = std::from_chars(src_.data() + start, src_.data() + pos_, v);
        if (ec != std::errc{} || ptr != src_.data() + pos_) fail(start, "malformed number");
        return constant(v);
    }

    Expr parse_identifier() {
        const std::size_t start = pos_;
        while (pos_ < src_.size() &&
               (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
            ++pos_;
        const std::string_view id = src_.substr(start, pos_ - start);

        if (id == "abs") {
            expect('(');
            Expr a = parse_expr();
            expect(')');
            return abs(a);
        }
        if (id == "max" || id == "min") {
            expect('(');
            Expr a = parse_expr();
            expect(',');
            Expr b = parse_expr();
            expect(')');
            return id == "max" ? max(a, b) : min(a, b);
        }
        if (id == "norm") {
            if (g_.dim_z == 0) throw UnknownVariable("norm(z) is not available in this context");
            expect('(');
            skip_ws();
            if (pos_ >= src_.size() || src_[pos_] != 'z') fail_here("expected 'z' in norm(z)");
            ++pos_;
            expect(')');
            return norm_z();
        }
        if (id == g_.state_name) return state_var();
        if (id == "t") {
            if (!g_.allow_time) throw UnknownVariable("variable 't' is not available in this context");
            return time_var();
        }
        if (id[0] == 'z' && g_.dim_z > 0) {
            if (id.size() == 1) {
                if (g_.dim_z != 1)
                    throw UnknownVariable("bare 'z' is only allowed when dim_z = 1 (got " +
                                          std::to_string(g_.dim_z) + ")");
                return z_var(1);
            }
            const std::string_view idx = id.substr(1);
            if (!std::all_of(idx.begin(), idx.end(), [](char ch) { return std::isdigit(static_cast<unsigned char>(ch)); }))
                fail(start, "unknown identifier '" + std::string(id) + "'");
            int k = 0;
            auto [ptr, ec] = std::from_chars(idx.data(), idx.data() + idx.size(), k);
            if (ec != std::errc{} || k < 1) fail(start, "z index must be a decimal >= 1");
            if (k > g_.dim_z)
                throw UnknownVariable("variable '" + std::string(id) + "' exceeds dim_z = " + std::to_string(g_.dim_z));
            return z_var(k);
        }
        if (id == "x" || id == "y" || id == "t" || id[0] == 'z')
            throw UnknownVariable("variable '" + std::string(id) + "' is not available in this context");
        fail(start, "unknown identifier '" + std::string(id) + "'");
    }

    std::string_view src_;
    const Grammar& g_;
    std::size_t pos_ = 0;
};

inline std::string format_number(double v) {
    std::array<char, 64> buf;
    auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), ptr);
}

inline int precedence(Op op) {
    switch (op) {
    case Op::add:
    case Op::sub: return 1;
    case Op::mul:
    case Op::div: return 2;
    case Op::neg: return 3;
    default: return 4;
    }
}

inline std::string print(const Expr& e, const Grammar& g);

inline std::string print_operand(const Expr& e, const Grammar& g, int min_prec) {
    std::string s = print(e, g);
    // A negative literal is printed with its sign and binds like Neg.
    const int p = (e->op == Op::constant && e->value < 0) ? 3 : precedence(e->op);
    return p < min_prec ? "(" + s + ")" : s;
}

inline std::string print(const Expr& e, const Grammar& g) {
    const auto& a = e->args;
    switch (e->op) {
    case Op::constant: return format_number(e->value);
    case Op::time: return "t";
    case Op::state: return g.state_name;
    case Op::z: return (g.dim_z == 1 ? std::string("z1") : "z" + std::to_string(e->index));
    case Op::norm_z: return "norm(z)";
    case Op::neg: return "-" + print_operand(a[0], g, 3);
    case Op::abs: return "abs(" + print(a[0], g) + ")";
    case Op::sign: return "sign(" + print(a[0], g) + ")";
    case Op::max: return "max(" + print(a[0], g) + ", " + print(a[1], g) + ")";
    case Op::min: return "min(" + print(a[0], g) + ", " + print(a[1], g) + ")";
    case Op::if_nonneg:
        return "ifnonneg(" + print(a[0], g) + ", " + print(a[1], g) + ", " + print(a[2], g) + ")";
    case Op::add: return print_operand(a[0], g, 1) + " + " + print_operand(a[1], g, 2);
    case Op::sub: return print_operand(a[0], g, 1) + " - " + print_operand(a[1], g, 2);
    case Op::mul: return print_operand(a[0], g, 2) + " * " + print_operand(a[1], g, 3);
    case Op::div: return print_operand(a[0], g, 2) + " / " + print_operand(a[1], g, 3);
    }
    return {};
}

} // namespace detail

/// Parses `source` under grammar `g`. Throws SyntaxError (with byte offset)
/// or UnknownVariable.
inline Expr parse(std::string_view source, const Grammar& g) { return detail::Parser(source, g).parse(); }

/// Minimal-parenthesis rendering; `parse(to_string(e)) == e` for every tree
/// built from grammar nodes with nonnegative constants.
inline std::string to_string(const Expr& e, const Grammar& g) { return detail::print(e, g); }

// ---------------------------------------------------------------- calculus

namespace detail {

inline bool is_const(const Expr& e, double v) { return e->op == Op::constant && e->value == v; }

inline Expr s_add(Expr a, Expr b) {
    if (is_const(a, 0.0)) return b;
    if (is_const(b, 0.0)) return a;
    return add(std::move(a), std::move(b));
}
inline Expr s_sub(Expr a, Expr b) {
    if (is_const(b, 0.0)) return a;
    if (is_const(a, 0.0)) return neg(std::move(b));
    return sub(std::move(a), std::move(b));
}
inline Expr s_mul(Expr a, Expr b) {
    if (is_const(a, 0.0) || is_const(b, 0.0)) return constant(0.0);
    if (is_const(a, 1.0)) return b;
    if (is_const(b, 1.0)) return a;
    return mul(std::move(a), std::move(b));
}
inline Expr s_neg(Expr a) {
    if (is_const(a, 0.0)) return a;
    return neg(std::move(a));
}

} // namespace detail

/// Derivative with respect to the state variable. At kinks the result picks a
/// one-sided value (abs uses sign(0) = 0, max/min take the first branch on ties);
/// it is exact everywhere the function is differentiable.
inline Expr derivative(const Expr& e) {
    using namespace detail;
    const auto& a = e->args;
    switch (e->op) {
    case Op::constant:
    case Op::time:
    case Op::z:
    case Op::norm_z:
    case Op::sign: return constant(0.0);
    case Op::state: return constant(1.0);
    case Op::neg: return s_neg(derivative(a[0]));
    case Op::abs: return s_mul(make(Op::sign, a[0]), derivative(a[0]));
    case Op::add: return s_add(derivative(a[0]), derivative(a[1]));
    case Op::sub: return s_sub(derivative(a[0]), derivative(a[1]));
    case Op::mul: return s_add(s_mul(derivative(a[0]), a[1]), s_mul(a[0], derivative(a[1])));
    case Op::div: {
        Expr num = s_sub(s_mul(derivative(a[0]), a[1]), s_mul(a[0], derivative(a[1])));
        if (is_const(num, 0.0)) return num;
        return div(num, mul(a[1], a[1]));
    }
    case Op::max: return make(Op::if_nonneg, sub(a[0], a[1]), derivative(a[0]), derivative(a[1]));
    case Op::min: return make(Op::if_nonneg, sub(a[0], a[1]), derivative(a[1]), derivative(a[0]));
    case Op::if_nonneg: return make(Op::if_nonneg, a[0], derivative(a[1]), derivative(a[2]));
    }
    return constant(0.0);
}

/// Replaces every state-variable leaf with `replacement` (function composition).
inline Expr substitute_state(const Expr& e, const Expr& replacement) {
    if (e->op == Op::state) return replacement;
    const int n = arity(e->op);
    if (n == 0) return e;
    auto out = std::make_shared<Node>(*e);
    for (int i = 0; i < n; ++i) out->args[i] = substitute_state(e->args[i], replacement);
    return out;
}

} // namespace gconvex::expr
