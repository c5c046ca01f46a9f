#pragma once

#include <cmath>
#include <memory>
#include <string>
#include <variant>
#include <vector>

#include "gconvex/errors.hpp"
#include "gconvex/expr.hpp"
#include "gconvex/grid.hpp"

namespace gconvex {

enum class Smoothness { c2, continuous };

/// Values on a uniform, strictly increasing grid. Between nodes the function
/// is read by linear interpolation; derivatives exist only at interior nodes
/// as difference quotients.
struct Tabulated {
    UniformGrid grid;
    std::vector<double> values;

    struct NodeDerivatives {
        double left;    // backward quotient
        double right;   // forward quotient
        double first;   // central quotient
        double second;  // second difference quotient
    };

    double operator()(double y) const {
        double out = 0.0;
        if (!interpolate(grid, values.data(), y, out))
            throw InterpolationOutOfRange("y = " + std::to_string(y) + " outside tabulated range [" +
                                          std::to_string(grid.lo) + ", " + std::to_string(grid.hi) + "]");
        return out;
    }

    NodeDerivatives at_node(std::size_t j) const {
        if (j == 0 || j + 1 >= values.size())
            throw DerivativeUnavailable("difference quotients need an interior node");
        const double h = grid.step();
        NodeDerivatives d;
        d.left = (values[j] - values[j - 1]) / h;
        d.right = (values[j + 1] - values[j]) / h;
        d.first = (values[j + 1] - values[j - 1]) / (2.0 * h);
        d.second = (values[j + 1] - 2.0 * values[j] + values[j - 1]) / (h * h);
        return d;
    }

    /// Index of the node at `y`, or npos when `y` is not a node.
    std::size_t node_index(double y) const {
        const double pos = (y - grid.lo) / grid.step();
        const double r = std::round(pos);
        if (r < 0 || r > static_cast<double>(values.size() - 1) || std::fabs(pos - r) > 1e-9) return npos;
        return static_cast<std::size_t>(r);
    }

    static constexpr std::size_t npos = static_cast<std::size_t>(-1);
};

/// Candidate function h (or payoff phi). Symbolic functions carry exact
/// first and second derivative trees; kinks (abs/max/min) make them merely
/// continuous.
class ScalarFunction {
public:
    ScalarFunction() = default;

    static ScalarFunction symbolic(std::string_view source, std::string var = "y") {
        auto g = expr::scalar_grammar(var);
        if (source.find_first_not_of(" \t\r\n") == std::string_view::npos) throw SyntaxError(0, "empty expression");
        return from_expr(expr::parse(source, g), std::move(var));
    }

    static ScalarFunction from_expr(expr::Expr e, std::string var = "y") {
        check_denominators(e, var);
        Symbolic s;
        s.ast = std::move(e);
        s.var = std::move(var);
        s.d1_ast = expr::derivative(s.ast);
        s.d2_ast = expr::derivative(s.d1_ast);
        s.f = expr::Program(s.ast);
        s.d1 = expr::Program(s.d1_ast);
        s.d2 = expr::Program(s.d2_ast);
        ScalarFunction out;
        out.smooth_ = expr::is_smooth(s.ast) ? Smoothness::c2 : Smoothness::continuous;
        out.repr_ = std::make_shared<const Symbolic>(std::move(s));
        return out;
    }

    static ScalarFunction tabulated(UniformGrid grid, std::vector<double> values) {
        if (grid.count < 3 || values.size() != grid.count) throw InputError("TableError", "table needs >= 3 nodes matching the grid");
        if (!(grid.hi > grid.lo)) throw InputError("TableError", "table grid must be strictly increasing");
        for (double v : values)
            if (!std::isfinite(v)) throw InputError("TableError", "table values must be finite");
        ScalarFunction out;
        out.smooth_ = Smoothness::continuous;
        out.repr_ = std::make_shared<const Tabulated>(Tabulated{grid, std::move(values)});
        return out;
    }

    /// Builds a table from (y, value) rows; the y column must be uniform.
    static ScalarFunction from_rows(const std::vector<double>& ys, std::vector<double> values) {
        if (ys.size() < 3 || ys.size() != values.size()) throw InputError("TableError", "table needs >= 3 rows");
        const double h = (ys.back() - ys.front()) / static_cast<double>(ys.size() - 1);
        if (!(h > 0)) throw InputError("TableError", "table grid must be strictly increasing");
        for (std::size_t i = 0; i < ys.size(); ++i) {
            if (i > 0 && !(ys[i] > ys[i - 1])) throw InputError("TableError", "table grid must be strictly increasing");
            if (std::fabs(ys[i] - (ys.front() + h * static_cast<double>(i))) > 1e-9 * (1.0 + std::fabs(ys[i])))
                throw InputError("TableError", "table grid must be uniform");
        }
        return tabulated(UniformGrid{ys.front(), ys.back(), ys.size()}, std::move(values));
    }

    bool valid() const { return !std::holds_alternative<std::monostate>(repr_); }
    bool is_symbolic() const { return sym() != nullptr; }
    Smoothness smoothness() const { return smooth_; }

    double operator()(double y) const {
        if (auto s = sym()) return s->f(0.0, y, {});
        return tab()(y);
    }

    double d1(double y) const { return need_sym().d1(0.0, y, {}); }
    double d2(double y) const { return need_sym().d2(0.0, y, {}); }

    const expr::Expr& ast() const { return need_sym().ast; }
    const expr::Expr& d1_ast() const { return need_sym().d1_ast; }
    const expr::Expr& d2_ast() const { return need_sym().d2_ast; }
    const std::string& variable() const { return need_sym().var; }

    const Tabulated& table() const {
        if (auto t = std::get_if<std::shared_ptr<const Tabulated>>(&repr_)) return **t;
        throw PreconditionFailed("function is not tabulated");
    }

    ScalarFunction tabulate(const UniformGrid& grid) const {
        std::vector<double> v(grid.count);
        for (std::size_t i = 0; i < grid.count; ++i) v[i] = (*this)(grid[i]);
        return tabulated(grid, std::move(v));
    }

    std::string describe() const {
        if (auto s = sym()) return expr::to_string(s->ast, expr::scalar_grammar(s->var));
        const auto& t = tab();
        return "table[" + std::to_string(t.grid.count) + " nodes on [" + expr::detail::format_number(t.grid.lo) +
               ", " + expr::detail::format_number(t.grid.hi) + "]]";
    }

private:
    struct Symbolic {
        expr::Expr ast, d1_ast, d2_ast;
        std::string var;
        expr::Program f, d1, d2;
    };

    using Repr = std::variant<std::monostate, std::shared_ptr<const Symbolic>, std::shared_ptr<const Tabulated>>;

    const Symbolic* sym() const {
        if (auto p = std::get_if<std::shared_ptr<const Symbolic>>(&repr_)) return p->get();
        return nullptr;
    }
    const Symbolic& need_sym() const {
        if (auto s = sym()) return *s;
        throw PreconditionFailed("function is not symbolic");
    }
    const Tabulated& tab() const {
        if (auto t = std::get_if<std::shared_ptr<const Tabulated>>(&repr_)) return **t;
        throw PreconditionFailed("function is empty");
    }

    static void check_denominators(const expr::Expr& e, const std::string& var) {
        std::vector<expr::Expr> dens;
        expr::collect_denominators(e, dens);
        for (const auto& den : dens) {
            expr::Program p(den);
            bool pos = false, negative = false, zero = false;
            for (std::size_t i = 0; i < 2001; ++i) {
                const double v = p(0.0, grid_node(-10.0, 10.0, i, 2001), {});
                if (v == 0.0 || !std::isfinite(v)) zero = true;
                else if (v > 0) pos = true;
                else negative = true;
            }
            if (zero || (pos && negative))
                throw DivisionHazard("denominator '" + expr::to_string(den, expr::scalar_grammar(var)) +
                                     "' can vanish on the validation grid");
        }
    }

    Repr repr_;
    Smoothness smooth_ = Smoothness::c2;
};

inline ScalarFunction identity_function() { return ScalarFunction::symbolic("y"); }

} // namespace gconvex
