#pragma once

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "varcert/errors.hpp"
#include "varcert/grid.hpp"
#include "varcert/rng.hpp"

namespace varcert {

/// Tiny arithmetic-expression evaluator for synthetic fields (ground-truth
/// controls, forcing terms). Grammar: floating-point literals, variables x
/// and y, the constant pi, functions sin/cos/exp/abs, operators + - * / ^
/// (power right-associative, binds tighter than unary minus), parentheses.
/// Parse errors carry the config key the expression came from, so the CLI
/// can name the offending field.
class Expression {
public:
    static Expression parse(const std::string& text, const std::string& key = "expression") {
        Expression e;
        Parser p{text, 0, e.nodes_, key};
        e.root_ = p.parse_expr();
        p.skip_ws();
        if (p.pos != text.size())
            throw config_error(key, "unexpected trailing input at position " +
                                        std::to_string(p.pos) + " in '" + text + "'");
        return e;
    }

    double eval(double x, double y = 0.0) const { return eval_node(root_, x, y); }

    bool uses_y() const {
        for (const Node& n : nodes_)
            if (n.op == Op::VarY) return true;
        return false;
    }

private:
    enum class Op { Const, VarX, VarY, Add, Sub, Mul, Div, Pow, Neg, Sin, Cos, Exp, Abs };

    struct Node {
        Op op;
        double value = 0.0;  // Const only
        int a = -1, b = -1;  // child indices
    };

    std::vector<Node> nodes_;
    int root_ = -1;

    double eval_node(int i, double x, double y) const {
        const Node& n = nodes_[static_cast<std::size_t>(i)];
        switch (n.op) {
            case Op::Const: return n.value;
            case Op::VarX: return x;
            case Op::VarY: return y;
            case Op::Add: return eval_node(n.a, x, y) + eval_node(n.b, x, y);
            case Op::Sub: return eval_node(n.a, x, y) - eval_node(n.b, x, y);
            case Op::Mul: return eval_node(n.a, x, y) * eval_node(n.b, x, y);
            case Op::Div: return eval_node(n.a, x, y) / eval_node(n.b, x, y);
            case Op::Pow: return std::pow(eval_node(n.a, x, y), eval_node(n.b, x, y));
            case Op::Neg: return -eval_node(n.a, x, y);
            case Op::Sin: return std::sin(eval_node(n.a, x, y));
            case Op::Cos: return std::cos(eval_node(n.a, x, y));
            case Op::Exp: return std::exp(eval_node(n.a, x, y));
            case Op::Abs: return std::abs(eval_node(n.a, x, y));
        }
        return 0.0;
    }

    struct Parser {
        const std::string& s;
        std::size_t pos;
        std::vector<Node>& nodes;
        const std::string& key;

        [[noreturn]] void fail(const std::string& what) const {
            throw config_error(key, what + " at position " + std::to_string(pos) + " in '" + s +
                                        "'");
        }

        void skip_ws() {
            while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
        }

        bool eat(char c) {
            skip_ws();
            if (pos < s.size() && s[pos] == c) {
                ++pos;
                return true;
            }
            return false;
        }

        int add(Node n) {
            nodes.push_back(n);
            return static_cast<int>(nodes.size() - 1);
        }

        // expr := term (('+'|'-') term)*
        int parse_expr() {
            int lhs = parse_term();
            for (;;) {
                if (eat('+'))
                    lhs = add({Op::Add, 0.0, lhs, parse_term()});
                else if (eat('-'))
                    lhs = add({Op::Sub, 0.0, lhs, parse_term()});
                else
                    return lhs;
            }
        }

        // term := unary (('*'|'/') unary)*
        int parse_term() {
            int lhs = parse_unary();
            for (;;) {
                if (eat('*'))
                    lhs = add({Op::Mul, 0.0, lhs, parse_unary()});
                else if (eat('/'))
                    lhs = add({Op::Div, 0.0, lhs, parse_unary()});
                else
                    return lhs;
            }
        }

        // unary := '-' unary | power; so -x^2 parses as -(x^2)
        int parse_unary() {
            if (eat('-')) return add({Op::Neg, 0.0, parse_unary(), -1});
            return parse_power();
        }

        // power := atom ['^' unary]  (right-associative, exponent may be signed)
        int parse_power() {
            int base = parse_atom();
            if (eat('^')) return add({Op::Pow, 0.0, base, parse_unary()});
            return base;
        }

        int parse_atom() {
            skip_ws();
            if (pos >= s.size()) fail("unexpected end of expression");
            const char c = s[pos];
            if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
                const char* begin = s.c_str() + pos;
                char* end = nullptr;
                const double v = std::strtod(begin, &end);
                if (end == begin) fail("malformed number");
                pos += static_cast<std::size_t>(end - begin);
                return add({Op::Const, v, -1, -1});
            }
            if (c == '(') {
                ++pos;
                const int inner = parse_expr();
                if (!eat(')')) fail("missing ')'");
                return inner;
            }
            if (std::isalpha(static_cast<unsigned char>(c))) {
                std::size_t end = pos;
                while (end < s.size() && std::isalpha(static_cast<unsigned char>(s[end]))) ++end;
                const std::string name = s.substr(pos, end - pos);
                pos = end;
                if (name == "x") return add({Op::VarX, 0.0, -1, -1});
                if (name == "y") return add({Op::VarY, 0.0, -1, -1});
                if (name == "pi") return add({Op::Const, 3.14159265358979323846, -1, -1});
                Op fn;
                if (name == "sin")
                    fn = Op::Sin;
                else if (name == "cos")
                    fn = Op::Cos;
                else if (name == "exp")
                    fn = Op::Exp;
                else if (name == "abs")
                    fn = Op::Abs;
                else
                    fail("unknown identifier '" + name + "'");
                if (!eat('(')) fail("function '" + name + "' needs '('");
                const int arg = parse_expr();
                if (!eat(')')) fail("missing ')'");
                return add({fn, 0.0, arg, -1});
            }
            fail(std::string("unexpected character '") + c + "'");
        }
    };
};

/// Evaluate an expression at every grid node. Rejects expressions that use y
/// on a 1-d grid and values that come out non-finite, naming the config key.
inline GridFunction synth_field(const Grid& g, const std::string& text, const std::string& key) {
    const Expression e = Expression::parse(text, key);
    if (g.dim() == 1 && e.uses_y())
        throw config_error(key, "expression uses variable y on a 1-d grid");
    GridFunction f(g);
    for (std::size_t i = 0; i < g.node_count(); ++i) {
        const Grid::Point pt = g.node(i);
        f[i] = e.eval(pt.x, pt.y);
        if (!std::isfinite(f[i]))
            throw config_error(key, "expression is non-finite at node " + std::to_string(i));
    }
    return f;
}

/// Salt-and-pepper corruption: a seeded tenth of the nodes (at least one)
/// gets +level or -level with equal probability. Sampling is without
/// replacement via a partial shuffle, so the subset is exactly that size.
inline void add_impulsive_noise(GridFunction& f, double level, Rng& rng) {
    if (level == 0.0) return;
    const std::size_t n = f.size();
    const std::size_t hits = std::max<std::size_t>(1, n / 10);
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    for (std::size_t k = 0; k < hits; ++k) {
        const std::size_t j = k + static_cast<std::size_t>(rng.uniform_index(n - k));
        std::swap(idx[k], idx[j]);
        f[idx[k]] += rng.uniform() < 0.5 ? -level : level;
    }
}

/// Independent uniform[-level, level) perturbation on every node.
inline void add_uniform_noise(GridFunction& f, double level, Rng& rng) {
    if (level == 0.0) return;
    for (std::size_t i = 0; i < f.size(); ++i) f[i] += rng.uniform(-level, level);
}

}  // namespace varcert
