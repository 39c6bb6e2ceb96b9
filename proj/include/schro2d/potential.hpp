#ifndef SCHRO2D_POTENTIAL_HPP
#define SCHRO2D_POTENTIAL_HPP

#include <cctype>
#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "schro2d/mesh.hpp"

namespace schro2d {

/// Expression AST over variables {t,x,y}, constants, +,-,*,/,^ and the
/// functions sin, cos, exp, sqrt, abs. Real-valued by contract.
class PotentialExpr {
    struct Node;
    using NodePtr = std::shared_ptr<const Node>;
    struct Node {
        enum class Kind { Const, Var, Unary, Binary, Call } kind;
        double value = 0.0;   // Const
        char var = 0;         // Var: 't','x','y'
        char op = 0;          // Unary: '-', Binary: '+','-','*','/','^'
        std::string func;     // Call
        NodePtr a, b;
    };

public:
    PotentialExpr() = default;

    static PotentialExpr parse(const std::string& text) {
        Parser p(text);
        PotentialExpr e;
        e.root_ = p.parse_expr();
        p.skip_ws();
        if (!p.at_end()) throw ParseError(p.pos(), "unexpected trailing input");
        e.source_ = text;
        return e;
    }

    double operator()(double t, double x, double y) const {
        if (!root_) throw EvalError("empty potential expression");
        return eval(*root_, t, x, y);
    }

    /// True when the expression does not reference t.
    bool time_independent() const { return root_ && !uses_var(*root_, 't'); }

    /// True when the expression references no variable at all.
    bool constant() const { return root_ && !uses_var(*root_, 't') && !uses_var(*root_, 'x') && !uses_var(*root_, 'y'); }

    bool empty() const { return !root_; }
    const std::string& source() const { return source_; }

    std::string pretty_print() const { return root_ ? print(*root_) : std::string(); }

private:
    NodePtr root_;
    std::string source_;

    static double eval(const Node& n, double t, double x, double y) {
        switch (n.kind) {
        case Node::Kind::Const: return n.value;
        case Node::Kind::Var: return n.var == 't' ? t : (n.var == 'x' ? x : y);
        case Node::Kind::Unary: return -eval(*n.a, t, x, y);
        case Node::Kind::Binary: {
            const double u = eval(*n.a, t, x, y), v = eval(*n.b, t, x, y);
            switch (n.op) {
            case '+': return u + v;
            case '-': return u - v;
            case '*': return u * v;
            case '/': return u / v;
            default: return std::pow(u, v);
            }
        }
        case Node::Kind::Call: {
            const double u = eval(*n.a, t, x, y);
            if (n.func == "sin") return std::sin(u);
            if (n.func == "cos") return std::cos(u);
            if (n.func == "exp") return std::exp(u);
            if (n.func == "sqrt") return std::sqrt(u);
            return std::abs(u);
        }
        }
        return 0.0;
    }

    static bool uses_var(const Node& n, char v) {
        switch (n.kind) {
        case Node::Kind::Const: return false;
        case Node::Kind::Var: return n.var == v;
        case Node::Kind::Unary: return uses_var(*n.a, v);
        case Node::Kind::Binary: return uses_var(*n.a, v) || uses_var(*n.b, v);
        case Node::Kind::Call: return uses_var(*n.a, v);
        }
        return false;
    }

    static std::string print(const Node& n) {
        switch (n.kind) {
        case Node::Kind::Const: {
            char buf[64];
            std::snprintf(buf, sizeof(buf), "%.17g", n.value);
            return buf;
        }
        case Node::Kind::Var: return std::string(1, n.var);
        case Node::Kind::Unary: return "(-" + print(*n.a) + ")";
        case Node::Kind::Binary: return "(" + print(*n.a) + std::string(1, n.op) + print(*n.b) + ")";
        case Node::Kind::Call: return n.func + "(" + print(*n.a) + ")";
        }
        return {};
    }

    class Parser {
    public:
        explicit Parser(const std::string& s) : s_(s) {
            if (s_.empty()) throw ParseError(0, "empty expression");
        }
        std::size_t pos() const { return i_; }
        bool at_end() const { return i_ >= s_.size(); }
        void skip_ws() {
            while (i_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[i_]))) ++i_;
        }

        NodePtr parse_expr() { // + and -, left associative
            NodePtr lhs = parse_term();
            for (;;) {
                skip_ws();
                if (!at_end() && (s_[i_] == '+' || s_[i_] == '-')) {
                    const char op = s_[i_++];
                    lhs = binary(op, lhs, parse_term());
                } else {
                    return lhs;
                }
            }
        }

    private:
        NodePtr parse_term() { // * and /
            NodePtr lhs = parse_unary();
            for (;;) {
                skip_ws();
                if (!at_end() && (s_[i_] == '*' || s_[i_] == '/')) {
                    const char op = s_[i_++];
                    lhs = binary(op, lhs, parse_unary());
                } else {
                    return lhs;
                }
            }
        }

        NodePtr parse_unary() {
            skip_ws();
            if (!at_end() && s_[i_] == '-') {
                ++i_;
                auto n = std::make_shared<Node>();
                n->kind = Node::Kind::Unary;
                n->op = '-';
                n->a = parse_unary();
                return n;
            }
            return parse_power();
        }

        NodePtr parse_power() { // ^ binds tighter than unary minus, left associative
            NodePtr lhs = parse_atom();
            for (;;) {
                skip_ws();
                if (!at_end() && s_[i_] == '^') {
                    ++i_;
                    skip_ws();
                    NodePtr rhs;
                    if (!at_end() && s_[i_] == '-') { // allow a signed exponent
                        ++i_;
                        auto neg = std::make_shared<Node>();
                        neg->kind = Node::Kind::Unary;
                        neg->op = '-';
                        neg->a = parse_atom();
                        rhs = neg;
                    } else {
                        rhs = parse_atom();
                    }
                    lhs = binary('^', lhs, rhs);
                } else {
                    return lhs;
                }
            }
        }

        NodePtr parse_atom() {
            skip_ws();
            if (at_end()) throw ParseError(i_, "unexpected end of expression");
            const char c = s_[i_];
            if (c == '(') {
                ++i_;
                NodePtr inner = parse_expr();
                skip_ws();
                if (at_end() || s_[i_] != ')') throw ParseError(i_, "expected ')'");
                ++i_;
                return inner;
            }
            if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
            if (std::isalpha(static_cast<unsigned char>(c))) return parse_ident();
            throw ParseError(i_, std::string("unexpected character '") + c + "'");
        }

        NodePtr parse_number() {
            std::size_t start = i_;
            while (i_ < s_.size() && (std::isdigit(static_cast<unsigned char>(s_[i_])) || s_[i_] == '.')) ++i_;
            if (i_ < s_.size() && (s_[i_] == 'e' || s_[i_] == 'E')) {
                std::size_t save = i_;
                ++i_;
                if (i_ < s_.size() && (s_[i_] == '+' || s_[i_] == '-')) ++i_;
                if (i_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[i_]))) {
                    while (i_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[i_]))) ++i_;
                } else {
                    i_ = save;
                }
            }
            try {
                auto n = std::make_shared<Node>();
                n->kind = Node::Kind::Const;
                n->value = std::stod(s_.substr(start, i_ - start));
                return n;
            } catch (const std::exception&) {
                throw ParseError(start, "malformed number");
            }
        }

        NodePtr parse_ident() {
            std::size_t start = i_;
            while (i_ < s_.size() && std::isalnum(static_cast<unsigned char>(s_[i_]))) ++i_;
            const std::string name = s_.substr(start, i_ - start);
            if (name == "t" || name == "x" || name == "y") {
                auto n = std::make_shared<Node>();
                n->kind = Node::Kind::Var;
                n->var = name[0];
                return n;
            }
            if (name == "pi") {
                auto n = std::make_shared<Node>();
                n->kind = Node::Kind::Const;
                n->value = 3.14159265358979323846;
                return n;
            }
            if (name == "sin" || name == "cos" || name == "exp" || name == "sqrt" || name == "abs") {
                skip_ws();
                if (at_end() || s_[i_] != '(') throw ParseError(i_, "expected '(' after function name");
                ++i_;
                auto n = std::make_shared<Node>();
                n->kind = Node::Kind::Call;
                n->func = name;
                n->a = parse_expr();
                skip_ws();
                if (at_end() || s_[i_] != ')') throw ParseError(i_, "expected ')'");
                ++i_;
                return n;
            }
            throw ParseError(start, "unknown identifier '" + name + "'");
        }

        static NodePtr binary(char op, NodePtr a, NodePtr b) {
            auto n = std::make_shared<Node>();
            n->kind = Node::Kind::Binary;
            n->op = op;
            n->a = std::move(a);
            n->b = std::move(b);
            return n;
        }

        const std::string& s_;
        std::size_t i_ = 0;
    };
};

inline PotentialExpr parse_potential(const std::string& text) { return PotentialExpr::parse(text); }

/// Nodal values of W_n = (V_n + V_{n-1})/2 on subdomain j at time step n.
struct AveragedPotential {
    Index time_index = 0;
    bool time_independent = false;
    std::vector<double> values; // y-fastest nodal ordering
};

inline AveragedPotential sample_W(const PotentialExpr& V, const DecompositionPlan& plan, Index j, Index n) {
    if (n < 1 || n > plan.N_T) throw BadConfig("sample_W: time index out of range");
    AveragedPotential w;
    w.time_index = n;
    w.time_independent = V.time_independent();
    w.values.resize(plan.nodes());
    const double t0 = static_cast<double>(n - 1) * plan.dt;
    const double t1 = static_cast<double>(n) * plan.dt;
    const double aj = plan.a(j);
    for (Index ix = 0; ix < plan.N_x; ++ix) {
        const double x = aj + static_cast<double>(ix) * plan.dx;
        for (Index iy = 0; iy < plan.N_y; ++iy) {
            const double y = plan.y_b + static_cast<double>(iy) * plan.dy;
            const double v = w.time_independent ? V(t1, x, y) : 0.5 * (V(t1, x, y) + V(t0, x, y));
            if (!std::isfinite(v)) throw EvalError("potential evaluates to a non-finite value");
            w.values[ix * plan.N_y + iy] = v;
        }
    }
    return w;
}

} // namespace schro2d

#endif
