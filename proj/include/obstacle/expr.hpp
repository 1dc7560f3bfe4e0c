#pragma once

// Arithmetic expressions over the node coordinates, used by the config
// files: + - * / ^ (right-associative), unary minus, parentheses, the
// functions sin cos exp abs min max, the constants pi e and the variables
// x, y, r.

#include "obstacle/errors.hpp"
#include "obstacle/grid.hpp"

#include <cctype>
#include <cmath>
#include <memory>
#include <numbers>
#include <string>
#include <vector>

namespace obstacle {

class Expression {
public:
    /// Parses `text`; throws DomainError with the offending position.
    static Expression parse(const std::string& text) {
        Parser p{text, 0};
        Expression e;
        e.root_ = p.sum();
        p.skip();
        if (p.pos != text.size()) p.fail("unexpected '" + std::string(1, text[p.pos]) + "'");
        e.text_ = text;
        return e;
    }

    /// Value at (x, y) with r the distance to the origin, or x itself on the
    /// radial grid, where x is the radius.
    double operator()(double x, double y, double r) const { return root_->eval(x, y, r); }

    double operator()(const Point& p, GridKind kind) const {
        const double r = kind == GridKind::radial_disc ? p.x : std::hypot(p.x, p.y);
        return (*this)(p.x, p.y, r);
    }

    Field field(GridKind kind) const {
        return [e = *this, kind](const Point& p) { return e(p, kind); };
    }

    GridFn sample(const Grid& g) const { return GridFn::sample(g, field(g.kind())); }

    const std::string& text() const { return text_; }

private:
    struct Node {
        enum class Op { number, var_x, var_y, var_r, neg, add, sub, mul, div, pow, sin, cos, exp, abs, min, max } op;
        double value = 0.0;
        std::shared_ptr<const Node> a, b;

        double eval(double x, double y, double r) const {
            switch (op) {
            case Op::number: return value;
            case Op::var_x: return x;
            case Op::var_y: return y;
            case Op::var_r: return r;
            case Op::neg: return -a->eval(x, y, r);
            case Op::add: return a->eval(x, y, r) + b->eval(x, y, r);
            case Op::sub: return a->eval(x, y, r) - b->eval(x, y, r);
            case Op::mul: return a->eval(x, y, r) * b->eval(x, y, r);
            case Op::div: return a->eval(x, y, r) / b->eval(x, y, r);
            case Op::pow: return std::pow(a->eval(x, y, r), b->eval(x, y, r));
            case Op::sin: return std::sin(a->eval(x, y, r));
            case Op::cos: return std::cos(a->eval(x, y, r));
            case Op::exp: return std::exp(a->eval(x, y, r));
            case Op::abs: return std::abs(a->eval(x, y, r));
            case Op::min: return std::min(a->eval(x, y, r), b->eval(x, y, r));
            case Op::max: return std::max(a->eval(x, y, r), b->eval(x, y, r));
            }
            return 0.0;
        }
    };
    using Ptr = std::shared_ptr<const Node>;
    using Op = Node::Op;

    static Ptr make(Op op, Ptr a = nullptr, Ptr b = nullptr, double v = 0.0) {
        return std::make_shared<const Node>(Node{op, v, std::move(a), std::move(b)});
    }

    struct Parser {
        const std::string& s;
        std::size_t pos;

        [[noreturn]] void fail(const std::string& what) const {
            throw DomainError("expression \"" + s + "\" at position " + std::to_string(pos) + ": " + what);
        }
        void skip() {
            while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
        }
        bool eat(char c) {
            skip();
            if (pos < s.size() && s[pos] == c) {
                ++pos;
                return true;
            }
            return false;
        }
        void expect(char c) {
            if (!eat(c)) fail(std::string("expected '") + c + "'");
        }

        Ptr sum() {
            Ptr left = product();
            for (;;) {
                if (eat('+')) left = make(Op::add, left, product());
                else if (eat('-')) left = make(Op::sub, left, product());
                else return left;
            }
        }
        Ptr product() {
            Ptr left = unary();
            for (;;) {
                if (eat('*')) left = make(Op::mul, left, unary());
                else if (eat('/')) left = make(Op::div, left, unary());
                else return left;
            }
        }
        // Unary minus binds looser than ^, so -x^2 = -(x^2).
        Ptr unary() {
            if (eat('-')) return make(Op::neg, unary());
            if (eat('+')) return unary();
            return power();
        }
        Ptr power() {
            Ptr base = atom();
            if (eat('^')) return make(Op::pow, base, unary());
            return base;
        }
        Ptr atom() {
            skip();
            if (pos >= s.size()) fail("unexpected end");
            const char c = s[pos];
            if (c == '(') {
                ++pos;
                Ptr e = sum();
                expect(')');
                return e;
            }
            if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
                std::size_t used = 0;
                double v = 0.0;
                try {
                    v = std::stod(s.substr(pos), &used);
                } catch (const std::exception&) {
                    fail("malformed number");
                }
                pos += used;
                return make(Op::number, nullptr, nullptr, v);
            }
            if (std::isalpha(static_cast<unsigned char>(c))) {
                const std::size_t start = pos;
                while (pos < s.size() && std::isalnum(static_cast<unsigned char>(s[pos]))) ++pos;
                const std::string name = s.substr(start, pos - start);
                if (name == "x") return make(Op::var_x);
                if (name == "y") return make(Op::var_y);
                if (name == "r") return make(Op::var_r);
                if (name == "pi") return make(Op::number, nullptr, nullptr, std::numbers::pi);
                if (name == "e") return make(Op::number, nullptr, nullptr, std::numbers::e);
                const std::vector<std::pair<std::string, Op>> unary_fns{{"sin", Op::sin}, {"cos", Op::cos}, {"exp", Op::exp}, {"abs", Op::abs}};
                for (const auto& [fn, op] : unary_fns) {
                    if (name == fn) {
                        expect('(');
                        Ptr a = sum();
                        expect(')');
                        return make(op, a);
                    }
                }
                if (name == "min" || name == "max") {
                    expect('(');
                    Ptr a = sum();
                    expect(',');
                    Ptr b = sum();
                    expect(')');
                    return make(name == "min" ? Op::min : Op::max, a, b);
                }
                pos = start;
                fail("unknown name '" + name + "'");
            }
            fail("unexpected '" + std::string(1, c) + "'");
        }
    };

    Ptr root_;
    std::string text_;
};

}  // namespace obstacle
