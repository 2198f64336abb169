#pragma once

#include <cctype>
#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace mse::expr {

// Arithmetic expression grammar for coefficient specs:
//   +, -, *, /, ^ (right-assoc), unary minus, parentheses,
//   functions sin cos exp tanh, constants pi and e,
//   variables t, x, y, z.

struct Node {
    enum Kind { Num, Var, Unary, Binary, Call } kind;
    double value = 0.0;
    int var = 0;  // 0:t 1:x 2:y 3:z
    char op = 0;
    std::string fn;
    std::unique_ptr<Node> a, b;
};

class Parser {
  public:
    explicit Parser(std::string src) : s_(std::move(src)) {}

    std::unique_ptr<Node> parse() {
        auto n = parse_sum();
        skip_ws();
        if (pos_ != s_.size()) fail("trailing input");
        return n;
    }

  private:
    std::string s_;
    std::size_t pos_ = 0;

    [[noreturn]] void fail(const std::string& what) {
        throw std::runtime_error("expr: " + what + " at offset " + std::to_string(pos_) + " in \"" + s_ + "\"");
    }

    void skip_ws() {
        while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) pos_++;
    }

    bool eat(char c) {
        skip_ws();
        if (pos_ < s_.size() && s_[pos_] == c) {
            pos_++;
            return true;
        }
        return false;
    }

    std::unique_ptr<Node> parse_sum() {
        auto lhs = parse_product();
        for (;;) {
            if (eat('+')) lhs = binary('+', std::move(lhs), parse_product());
            else if (eat('-')) lhs = binary('-', std::move(lhs), parse_product());
            else return lhs;
        }
    }

    std::unique_ptr<Node> parse_product() {
        auto lhs = parse_unary();
        for (;;) {
            if (eat('*')) lhs = binary('*', std::move(lhs), parse_unary());
            else if (eat('/')) lhs = binary('/', std::move(lhs), parse_unary());
            else return lhs;
        }
    }

    std::unique_ptr<Node> parse_unary() {
        if (eat('-')) {
            auto n = std::make_unique<Node>();
            n->kind = Node::Unary;
            n->a = parse_unary();
            return n;
        }
        (void)eat('+');
        return parse_power();
    }

    std::unique_ptr<Node> parse_power() {
        auto base = parse_atom();
        if (eat('^')) return binary('^', std::move(base), parse_unary());  // right-assoc
        return base;
    }

    std::unique_ptr<Node> parse_atom() {
        skip_ws();
        if (pos_ >= s_.size()) fail("unexpected end");
        char c = s_[pos_];
        if (c == '(') {
            pos_++;
            auto n = parse_sum();
            if (!eat(')')) fail("missing ')'");
            return n;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
        if (std::isalpha(static_cast<unsigned char>(c))) return parse_ident();
        fail("unexpected character");
    }

    std::unique_ptr<Node> parse_number() {
        std::size_t end = pos_;
        while (end < s_.size() &&
               (std::isdigit(static_cast<unsigned char>(s_[end])) || s_[end] == '.' || s_[end] == 'e' ||
                s_[end] == 'E' || ((s_[end] == '+' || s_[end] == '-') && (s_[end - 1] == 'e' || s_[end - 1] == 'E'))))
            end++;
        auto n = std::make_unique<Node>();
        n->kind = Node::Num;
        n->value = std::stod(s_.substr(pos_, end - pos_));
        pos_ = end;
        return n;
    }

    std::unique_ptr<Node> parse_ident() {
        std::size_t end = pos_;
        while (end < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[end])) || s_[end] == '_')) end++;
        std::string id = s_.substr(pos_, end - pos_);
        pos_ = end;
        auto n = std::make_unique<Node>();
        if (id == "pi") {
            n->kind = Node::Num;
            n->value = M_PI;
            return n;
        }
        if (id == "e") {
            n->kind = Node::Num;
            n->value = M_E;
            return n;
        }
        if (id == "t" || id == "x" || id == "y" || id == "z") {
            n->kind = Node::Var;
            n->var = id == "t" ? 0 : id == "x" ? 1 : id == "y" ? 2 : 3;
            return n;
        }
        if (id == "sin" || id == "cos" || id == "exp" || id == "tanh") {
            if (!eat('(')) fail("expected '(' after " + id);
            n->kind = Node::Call;
            n->fn = id;
            n->a = parse_sum();
            if (!eat(')')) fail("missing ')' in call");
            return n;
        }
        fail("unknown identifier '" + id + "'");
    }

    std::unique_ptr<Node> binary(char op, std::unique_ptr<Node> a, std::unique_ptr<Node> b) {
        auto n = std::make_unique<Node>();
        n->kind = Node::Binary;
        n->op = op;
        n->a = std::move(a);
        n->b = std::move(b);
        return n;
    }
};

inline double eval(const Node& n, double t, double x, double y, double z) {
    switch (n.kind) {
        case Node::Num: return n.value;
        case Node::Var: return n.var == 0 ? t : n.var == 1 ? x : n.var == 2 ? y : z;
        case Node::Unary: return -eval(*n.a, t, x, y, z);
        case Node::Binary: {
            double a = eval(*n.a, t, x, y, z), b = eval(*n.b, t, x, y, z);
            switch (n.op) {
                case '+': return a + b;
                case '-': return a - b;
                case '*': return a * b;
                case '/': return a / b;
                case '^': return std::pow(a, b);
            }
            return 0;
        }
        case Node::Call: {
            double a = eval(*n.a, t, x, y, z);
            if (n.fn == "sin") return std::sin(a);
            if (n.fn == "cos") return std::cos(a);
            if (n.fn == "exp") return std::exp(a);
            return std::tanh(a);
        }
    }
    return 0;
}

/// Compile an expression string into a callable f(t, x[]).
inline std::function<double(double, const double*)> compile(const std::string& src) {
    auto root = std::shared_ptr<Node>(Parser(src).parse().release());
    return [root](double t, const double* x) { return eval(*root, t, x[0], x[1], x[2]); };
}

}  // namespace mse::expr
