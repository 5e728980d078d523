#include "fracdiff/expr.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <numbers>
#include <sstream>

namespace fracdiff {

struct Expression::Node {
    enum Kind { Number, Variable, Neg, Add, Sub, Mul, Div, Pow, Call } kind;
    double value = 0.0;
    std::size_t slot = 0;
    std::string fn;
    std::vector<std::shared_ptr<const Node>> args;
};

namespace {

using NodePtr = std::shared_ptr<const Expression::Node>;
using Node = Expression::Node;

struct FunctionInfo {
    const char* name;
    std::size_t arity;
};

constexpr FunctionInfo kFunctions[] = {{"sin", 1},  {"cos", 1}, {"tan", 1}, {"exp", 1},  {"log", 1},
                                       {"sqrt", 1}, {"abs", 1}, {"bump", 1}, {"ind", 1}, {"min", 2},
                                       {"max", 2},  {"pow", 2}};

class Parser {
public:
    Parser(const std::string& s, const std::vector<std::string>& vars) : s_(s), vars_(vars) {}

    NodePtr parse() {
        skip();
        if (pos_ >= s_.size()) fail(pos_, "empty expression");
        NodePtr n = expr();
        skip();
        if (pos_ < s_.size()) fail(pos_, std::string("unexpected '") + s_[pos_] + "'");
        return n;
    }

private:
    const std::string& s_;
    const std::vector<std::string>& vars_;
    std::size_t pos_ = 0;

    [[noreturn]] void fail(std::size_t at, const std::string& msg) const {
        std::ostringstream os;
        os << "column " << at + 1 << ": " << msg;
        throw ExprError(static_cast<int>(at + 1), os.str());
    }

    void skip() {
        while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    }

    bool accept(char c) {
        skip();
        if (pos_ < s_.size() && s_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    static NodePtr make(Node::Kind k, std::vector<NodePtr> args) {
        auto n = std::make_shared<Node>();
        n->kind = k;
        n->args = std::move(args);
        return n;
    }

    NodePtr expr() {
        NodePtr lhs = term();
        for (;;) {
            if (accept('+')) lhs = make(Node::Add, {lhs, term()});
            else if (accept('-')) lhs = make(Node::Sub, {lhs, term()});
            else return lhs;
        }
    }

    NodePtr term() {
        NodePtr lhs = unary();
        for (;;) {
            if (accept('*')) lhs = make(Node::Mul, {lhs, unary()});
            else if (accept('/')) lhs = make(Node::Div, {lhs, unary()});
            else return lhs;
        }
    }

    NodePtr unary() {
        if (accept('-')) return make(Node::Neg, {unary()});
        if (accept('+')) return unary();
        return power();
    }

    NodePtr power() {
        NodePtr base = primary();
        if (accept('^')) return make(Node::Pow, {base, unary()});
        return base;
    }

    NodePtr primary() {
        skip();
        if (pos_ >= s_.size()) fail(pos_, "unexpected end of expression");
        const char c = s_[pos_];
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
            const char* begin = s_.c_str() + pos_;
            char* end = nullptr;
            const double v = std::strtod(begin, &end);
            if (end == begin) fail(pos_, "malformed number");
            pos_ += static_cast<std::size_t>(end - begin);
            auto n = std::make_shared<Node>();
            n->kind = Node::Number;
            n->value = v;
            return n;
        }
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            const std::size_t start = pos_;
            while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_')) ++pos_;
            const std::string id = s_.substr(start, pos_ - start);
            skip();
            if (pos_ < s_.size() && s_[pos_] == '(') {
                ++pos_;
                const FunctionInfo* info = nullptr;
                for (const auto& f : kFunctions)
                    if (id == f.name) info = &f;
                if (!info) fail(start, "unknown function '" + id + "'");
                std::vector<NodePtr> args;
                if (!accept(')')) {
                    do args.push_back(expr());
                    while (accept(','));
                    if (!accept(')')) fail(pos_, "expected ')'");
                }
                if (args.size() != info->arity) {
                    std::ostringstream os;
                    os << "function '" << id << "' takes " << info->arity << " argument(s)";
                    fail(start, os.str());
                }
                auto n = std::make_shared<Node>();
                n->kind = Node::Call;
                n->fn = id;
                n->args = std::move(args);
                return n;
            }
            for (std::size_t k = 0; k < vars_.size(); ++k)
                if (vars_[k] == id) {
                    auto n = std::make_shared<Node>();
                    n->kind = Node::Variable;
                    n->slot = k;
                    return n;
                }
            if (id == "pi" || id == "e") {
                auto n = std::make_shared<Node>();
                n->kind = Node::Number;
                n->value = id == "pi" ? std::numbers::pi : std::numbers::e;
                return n;
            }
            std::string allowed;
            for (const auto& v : vars_) allowed += (allowed.empty() ? "" : ", ") + v;
            fail(start, "unknown variable '" + id + "' (allowed: " + (allowed.empty() ? "none" : allowed) + ")");
        }
        if (accept('(')) {
            NodePtr n = expr();
            if (!accept(')')) fail(pos_, "expected ')'");
            return n;
        }
        fail(pos_, std::string("unexpected '") + c + "'");
    }
};

double eval(const Node& n, const std::vector<double>& v) {
    switch (n.kind) {
        case Node::Number: return n.value;
        case Node::Variable: return v[n.slot];
        case Node::Neg: return -eval(*n.args[0], v);
        case Node::Add: return eval(*n.args[0], v) + eval(*n.args[1], v);
        case Node::Sub: return eval(*n.args[0], v) - eval(*n.args[1], v);
        case Node::Mul: return eval(*n.args[0], v) * eval(*n.args[1], v);
        case Node::Div: return eval(*n.args[0], v) / eval(*n.args[1], v);
        case Node::Pow: return std::pow(eval(*n.args[0], v), eval(*n.args[1], v));
        case Node::Call: break;
    }
    const double a = eval(*n.args[0], v);
    const std::string& f = n.fn;
    if (f == "sin") return std::sin(a);
    if (f == "cos") return std::cos(a);
    if (f == "tan") return std::tan(a);
    if (f == "exp") return std::exp(a);
    if (f == "log") return std::log(a);
    if (f == "sqrt") return std::sqrt(a);
    if (f == "abs") return std::abs(a);
    if (f == "bump") return std::abs(a) < 1.0 ? std::exp(1.0 - 1.0 / (1.0 - a * a)) : 0.0;
    if (f == "ind") return std::abs(a) < 1.0 ? 1.0 : 0.0;
    const double b = eval(*n.args[1], v);
    if (f == "min") return std::min(a, b);
    if (f == "max") return std::max(a, b);
    return std::pow(a, b);
}

}  // namespace

Expression::Expression() = default;

Expression Expression::parse(const std::string& text, const std::vector<std::string>& variables) {
    Expression e;
    e.text_ = text;
    e.arity_ = variables.size();
    e.root_ = Parser(text, variables).parse();
    return e;
}

double Expression::operator()(const std::vector<double>& values) const {
    if (!root_) throw ConfigError("empty expression evaluated");
    if (values.size() != arity_) throw ShapeError("expression evaluated with the wrong number of variables");
    return eval(*root_, values);
}

}  // namespace fracdiff
