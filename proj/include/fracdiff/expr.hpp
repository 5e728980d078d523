#pragma once

#include "fracdiff/error.hpp"

#include <memory>
#include <string>
#include <vector>

namespace fracdiff {

/// Parse failure inside an expression; column is 1-based within the text.
class ExprError : public ConfigError {
public:
    ExprError(int column, const std::string& what) : ConfigError(what), column_(column) {}
    int column() const { return column_; }

private:
    int column_;
};

/// Arithmetic expression over named variables.
///
/// Grammar: numbers, the constants pi and e, variables, + - * / ^ (right
/// associative), unary minus, parentheses and the functions sin, cos, tan,
/// exp, log, sqrt, abs, min, max, pow, bump (exp(1 - 1/(1 - s^2)) on |s| < 1,
/// else 0) and ind (1 on |s| < 1, else 0).
class Expression {
public:
    Expression();
    static Expression parse(const std::string& text, const std::vector<std::string>& variables);

    /// Values in the order of the variable list given to parse.
    double operator()(const std::vector<double>& values) const;
    double operator()(double v) const { return (*this)(std::vector<double>{v}); }

    const std::string& text() const { return text_; }
    bool empty() const { return !root_; }

    struct Node;

private:
    std::string text_;
    std::size_t arity_ = 0;
    std::shared_ptr<const Node> root_;
};

}  // namespace fracdiff
