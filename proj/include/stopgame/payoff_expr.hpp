#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace stopgame {

/// Built-in functions of the payoff language.
enum class Func { Max, Min, Exp, Log, Sqrt, Abs, Pos };

const char* func_name(Func f);
int func_arity(Func f);

/// Expression tree node. Trees are immutable once parsed.
struct ExprNode {
    enum class Kind { Number, Variable, Constant, Neg, Add, Sub, Mul, Div, Pow, Call };

    Kind kind = Kind::Number;
    double value = 0.0;   // Number literal, or bound value of a Constant
    std::string name;     // Constant name
    Func func = Func::Max;
    std::vector<std::shared_ptr<const ExprNode>> args;
};

using ExprPtr = std::shared_ptr<const ExprNode>;

/// Value and derivative with respect to x.
struct Dual {
    double v = 0.0;
    double d = 0.0;
};

/// A parsed payoff G(x) or H(x).
///
/// Grammar, loosest binding first:
///   expr  := term (('+' | '-') term)*
///   term  := unary (('*' | '/') unary)*
///   unary := '-' unary | power
///   power := atom ('^' unary)?          right associative
///   atom  := number | 'x' | name | name '(' args ')' | '(' expr ')'
///
/// Evaluation runs a compiled postfix program; domain errors throw
/// ErrorCode::EvalDomainError instead of producing NaN.
class PayoffExpr {
public:
    PayoffExpr() = default;

    const std::string& source() const { return source_; }
    const ExprPtr& root() const { return root_; }

    double eval(double x) const;
    Dual eval_dual(double x) const;
    double operator()(double x) const { return eval(x); }

    /// Fully parenthesized rendering that reparses to the same tree.
    std::string to_string() const;

    friend PayoffExpr parse(const std::string& source, const std::map<std::string, double>& constants);

    struct Instr {
        enum class Op { Push, LoadX, Neg, Add, Sub, Mul, Div, Pow, Call };
        Op op;
        double value = 0.0;
        Func func = Func::Max;
    };

private:
    std::string source_;
    ExprPtr root_;
    std::vector<Instr> program_;
};

PayoffExpr parse(const std::string& source, const std::map<std::string, double>& constants);

std::string to_string(const ExprPtr& node);

/// Structural equality (kinds, literals, names, functions, shape).
bool same_tree(const ExprPtr& a, const ExprPtr& b);

/// The payoff pair of a problem. H absent means a single-player stopping problem.
struct PayoffSpec {
    PayoffExpr G;
    std::optional<PayoffExpr> H;
    std::map<std::string, double> constants;
};

PayoffSpec make_payoff(const std::string& g, const std::optional<std::string>& h,
                       const std::map<std::string, double>& constants);

}  // namespace stopgame
