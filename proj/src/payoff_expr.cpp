#include "stopgame/payoff_expr.hpp"

#include "stopgame/error.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <sstream>

namespace stopgame {

const char* func_name(Func f) {
    switch (f) {
        case Func::Max: return "max";
        case Func::Min: return "min";
        case Func::Exp: return "exp";
        case Func::Log: return "log";
        case Func::Sqrt: return "sqrt";
        case Func::Abs: return "abs";
        case Func::Pos: return "pos";
    }
    return "?";
}

int func_arity(Func f) { return (f == Func::Max || f == Func::Min) ? 2 : 1; }

namespace {

std::optional<Func> lookup_func(const std::string& name) {
    for (Func f : {Func::Max, Func::Min, Func::Exp, Func::Log, Func::Sqrt, Func::Abs, Func::Pos}) {
        if (name == func_name(f)) return f;
    }
    return std::nullopt;
}

std::string fmt_num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

ExprPtr make(ExprNode::Kind kind, std::vector<ExprPtr> args = {}) {
    auto n = std::make_shared<ExprNode>();
    n->kind = kind;
    n->args = std::move(args);
    return n;
}

class Parser {
public:
    Parser(const std::string& src, const std::map<std::string, double>& constants)
        : src_(src), constants_(constants) {}

    ExprPtr run() {
        ExprPtr e = expr();
        skip_ws();
        if (pos_ != src_.size()) fail("operator or end of input");
        return e;
    }

private:
    const std::string& src_;
    const std::map<std::string, double>& constants_;
    std::size_t pos_ = 0;

    [[noreturn]] void fail(const std::string& expected) const {
        std::ostringstream os;
        os << "at position " << pos_ << " in \"" << src_ << "\": expected " << expected;
        throw Error(ErrorCode::SyntaxError, os.str());
    }

    void skip_ws() {
        while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
    }

    char peek() {
        skip_ws();
        return pos_ < src_.size() ? src_[pos_] : '\0';
    }

    bool accept(char c) {
        if (peek() == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    ExprPtr expr() {
        ExprPtr lhs = term();
        for (;;) {
            if (accept('+')) lhs = make(ExprNode::Kind::Add, {lhs, term()});
            else if (accept('-')) lhs = make(ExprNode::Kind::Sub, {lhs, term()});
            else return lhs;
        }
    }

    ExprPtr term() {
        ExprPtr lhs = unary();
        for (;;) {
            if (accept('*')) lhs = make(ExprNode::Kind::Mul, {lhs, unary()});
            else if (accept('/')) lhs = make(ExprNode::Kind::Div, {lhs, unary()});
            else return lhs;
        }
    }

    ExprPtr unary() {
        if (accept('-')) return make(ExprNode::Kind::Neg, {unary()});
        return power();
    }

    ExprPtr power() {
        ExprPtr base = atom();
        if (accept('^')) return make(ExprNode::Kind::Pow, {base, unary()});
        return base;
    }

    ExprPtr atom() {
        char c = peek();
        if (c == '(') {
            ++pos_;
            ExprPtr e = expr();
            if (!accept(')')) fail("')'");
            return e;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return identifier();
        fail("number, identifier or '('");
    }

    ExprPtr number() {
        const char* begin = src_.c_str() + pos_;
        char* end = nullptr;
        double v = std::strtod(begin, &end);
        if (end == begin) fail("number");
        pos_ += static_cast<std::size_t>(end - begin);
        auto n = std::make_shared<ExprNode>();
        n->kind = ExprNode::Kind::Number;
        n->value = v;
        return n;
    }

    ExprPtr identifier() {
        std::size_t start = pos_;
        while (pos_ < src_.size() &&
               (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
            ++pos_;
        std::string name = src_.substr(start, pos_ - start);

        if (peek() == '(') {
            auto f = lookup_func(name);
            if (!f) {
                throw Error(ErrorCode::UnknownIdentifier,
                            "function '" + name + "' at position " + std::to_string(start));
            }
            ++pos_;
            std::vector<ExprPtr> args;
            if (peek() != ')') {
                args.push_back(expr());
                while (accept(',')) {
                    if (peek() == ')') break;  // dangling comma: report as arity
                    args.push_back(expr());
                }
            }
            if (!accept(')')) fail("',' or ')'");
            if (static_cast<int>(args.size()) != func_arity(*f)) {
                throw Error(ErrorCode::ArityMismatch,
                            std::string(func_name(*f)) + " got " + std::to_string(args.size()) +
                                " argument(s), want " + std::to_string(func_arity(*f)));
            }
            auto n = make(ExprNode::Kind::Call, std::move(args));
            std::const_pointer_cast<ExprNode>(n)->func = *f;
            return n;
        }
        if (name == "x") return make(ExprNode::Kind::Variable);
        auto it = constants_.find(name);
        if (it == constants_.end()) {
            throw Error(ErrorCode::UnknownIdentifier,
                        "'" + name + "' at position " + std::to_string(start));
        }
        auto n = std::make_shared<ExprNode>();
        n->kind = ExprNode::Kind::Constant;
        n->name = name;
        n->value = it->second;
        return n;
    }
};

void compile(const ExprPtr& n, std::vector<PayoffExpr::Instr>& out) {
    using K = ExprNode::Kind;
    using Op = PayoffExpr::Instr::Op;
    for (const auto& a : n->args) compile(a, out);
    switch (n->kind) {
        case K::Number:
        case K::Constant: out.push_back({Op::Push, n->value}); break;
        case K::Variable: out.push_back({Op::LoadX}); break;
        case K::Neg: out.push_back({Op::Neg}); break;
        case K::Add: out.push_back({Op::Add}); break;
        case K::Sub: out.push_back({Op::Sub}); break;
        case K::Mul: out.push_back({Op::Mul}); break;
        case K::Div: out.push_back({Op::Div}); break;
        case K::Pow: out.push_back({Op::Pow}); break;
        case K::Call: out.push_back({Op::Call, 0.0, n->func}); break;
    }
}

[[noreturn]] void domain_error(const char* fn, double arg) {
    throw Error(ErrorCode::EvalDomainError, std::string(fn) + "(" + fmt_num(arg) + ")");
}

// Arithmetic shared by the plain and dual interpreters.
struct Real {
    static double lift(double v) { return v; }
    static double value(double v) { return v; }
    static double neg(double a) { return -a; }
    static double add(double a, double b) { return a + b; }
    static double sub(double a, double b) { return a - b; }
    static double mul(double a, double b) { return a * b; }
    static double div(double a, double b) {
        if (b == 0.0) domain_error("/", b);
        return a / b;
    }
    static double pow(double a, double b, bool) {
        if (a < 0.0 && b != std::floor(b)) domain_error("^", a);
        if (a == 0.0 && b < 0.0) domain_error("^", a);
        return std::pow(a, b);
    }
    static double call(Func f, const double* a) {
        switch (f) {
            case Func::Max: return a[0] >= a[1] ? a[0] : a[1];
            case Func::Min: return a[0] <= a[1] ? a[0] : a[1];
            case Func::Exp: return std::exp(a[0]);
            case Func::Log:
                if (a[0] <= 0.0) domain_error("log", a[0]);
                return std::log(a[0]);
            case Func::Sqrt:
                if (a[0] < 0.0) domain_error("sqrt", a[0]);
                return std::sqrt(a[0]);
            case Func::Abs: return std::fabs(a[0]);
            case Func::Pos: return a[0] > 0.0 ? a[0] : 0.0;
        }
        return 0.0;
    }
};

struct DualOps {
    static Dual lift(double v) { return {v, 0.0}; }
    static double value(const Dual& v) { return v.v; }
    static Dual neg(Dual a) { return {-a.v, -a.d}; }
    static Dual add(Dual a, Dual b) { return {a.v + b.v, a.d + b.d}; }
    static Dual sub(Dual a, Dual b) { return {a.v - b.v, a.d - b.d}; }
    static Dual mul(Dual a, Dual b) { return {a.v * b.v, a.d * b.v + a.v * b.d}; }
    static Dual div(Dual a, Dual b) {
        double q = Real::div(a.v, b.v);
        return {q, (a.d - q * b.d) / b.v};
    }
    static Dual pow(Dual a, Dual b, bool) {
        double v = Real::pow(a.v, b.v, false);
        double d = 0.0;
        if (b.d == 0.0) {
            if (b.v != 0.0 && a.d != 0.0) d = b.v * Real::pow(a.v, b.v - 1.0, false) * a.d;
        } else {
            if (a.v <= 0.0) domain_error("^", a.v);
            d = v * (b.d * std::log(a.v) + b.v * a.d / a.v);
        }
        return {v, d};
    }
    static Dual call(Func f, const Dual* a) {
        switch (f) {
            case Func::Max: return a[0].v >= a[1].v ? a[0] : a[1];
            case Func::Min: return a[0].v <= a[1].v ? a[0] : a[1];
            case Func::Exp: {
                double e = std::exp(a[0].v);
                return {e, e * a[0].d};
            }
            case Func::Log: return {Real::call(Func::Log, &a[0].v), a[0].d / a[0].v};
            case Func::Sqrt: {
                double s = Real::call(Func::Sqrt, &a[0].v);
                return {s, s > 0.0 ? 0.5 * a[0].d / s : 0.0};
            }
            case Func::Abs: return a[0].v >= 0.0 ? a[0] : neg(a[0]);
            case Func::Pos: return a[0].v > 0.0 ? a[0] : Dual{0.0, 0.0};
        }
        return {};
    }
};

template <class Ops, class T>
T run(const std::vector<PayoffExpr::Instr>& program, T x) {
    using Op = PayoffExpr::Instr::Op;
    T stack[64];
    std::vector<T> heap;
    T* st = stack;
    if (program.size() > 64) {
        heap.resize(program.size());
        st = heap.data();
    }
    std::size_t top = 0;
    for (const auto& ins : program) {
        switch (ins.op) {
            case Op::Push: st[top++] = Ops::lift(ins.value); break;
            case Op::LoadX: st[top++] = x; break;
            case Op::Neg: st[top - 1] = Ops::neg(st[top - 1]); break;
            case Op::Add: --top; st[top - 1] = Ops::add(st[top - 1], st[top]); break;
            case Op::Sub: --top; st[top - 1] = Ops::sub(st[top - 1], st[top]); break;
            case Op::Mul: --top; st[top - 1] = Ops::mul(st[top - 1], st[top]); break;
            case Op::Div: --top; st[top - 1] = Ops::div(st[top - 1], st[top]); break;
            case Op::Pow: --top; st[top - 1] = Ops::pow(st[top - 1], st[top], false); break;
            case Op::Call: {
                int n = func_arity(ins.func);
                top -= static_cast<std::size_t>(n);
                st[top] = Ops::call(ins.func, st + top);
                ++top;
                break;
            }
        }
    }
    return st[0];
}

}  // namespace

PayoffExpr parse(const std::string& source, const std::map<std::string, double>& constants) {
    PayoffExpr e;
    e.source_ = source;
    e.root_ = Parser(source, constants).run();
    compile(e.root_, e.program_);
    return e;
}

double PayoffExpr::eval(double x) const {
    if (!root_) throw Error(ErrorCode::EvalDomainError, "empty expression");
    return run<Real, double>(program_, x);
}

Dual PayoffExpr::eval_dual(double x) const {
    if (!root_) throw Error(ErrorCode::EvalDomainError, "empty expression");
    return run<DualOps, Dual>(program_, Dual{x, 1.0});
}

std::string PayoffExpr::to_string() const { return stopgame::to_string(root_); }

std::string to_string(const ExprPtr& n) {
    using K = ExprNode::Kind;
    auto bin = [&](const char* op) {
        return "(" + to_string(n->args[0]) + " " + op + " " + to_string(n->args[1]) + ")";
    };
    switch (n->kind) {
        case K::Number: return fmt_num(n->value);
        case K::Variable: return "x";
        case K::Constant: return n->name;
        case K::Neg: return "(-" + to_string(n->args[0]) + ")";
        case K::Add: return bin("+");
        case K::Sub: return bin("-");
        case K::Mul: return bin("*");
        case K::Div: return bin("/");
        case K::Pow: return bin("^");
        case K::Call: {
            std::string s = std::string(func_name(n->func)) + "(";
            for (std::size_t i = 0; i < n->args.size(); ++i) {
                if (i) s += ", ";
                s += to_string(n->args[i]);
            }
            return s + ")";
        }
    }
    return "";
}

bool same_tree(const ExprPtr& a, const ExprPtr& b) {
    if (!a || !b) return a == b;
    if (a->kind != b->kind || a->args.size() != b->args.size()) return false;
    switch (a->kind) {
        case ExprNode::Kind::Number:
            if (a->value != b->value) return false;
            break;
        case ExprNode::Kind::Constant:
            if (a->name != b->name || a->value != b->value) return false;
            break;
        case ExprNode::Kind::Call:
            if (a->func != b->func) return false;
            break;
        default: break;
    }
    for (std::size_t i = 0; i < a->args.size(); ++i)
        if (!same_tree(a->args[i], b->args[i])) return false;
    return true;
}

PayoffSpec make_payoff(const std::string& g, const std::optional<std::string>& h,
                       const std::map<std::string, double>& constants) {
    PayoffSpec p;
    p.constants = constants;
    p.G = parse(g, constants);
    if (h) p.H = parse(*h, constants);
    return p;
}

}  // namespace stopgame
