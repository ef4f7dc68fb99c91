#include "divstat/expr.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <map>
#include <tuple>

namespace divstat {

struct Expr::Node {
    Op op;
    double value = 0.0;
    std::size_t index = 0;
    Expr a{std::shared_ptr<const Node>{}};
    Expr b{std::shared_ptr<const Node>{}};
    std::size_t arity = 0;
    std::size_t size = 1;
};

bool is_unary(Op op) noexcept {
    switch (op) {
    case Op::Neg:
    case Op::Exp:
    case Op::Log:
    case Op::Sin:
    case Op::Cos:
    case Op::Sqrt:
    case Op::Abs:
        return true;
    default:
        return false;
    }
}

bool is_binary(Op op) noexcept {
    switch (op) {
    case Op::Add:
    case Op::Sub:
    case Op::Mul:
    case Op::Div:
    case Op::Pow:
        return true;
    default:
        return false;
    }
}

const char* op_name(Op op) noexcept {
    switch (op) {
    case Op::Const: return "const";
    case Op::Var: return "var";
    case Op::Neg: return "neg";
    case Op::Exp: return "exp";
    case Op::Log: return "log";
    case Op::Sin: return "sin";
    case Op::Cos: return "cos";
    case Op::Sqrt: return "sqrt";
    case Op::Abs: return "abs";
    case Op::Add: return "add";
    case Op::Sub: return "sub";
    case Op::Mul: return "mul";
    case Op::Div: return "div";
    case Op::Pow: return "pow";
    }
    return "?";
}

namespace {

bool is_integer(double v) { return std::isfinite(v) && std::floor(v) == v && std::fabs(v) < 1e15; }

double integer_power(double base, double exponent) {
    auto n = static_cast<long long>(exponent);
    bool invert = n < 0;
    unsigned long long m = invert ? static_cast<unsigned long long>(-n) : static_cast<unsigned long long>(n);
    double result = 1.0;
    double factor = base;
    while (m != 0) {
        if (m & 1ULL) result *= factor;
        factor *= factor;
        m >>= 1;
    }
    return invert ? 1.0 / result : result;
}

[[noreturn]] void domain_fail(Op op, const char* why) {
    throw DomainError(std::string(op_name(op)) + ": " + why, op_name(op));
}

double checked(Op op, double r) {
    if (!std::isfinite(r)) domain_fail(op, "non-finite result");
    return r;
}

double apply_unary(Op op, double a) {
    switch (op) {
    case Op::Neg: return -a;
    case Op::Exp: return checked(op, std::exp(a));
    case Op::Log:
        if (!(a > 0.0)) domain_fail(op, "argument not positive");
        return std::log(a);
    case Op::Sin: return checked(op, std::sin(a));
    case Op::Cos: return checked(op, std::cos(a));
    case Op::Sqrt:
        if (a < 0.0) domain_fail(op, "negative argument");
        return std::sqrt(a);
    case Op::Abs: return std::fabs(a);
    default: break;
    }
    domain_fail(op, "not a unary operation");
}

double apply_binary(Op op, double a, double b) {
    switch (op) {
    case Op::Add: return checked(op, a + b);
    case Op::Sub: return checked(op, a - b);
    case Op::Mul: return checked(op, a * b);
    case Op::Div:
        if (b == 0.0) domain_fail(op, "division by zero");
        return checked(op, a / b);
    case Op::Pow:
        if (is_integer(b)) {
            if (a == 0.0 && b < 0.0) domain_fail(op, "zero to a negative power");
            return checked(op, integer_power(a, b));
        }
        if (a < 0.0) domain_fail(op, "negative base with non-integer exponent");
        if (a == 0.0 && b < 0.0) domain_fail(op, "zero to a negative power");
        return checked(op, std::pow(a, b));
    default: break;
    }
    domain_fail(op, "not a binary operation");
}

std::string format_number(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

Expr::Expr() : Expr(constant(0.0)) {}

Expr Expr::constant(double value) {
    auto n = std::make_shared<Node>();
    n->op = Op::Const;
    n->value = value;
    return Expr(std::move(n));
}

Expr Expr::variable(std::size_t index) {
    auto n = std::make_shared<Node>();
    n->op = Op::Var;
    n->index = index;
    n->arity = index + 1;
    return Expr(std::move(n));
}

Expr Expr::unary(Op op, const Expr& arg) {
    if (!is_unary(op)) throw std::invalid_argument("Expr::unary: not a unary op");
    if (arg.is_constant()) {
        try {
            return constant(apply_unary(op, arg.value()));
        } catch (const DomainError&) {
            // keep the node so evaluation reports the error
        }
    }
    if (op == Op::Neg && arg.op() == Op::Neg) return arg.arg(0);
    auto n = std::make_shared<Node>();
    n->op = op;
    n->a = arg;
    n->arity = arg.arity();
    n->size = 1 + arg.size();
    return Expr(std::move(n));
}

Expr Expr::binary(Op op, const Expr& lhs, const Expr& rhs) {
    if (!is_binary(op)) throw std::invalid_argument("Expr::binary: not a binary op");
    if (lhs.is_constant() && rhs.is_constant()) {
        try {
            return constant(apply_binary(op, lhs.value(), rhs.value()));
        } catch (const DomainError&) {
        }
    }
    switch (op) {
    case Op::Add:
        if (lhs.is_constant(0.0)) return rhs;
        if (rhs.is_constant(0.0)) return lhs;
        break;
    case Op::Sub:
        if (rhs.is_constant(0.0)) return lhs;
        if (lhs.is_constant(0.0)) return unary(Op::Neg, rhs);
        break;
    case Op::Mul:
        if (lhs.is_constant(0.0) || rhs.is_constant(0.0)) return constant(0.0);
        if (lhs.is_constant(1.0)) return rhs;
        if (rhs.is_constant(1.0)) return lhs;
        if (lhs.is_constant(-1.0)) return unary(Op::Neg, rhs);
        if (rhs.is_constant(-1.0)) return unary(Op::Neg, lhs);
        break;
    case Op::Div:
        if (rhs.is_constant(1.0)) return lhs;
        break;
    case Op::Pow:
        if (rhs.is_constant(1.0)) return lhs;
        if (rhs.is_constant(0.0)) return constant(1.0);
        break;
    default:
        break;
    }
    auto n = std::make_shared<Node>();
    n->op = op;
    n->a = lhs;
    n->b = rhs;
    n->arity = std::max(lhs.arity(), rhs.arity());
    n->size = 1 + lhs.size() + rhs.size();
    return Expr(std::move(n));
}

Op Expr::op() const noexcept { return node_->op; }
double Expr::value() const noexcept { return node_->value; }
std::size_t Expr::index() const noexcept { return node_->index; }
std::size_t Expr::arity() const noexcept { return node_->arity; }
std::size_t Expr::size() const noexcept { return node_->size; }

const Expr& Expr::arg(std::size_t i) const {
    if (i == 0 && (is_unary(op()) || is_binary(op()))) return node_->a;
    if (i == 1 && is_binary(op())) return node_->b;
    throw std::out_of_range("Expr::arg");
}

double Expr::eval(std::span<const double> x) const {
    const Node& n = *node_;
    switch (n.op) {
    case Op::Const:
        return n.value;
    case Op::Var:
        if (n.index >= x.size()) throw std::out_of_range("Expr::eval: coordinate index out of range");
        return x[n.index];
    default:
        break;
    }
    if (is_unary(n.op)) return apply_unary(n.op, n.a.eval(x));
    return apply_binary(n.op, n.a.eval(x), n.b.eval(x));
}

bool Expr::same_as(const Expr& other) const noexcept {
    if (node_ == other.node_) return true;
    const Node& p = *node_;
    const Node& q = *other.node_;
    if (p.op != q.op) return false;
    if (p.op == Op::Const) return p.value == q.value || (std::isnan(p.value) && std::isnan(q.value));
    if (p.op == Op::Var) return p.index == q.index;
    if (!p.a.same_as(q.a)) return false;
    return !is_binary(p.op) || p.b.same_as(q.b);
}

Expr operator-(const Expr& a) { return Expr::unary(Op::Neg, a); }
Expr operator+(const Expr& a, const Expr& b) { return Expr::binary(Op::Add, a, b); }
Expr operator-(const Expr& a, const Expr& b) { return Expr::binary(Op::Sub, a, b); }
Expr operator*(const Expr& a, const Expr& b) { return Expr::binary(Op::Mul, a, b); }
Expr operator/(const Expr& a, const Expr& b) { return Expr::binary(Op::Div, a, b); }
Expr pow(const Expr& a, const Expr& b) { return Expr::binary(Op::Pow, a, b); }
Expr exp(const Expr& a) { return Expr::unary(Op::Exp, a); }
Expr log(const Expr& a) { return Expr::unary(Op::Log, a); }
Expr sin(const Expr& a) { return Expr::unary(Op::Sin, a); }
Expr cos(const Expr& a) { return Expr::unary(Op::Cos, a); }
Expr sqrt(const Expr& a) { return Expr::unary(Op::Sqrt, a); }
Expr abs(const Expr& a) { return Expr::unary(Op::Abs, a); }

Expr Expr::diff(std::size_t i) const {
    const Node& n = *node_;
    if (n.arity <= i && n.op != Op::Var) return constant(0.0);
    const auto c = [](double v) { return constant(v); };
    switch (n.op) {
    case Op::Const:
        return c(0.0);
    case Op::Var:
        return c(n.index == i ? 1.0 : 0.0);
    case Op::Neg:
        return -n.a.diff(i);
    case Op::Exp:
        return *this * n.a.diff(i);
    case Op::Log:
        return n.a.diff(i) / n.a;
    case Op::Sin:
        return divstat::cos(n.a) * n.a.diff(i);
    case Op::Cos:
        return -(divstat::sin(n.a) * n.a.diff(i));
    case Op::Sqrt:
        return n.a.diff(i) / (c(2.0) * *this);
    case Op::Abs:
        return n.a / *this * n.a.diff(i);
    case Op::Add:
        return n.a.diff(i) + n.b.diff(i);
    case Op::Sub:
        return n.a.diff(i) - n.b.diff(i);
    case Op::Mul:
        return n.a.diff(i) * n.b + n.a * n.b.diff(i);
    case Op::Div:
        return (n.a.diff(i) * n.b - n.a * n.b.diff(i)) / (n.b * n.b);
    case Op::Pow: {
        Expr db = n.b.diff(i);
        if (db.is_constant(0.0)) {
            // b does not depend on x_i: b * a^(b-1) * a'
            return n.b * divstat::pow(n.a, n.b - c(1.0)) * n.a.diff(i);
        }
        return *this * (db * divstat::log(n.a) + n.b * n.a.diff(i) / n.a);
    }
    }
    return c(0.0);
}

// ---------------------------------------------------------------------------
// Printing

namespace {

// Binding strength of the printed form; higher binds tighter.
int precedence(const Expr& e) {
    switch (e.op()) {
    case Op::Add:
    case Op::Sub: return 1;
    case Op::Mul:
    case Op::Div: return 2;
    case Op::Neg: return 3;
    case Op::Pow: return 4;
    case Op::Const: return e.value() < 0.0 || std::signbit(e.value()) ? 3 : 5;
    default: return 5;
    }
}

void print(const Expr& e, std::span<const std::string> names, std::string& out);

void print_child(const Expr& e, int min_prec, std::span<const std::string> names, std::string& out) {
    if (precedence(e) < min_prec) {
        out += '(';
        print(e, names, out);
        out += ')';
    } else {
        print(e, names, out);
    }
}

void print(const Expr& e, std::span<const std::string> names, std::string& out) {
    switch (e.op()) {
    case Op::Const:
        out += format_number(e.value());
        return;
    case Op::Var:
        if (e.index() < names.size())
            out += names[e.index()];
        else
            out += "x" + std::to_string(e.index() + 1);
        return;
    case Op::Neg:
        out += '-';
        print_child(e.arg(0), 3, names, out);
        return;
    case Op::Add:
    case Op::Sub:
        print_child(e.arg(0), 1, names, out);
        out += e.op() == Op::Add ? " + " : " - ";
        print_child(e.arg(1), 2, names, out);
        return;
    case Op::Mul:
    case Op::Div:
        print_child(e.arg(0), 2, names, out);
        out += e.op() == Op::Mul ? "*" : "/";
        print_child(e.arg(1), 3, names, out);
        return;
    case Op::Pow:
        print_child(e.arg(0), 5, names, out);
        out += '^';
        print_child(e.arg(1), 3, names, out);
        return;
    default:
        out += op_name(e.op());
        out += '(';
        print(e.arg(0), names, out);
        out += ')';
        return;
    }
}

}  // namespace

std::string Expr::str(std::span<const std::string> names) const {
    std::string out;
    print(*this, names, out);
    return out;
}

// ---------------------------------------------------------------------------
// Parsing

namespace {

class Parser {
public:
    Parser(std::string_view src, std::span<const std::string> coords) : src_(src), coords_(coords) {}

    Expr parse_all() {
        Expr e = expression();
        skip_space();
        if (pos_ != src_.size()) fail("unexpected '" + std::string(1, src_[pos_]) + "'");
        return e;
    }

    Predicate predicate() {
        skip_space();
        if (pos_ == src_.size()) return {};
        if (src_.substr(pos_) == "true") return {};
        std::vector<Predicate::Clause> clauses;
        while (true) {
            Expr lhs = expression();
            Cmp cmp = comparison();
            Expr rhs = expression();
            clauses.push_back({lhs, cmp, rhs});
            skip_space();
            if (pos_ == src_.size()) break;
            if (src_.substr(pos_, 2) != "&&") fail("expected '&&'");
            pos_ += 2;
        }
        return Predicate(std::move(clauses));
    }

private:
    [[noreturn]] void fail(const std::string& what) const {
        throw ParseError("syntax error at position " + std::to_string(pos_ + 1) + ": " + what, pos_ + 1);
    }

    void skip_space() {
        while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
    }

    bool accept(char ch) {
        skip_space();
        if (pos_ < src_.size() && src_[pos_] == ch) {
            ++pos_;
            return true;
        }
        return false;
    }

    void expect(char ch) {
        if (!accept(ch)) fail(std::string("expected '") + ch + "'");
    }

    Cmp comparison() {
        skip_space();
        auto rest = src_.substr(pos_);
        if (rest.starts_with("<=")) { pos_ += 2; return Cmp::LessEq; }
        if (rest.starts_with(">=")) { pos_ += 2; return Cmp::GreaterEq; }
        if (rest.starts_with("<")) { pos_ += 1; return Cmp::Less; }
        if (rest.starts_with(">")) { pos_ += 1; return Cmp::Greater; }
        fail("expected comparison operator");
    }

    Expr expression() {
        Expr lhs = term();
        while (true) {
            if (accept('+'))
                lhs = lhs + term();
            else if (accept('-'))
                lhs = lhs - term();
            else
                return lhs;
        }
    }

    Expr term() {
        Expr lhs = unary();
        while (true) {
            if (accept('*'))
                lhs = lhs * unary();
            else if (accept('/'))
                lhs = lhs / unary();
            else
                return lhs;
        }
    }

    Expr unary() {
        if (accept('-')) return -unary();
        return power();
    }

    Expr power() {
        Expr base = primary();
        if (accept('^')) return divstat::pow(base, unary());
        return base;
    }

    Expr primary() {
        skip_space();
        if (pos_ >= src_.size()) fail("unexpected end of input");
        char ch = src_[pos_];
        if (ch == '(') {
            ++pos_;
            Expr e = expression();
            expect(')');
            return e;
        }
        if (std::isdigit(static_cast<unsigned char>(ch)) || ch == '.') return number();
        if (std::isalpha(static_cast<unsigned char>(ch)) || ch == '_') return identifier();
        fail("unexpected '" + std::string(1, ch) + "'");
    }

    Expr number() {
        std::size_t start = pos_;
        auto digits = [&] {
            std::size_t n = 0;
            while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_, ++n;
            return n;
        };
        std::size_t count = digits();
        if (pos_ < src_.size() && src_[pos_] == '.') {
            ++pos_;
            count += digits();
        }
        if (count == 0) {
            pos_ = start;
            fail("malformed number");
        }
        if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
            std::size_t save = pos_;
            ++pos_;
            if (pos_ < src_.size() && (src_[pos_] == '+' || src_[pos_] == '-')) ++pos_;
            if (digits() == 0) pos_ = save;
        }
        std::string text(src_.substr(start, pos_ - start));
        return Expr::constant(std::strtod(text.c_str(), nullptr));
    }

    Expr identifier() {
        std::size_t start = pos_;
        while (pos_ < src_.size() &&
               (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
            ++pos_;
        std::string_view name = src_.substr(start, pos_ - start);

        static constexpr std::pair<std::string_view, Op> functions[] = {
            {"exp", Op::Exp}, {"log", Op::Log},   {"sin", Op::Sin},
            {"cos", Op::Cos}, {"sqrt", Op::Sqrt}, {"abs", Op::Abs},
        };
        for (std::size_t i = 0; i < coords_.size(); ++i)
            if (coords_[i] == name) return Expr::variable(i);
        for (const auto& [fname, op] : functions) {
            if (fname == name) {
                expect('(');
                Expr arg = expression();
                expect(')');
                return Expr::unary(op, arg);
            }
        }
        pos_ = start;
        throw ParseError("unknown identifier '" + std::string(name) + "' at position " + std::to_string(start + 1),
                         start + 1);
    }

    std::string_view src_;
    std::span<const std::string> coords_;
    std::size_t pos_ = 0;
};

}  // namespace

Expr parse(std::string_view src, std::span<const std::string> coords) {
    return Parser(src, coords).parse_all();
}

Predicate parse_predicate(std::string_view src, std::span<const std::string> coords) {
    return Parser(src, coords).predicate();
}

bool Predicate::holds(std::span<const double> x) const noexcept {
    for (const auto& c : clauses_) {
        double l, r;
        try {
            l = c.lhs.eval(x);
            r = c.rhs.eval(x);
        } catch (...) {
            return false;
        }
        bool ok = false;
        switch (c.cmp) {
        case Cmp::Less: ok = l < r; break;
        case Cmp::LessEq: ok = l <= r; break;
        case Cmp::Greater: ok = l > r; break;
        case Cmp::GreaterEq: ok = l >= r; break;
        }
        if (!ok) return false;
    }
    return true;
}

std::string Predicate::str(std::span<const std::string> names) const {
    if (clauses_.empty()) return "true";
    std::string out;
    for (std::size_t i = 0; i < clauses_.size(); ++i) {
        if (i) out += " && ";
        out += clauses_[i].lhs.str(names);
        switch (clauses_[i].cmp) {
        case Cmp::Less: out += " < "; break;
        case Cmp::LessEq: out += " <= "; break;
        case Cmp::Greater: out += " > "; break;
        case Cmp::GreaterEq: out += " >= "; break;
        }
        out += clauses_[i].rhs.str(names);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Tape

namespace {

struct TapeKey {
    Op op;
    std::uint32_t a;
    std::uint32_t b;
    std::uint64_t bits;
    auto operator<=>(const TapeKey&) const = default;
};

}  // namespace

Tape::Tape(std::span<const Expr> outputs) {
    std::map<TapeKey, std::uint32_t> slots;
    std::map<const void*, std::uint32_t> seen;

    // Recursion depth is bounded by the expression depth, which stays small
    // for metric components and their second derivatives.
    auto emit = [&](auto&& self, const Expr& e) -> std::uint32_t {
        if (auto hit = seen.find(e.id()); hit != seen.end()) return hit->second;
        TapeKey key{e.op(), 0, 0, 0};
        if (e.op() == Op::Const) {
            double v = e.value();
            std::memcpy(&key.bits, &v, sizeof v);
        } else if (e.op() == Op::Var) {
            key.a = static_cast<std::uint32_t>(e.index());
        } else {
            key.a = self(self, e.arg(0));
            if (is_binary(e.op())) key.b = self(self, e.arg(1));
        }
        auto it = slots.find(key);
        std::uint32_t slot;
        if (it != slots.end()) {
            slot = it->second;
        } else {
            slot = static_cast<std::uint32_t>(code_.size());
            code_.push_back({e.op(), key.a, key.b, e.op() == Op::Const ? e.value() : 0.0});
            slots.emplace(key, slot);
        }
        seen.emplace(e.id(), slot);
        return slot;
    };
    outputs_.reserve(outputs.size());
    for (const auto& e : outputs) outputs_.push_back(emit(emit, e));
}

void Tape::eval(std::span<const double> x, std::span<double> out) const {
    if (out.size() < outputs_.size()) throw std::invalid_argument("Tape::eval: output span too small");
    thread_local std::vector<double> reg;
    reg.resize(code_.size());
    for (std::size_t k = 0; k < code_.size(); ++k) {
        const Instr& in = code_[k];
        switch (in.op) {
        case Op::Const: reg[k] = in.value; break;
        case Op::Var:
            if (in.a >= x.size()) throw std::out_of_range("Tape::eval: coordinate index out of range");
            reg[k] = x[in.a];
            break;
        case Op::Add: reg[k] = reg[in.a] + reg[in.b]; break;
        case Op::Sub: reg[k] = reg[in.a] - reg[in.b]; break;
        case Op::Mul: reg[k] = reg[in.a] * reg[in.b]; break;
        case Op::Neg: reg[k] = -reg[in.a]; break;
        default:
            reg[k] = is_unary(in.op) ? apply_unary(in.op, reg[in.a]) : apply_binary(in.op, reg[in.a], reg[in.b]);
            break;
        }
        if (!std::isfinite(reg[k])) domain_fail(in.op, "non-finite result");
    }
    for (std::size_t i = 0; i < outputs_.size(); ++i) out[i] = reg[outputs_[i]];
}

}  // namespace divstat
