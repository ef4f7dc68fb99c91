#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace divstat {

/// Raised by the parser. `position()` is the 1-based byte position of the
/// offending token; end of input reports `size + 1`.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, std::size_t position)
        : std::runtime_error(what), position_(position) {}
    std::size_t position() const noexcept { return position_; }

private:
    std::size_t position_;
};

/// Evaluation left the real domain of some node (log of non-positive,
/// division by zero, overflow). `node()` names the offending operation.
class DomainError : public std::runtime_error {
public:
    DomainError(const std::string& what, std::string node)
        : std::runtime_error(what), node_(std::move(node)) {}
    const std::string& node() const noexcept { return node_; }

private:
    std::string node_;
};

enum class Op : std::uint8_t {
    Const,
    Var,
    Neg,
    Exp,
    Log,
    Sin,
    Cos,
    Sqrt,
    Abs,
    Add,
    Sub,
    Mul,
    Div,
    Pow,
};

bool is_unary(Op op) noexcept;
bool is_binary(Op op) noexcept;
const char* op_name(Op op) noexcept;

/// Immutable arithmetic expression over chart coordinates x_0..x_{n-1}.
///
/// Construction through the operators folds constants and drops neutral
/// elements (x+0, x*1, x^1, x*0); no other rewriting happens.
class Expr {
public:
    Expr();  // constant 0

    static Expr constant(double value);
    static Expr variable(std::size_t index);
    static Expr unary(Op op, const Expr& arg);
    static Expr binary(Op op, const Expr& lhs, const Expr& rhs);

    Op op() const noexcept;
    double value() const noexcept;      // Const only
    std::size_t index() const noexcept; // Var only
    const Expr& arg(std::size_t i) const;

    bool is_constant() const noexcept { return op() == Op::Const; }
    bool is_constant(double v) const noexcept { return is_constant() && value() == v; }

    /// Evaluates at x. Throws DomainError instead of returning NaN or inf.
    double eval(std::span<const double> x) const;

    /// Exact partial derivative with respect to coordinate `i`.
    Expr diff(std::size_t i) const;

    /// Largest variable index referenced plus one (0 for constants).
    std::size_t arity() const noexcept;

    /// Number of nodes in the tree (shared subtrees counted repeatedly).
    std::size_t size() const noexcept;

    /// Parseable text; constants use 17 significant digits.
    std::string str(std::span<const std::string> names) const;

    /// True when both trees are structurally identical.
    bool same_as(const Expr& other) const noexcept;

    /// Node identity; equal ids imply equal trees.
    const void* id() const noexcept { return node_.get(); }

private:
    struct Node;
    explicit Expr(std::shared_ptr<const Node> node) : node_(std::move(node)) {}
    std::shared_ptr<const Node> node_;
};

Expr operator-(const Expr& a);
Expr operator+(const Expr& a, const Expr& b);
Expr operator-(const Expr& a, const Expr& b);
Expr operator*(const Expr& a, const Expr& b);
Expr operator/(const Expr& a, const Expr& b);
Expr pow(const Expr& a, const Expr& b);
Expr exp(const Expr& a);
Expr log(const Expr& a);
Expr sin(const Expr& a);
Expr cos(const Expr& a);
Expr sqrt(const Expr& a);
Expr abs(const Expr& a);

/// Parses `src` with coordinate names `coords` (mapped to indices by position).
///
/// Precedence, tightest first: `^` (right-associative), unary `-`, `* /`, `+ -`.
/// Functions: exp log sin cos sqrt abs.
Expr parse(std::string_view src, std::span<const std::string> coords);

enum class Cmp : std::uint8_t { Less, LessEq, Greater, GreaterEq };

/// Conjunction of comparisons `lhs <op> rhs`, e.g. `x1^2+x2^2 > 0 && x2 < 3`.
/// An empty predicate is true everywhere.
class Predicate {
public:
    struct Clause {
        Expr lhs;
        Cmp cmp;
        Expr rhs;
    };

    Predicate() = default;
    explicit Predicate(std::vector<Clause> clauses) : clauses_(std::move(clauses)) {}

    /// False (never throws) when a clause cannot be evaluated at x.
    bool holds(std::span<const double> x) const noexcept;
    bool trivial() const noexcept { return clauses_.empty(); }
    const std::vector<Clause>& clauses() const noexcept { return clauses_; }
    std::string str(std::span<const std::string> names) const;

private:
    std::vector<Clause> clauses_;
};

/// Parses `lhs op rhs (&& lhs op rhs)*`; an empty or "true" source is the
/// trivial predicate.
Predicate parse_predicate(std::string_view src, std::span<const std::string> coords);

/// A batch of expressions compiled to a flat instruction list with shared
/// subexpressions evaluated once. Immutable; `eval` is reentrant.
class Tape {
public:
    Tape() = default;
    explicit Tape(std::span<const Expr> outputs);

    std::size_t outputs() const noexcept { return outputs_.size(); }
    std::size_t instructions() const noexcept { return code_.size(); }

    /// Writes one value per compiled expression into `out`.
    void eval(std::span<const double> x, std::span<double> out) const;

private:
    struct Instr {
        Op op;
        std::uint32_t a;
        std::uint32_t b;
        double value;  // Const payload; Var stores the index in `a`
    };
    std::vector<Instr> code_;
    std::vector<std::uint32_t> outputs_;
};

}  // namespace divstat
