#pragma once

// Arithmetic expressions over plant states x1..xn, inputs u1..um and
// (optionally) time t. Used to describe nonlinearities and disturbance
// signals inside plant and command-line inputs.

#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lipobs/error.hpp"
#include "lipobs/linalg.hpp"

namespace lipobs::expr {

// Overflow: evaluation produced inf or nan from finite inputs.
enum class ExprErrorKind { Syntax, UnknownIdentifier, Arity, Domain, Overflow };

class ExprError : public Error {
public:
    ExprError(ExprErrorKind kind, std::size_t position, const std::string& what)
        : Error(ErrorCode::InvalidInput, what), kind_(kind), position_(position)
    {
    }
    [[nodiscard]] ExprErrorKind kind() const noexcept { return kind_; }
    // Character offset into the source text (syntax errors), or component index (domain errors).
    [[nodiscard]] std::size_t position() const noexcept { return position_; }

private:
    ExprErrorKind kind_;
    std::size_t position_;
};

// Which free symbols a parse accepts.
struct Symbols {
    int n = 0;             // states x1..xn
    int m = 0;             // inputs u1..um
    bool time = false;     // t
};

struct Bindings {
    std::span<const double> x;
    std::span<const double> u;
    double t = 0.0;
};

enum class Op { Constant, State, Input, Time, Neg, Sin, Cos, Exp, Abs, Sqrt, Add, Sub, Mul, Div, Pow };

struct Node {
    Op op = Op::Constant;
    double value = 0.0;  // Constant
    int index = 0;       // State/Input (0-based), Pow exponent
    int lhs = -1;
    int rhs = -1;
};

// Immutable parsed expression. Copies share the node storage.
class Expression {
public:
    Expression();

    [[nodiscard]] double eval(const Bindings& b) const;
    [[nodiscard]] std::string to_string() const;
    [[nodiscard]] const Symbols& symbols() const { return symbols_; }
    [[nodiscard]] const std::string& source() const { return source_; }
    [[nodiscard]] std::size_t node_count() const { return nodes_->size(); }
    [[nodiscard]] bool is_zero_constant() const;

    friend Expression parse(std::string_view text, const Symbols& symbols);

private:
    double eval_node(int id, const Bindings& b) const;
    void print_node(int id, std::string& out) const;

    std::shared_ptr<const std::vector<Node>> nodes_;
    int root_ = 0;
    Symbols symbols_;
    std::string source_;
};

Expression parse(std::string_view text, const Symbols& symbols);
inline Expression parse(std::string_view text, int n, int m) { return parse(text, Symbols{n, m, false}); }

// Phi(x,u): one expression per state, optionally wrapped as out_map * Phi(in_map * x, u)
// to represent coordinate changes without re-parsing.
class VectorField {
public:
    VectorField() = default;
    VectorField(std::vector<Expression> components, int n, int m);

    static VectorField parse(const std::vector<std::string>& texts, int n, int m);
    static VectorField zero(int n, int m);

    [[nodiscard]] int n() const { return n_; }
    [[nodiscard]] int m() const { return m_; }
    [[nodiscard]] const std::vector<Expression>& components() const { return components_; }
    [[nodiscard]] bool is_wrapped() const { return in_map_.has_value() || out_map_.has_value(); }
    [[nodiscard]] bool is_identically_zero() const;

    [[nodiscard]] Vector eval(const Vector& x, const Vector& u) const;

    // out * Phi(in * x, u) composed with the current wrapping.
    [[nodiscard]] VectorField wrapped(const Matrix& in, const Matrix& out) const;

private:
    std::vector<Expression> components_;
    int n_ = 0;
    int m_ = 0;
    std::optional<Matrix> in_map_;
    std::optional<Matrix> out_map_;
};

Vector eval(const VectorField& field, const Vector& x, const Vector& u);

// Relative default step: h_i = step * max(1, |x_i|).
inline constexpr double kDefaultJacobianStep = 1e-5;

// Central-difference Jacobian d Phi / d x.
Matrix jacobian(const VectorField& field, const Vector& x, const Vector& u, double step = kDefaultJacobianStep);

}  // namespace lipobs::expr
