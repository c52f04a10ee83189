#include "lipobs/expr.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <numbers>

namespace lipobs::expr {

namespace {

using linalg::format_double;

class Parser {
public:
    Parser(std::string_view text, const Symbols& symbols) : text_(text), symbols_(symbols) {}

    int parse_all(std::vector<Node>& nodes)
    {
        nodes_ = &nodes;
        skip_ws();
        if (pos_ >= text_.size())
            fail(ExprErrorKind::Syntax, "empty expression");
        const int root = parse_sum();
        skip_ws();
        if (pos_ != text_.size())
            fail(ExprErrorKind::Syntax, std::string("unexpected '") + text_[pos_] + "'");
        return root;
    }

private:
    [[noreturn]] void fail(ExprErrorKind kind, const std::string& msg, std::size_t at) const
    {
        throw ExprError(kind, at, msg + " at position " + std::to_string(at) + " in \"" + std::string(text_) + "\"");
    }
    [[noreturn]] void fail(ExprErrorKind kind, const std::string& msg) const { fail(kind, msg, pos_); }

    void skip_ws()
    {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_])))
            ++pos_;
    }

    bool accept(char c)
    {
        skip_ws();
        if (pos_ < text_.size() && text_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    int push(Node n)
    {
        nodes_->push_back(n);
        return static_cast<int>(nodes_->size()) - 1;
    }

    int binary(Op op, int lhs, int rhs) { return push(Node{op, 0.0, 0, lhs, rhs}); }

    int parse_sum()
    {
        int lhs = parse_product();
        for (;;) {
            if (accept('+'))
                lhs = binary(Op::Add, lhs, parse_product());
            else if (accept('-'))
                lhs = binary(Op::Sub, lhs, parse_product());
            else
                return lhs;
        }
    }

    int parse_product()
    {
        int lhs = parse_unary();
        for (;;) {
            if (accept('*'))
                lhs = binary(Op::Mul, lhs, parse_unary());
            else if (accept('/'))
                lhs = binary(Op::Div, lhs, parse_unary());
            else
                return lhs;
        }
    }

    int parse_unary()
    {
        if (accept('-'))
            return push(Node{Op::Neg, 0.0, 0, parse_unary(), -1});
        if (accept('+'))
            return parse_unary();
        return parse_power();
    }

    int parse_power()
    {
        int base = parse_primary();
        while (accept('^')) {
            skip_ws();
            const std::size_t at = pos_;
            bool negative = false;
            if (accept('-'))
                negative = true;
            skip_ws();
            int exponent = 0;
            const char* first = text_.data() + pos_;
            const char* last = text_.data() + text_.size();
            auto [ptr, ec] = std::from_chars(first, last, exponent);
            if (ec != std::errc{} || ptr == first)
                fail(ExprErrorKind::Syntax, "exponent must be an integer literal", at);
            pos_ += static_cast<std::size_t>(ptr - first);
            if (pos_ < text_.size() && (text_[pos_] == '.' || text_[pos_] == 'e' || text_[pos_] == 'E'))
                fail(ExprErrorKind::Syntax, "exponent must be an integer literal", at);
            base = push(Node{Op::Pow, 0.0, negative ? -exponent : exponent, base, -1});
        }
        return base;
    }

    int parse_number()
    {
        const std::size_t start = pos_;
        double value = 0.0;
        const char* first = text_.data() + pos_;
        const char* last = text_.data() + text_.size();
        auto [ptr, ec] = std::from_chars(first, last, value);
        if (ec != std::errc{} || ptr == first)
            fail(ExprErrorKind::Syntax, "malformed number", start);
        pos_ += static_cast<std::size_t>(ptr - first);
        return push(Node{Op::Constant, value, 0, -1, -1});
    }

    int parse_primary()
    {
        skip_ws();
        if (pos_ >= text_.size())
            fail(ExprErrorKind::Syntax, "unexpected end of expression");
        const char c = text_[pos_];
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.')
            return parse_number();
        if (c == '(') {
            ++pos_;
            const int inner = parse_sum();
            if (!accept(')'))
                fail(ExprErrorKind::Syntax, "expected ')'");
            return inner;
        }
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_')
            return parse_identifier();
        fail(ExprErrorKind::Syntax, std::string("unexpected '") + c + "'");
    }

    int parse_identifier()
    {
        const std::size_t start = pos_;
        while (pos_ < text_.size() && (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_'))
            ++pos_;
        const std::string_view name = text_.substr(start, pos_ - start);

        static constexpr std::pair<std::string_view, Op> kFunctions[] = {
            {"sin", Op::Sin}, {"cos", Op::Cos}, {"exp", Op::Exp}, {"abs", Op::Abs}, {"sqrt", Op::Sqrt}};
        for (const auto& [fname, op] : kFunctions) {
            if (name != fname)
                continue;
            if (!accept('('))
                fail(ExprErrorKind::Syntax, "expected '(' after " + std::string(name));
            std::vector<int> args;
            if (!accept(')')) {
                do {
                    args.push_back(parse_sum());
                } while (accept(','));
                if (!accept(')'))
                    fail(ExprErrorKind::Syntax, "expected ')'");
            }
            if (args.size() != 1)
                fail(ExprErrorKind::Arity,
                     std::string(name) + " takes 1 argument, got " + std::to_string(args.size()), start);
            return push(Node{op, 0.0, 0, args[0], -1});
        }

        if (name == "pi")
            return push(Node{Op::Constant, std::numbers::pi, 0, -1, -1});
        if (name == "t") {
            if (!symbols_.time)
                fail(ExprErrorKind::UnknownIdentifier, "time variable 't' is not available here", start);
            return push(Node{Op::Time, 0.0, 0, -1, -1});
        }
        if (name.size() >= 2 && (name[0] == 'x' || name[0] == 'u')) {
            int index = 0;
            const auto digits = name.substr(1);
            auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), index);
            if (ec == std::errc{} && ptr == digits.data() + digits.size() && digits[0] != '0') {
                const int limit = name[0] == 'x' ? symbols_.n : symbols_.m;
                if (index < 1 || index > limit)
                    fail(ExprErrorKind::UnknownIdentifier,
                         "variable " + std::string(name) + " out of range (dimension " + std::to_string(limit) + ")",
                         start);
                return push(Node{name[0] == 'x' ? Op::State : Op::Input, 0.0, index - 1, -1, -1});
            }
        }
        fail(ExprErrorKind::UnknownIdentifier, "unknown identifier '" + std::string(name) + "'", start);
    }

    std::string_view text_;
    Symbols symbols_;
    std::size_t pos_ = 0;
    std::vector<Node>* nodes_ = nullptr;
};

}  // namespace

Expression::Expression() : nodes_(std::make_shared<const std::vector<Node>>(std::vector<Node>{Node{}})) {}

Expression parse(std::string_view text, const Symbols& symbols)
{
    auto nodes = std::make_shared<std::vector<Node>>();
    Parser parser(text, symbols);
    Expression e;
    e.root_ = parser.parse_all(*nodes);
    e.nodes_ = std::move(nodes);
    e.symbols_ = symbols;
    e.source_ = std::string(text);
    return e;
}

bool Expression::is_zero_constant() const
{
    const Node& n = (*nodes_)[static_cast<std::size_t>(root_)];
    return n.op == Op::Constant && n.value == 0.0;
}

double Expression::eval(const Bindings& b) const
{
    const double v = eval_node(root_, b);
    if (!std::isfinite(v))
        throw ExprError(ExprErrorKind::Overflow, 0, "non-finite result evaluating \"" + source_ + "\"");
    return v;
}

double Expression::eval_node(int id, const Bindings& b) const
{
    const Node& n = (*nodes_)[static_cast<std::size_t>(id)];
    switch (n.op) {
    case Op::Constant:
        return n.value;
    case Op::State:
        return b.x[static_cast<std::size_t>(n.index)];
    case Op::Input:
        return b.u[static_cast<std::size_t>(n.index)];
    case Op::Time:
        return b.t;
    case Op::Neg:
        return -eval_node(n.lhs, b);
    case Op::Sin:
        return std::sin(eval_node(n.lhs, b));
    case Op::Cos:
        return std::cos(eval_node(n.lhs, b));
    case Op::Exp:
        return std::exp(eval_node(n.lhs, b));
    case Op::Abs:
        return std::abs(eval_node(n.lhs, b));
    case Op::Sqrt: {
        const double a = eval_node(n.lhs, b);
        if (a < 0.0)
            throw ExprError(ExprErrorKind::Domain, 0, "sqrt of negative value in \"" + source_ + "\"");
        return std::sqrt(a);
    }
    case Op::Add:
        return eval_node(n.lhs, b) + eval_node(n.rhs, b);
    case Op::Sub:
        return eval_node(n.lhs, b) - eval_node(n.rhs, b);
    case Op::Mul:
        return eval_node(n.lhs, b) * eval_node(n.rhs, b);
    case Op::Div: {
        const double den = eval_node(n.rhs, b);
        if (den == 0.0)
            throw ExprError(ExprErrorKind::Domain, 0, "division by zero in \"" + source_ + "\"");
        return eval_node(n.lhs, b) / den;
    }
    case Op::Pow: {
        const double base = eval_node(n.lhs, b);
        if (base == 0.0 && n.index < 0)
            throw ExprError(ExprErrorKind::Domain, 0, "zero raised to a negative power in \"" + source_ + "\"");
        // Repeated multiplication keeps integer powers exact for representable results.
        double r = 1.0;
        const int e = n.index < 0 ? -n.index : n.index;
        for (int k = 0; k < e; ++k)
            r *= base;
        return n.index < 0 ? 1.0 / r : r;
    }
    }
    return 0.0;
}

std::string Expression::to_string() const
{
    std::string out;
    print_node(root_, out);
    return out;
}

void Expression::print_node(int id, std::string& out) const
{
    const Node& n = (*nodes_)[static_cast<std::size_t>(id)];
    auto unary_fn = [&](const char* name) {
        out += name;
        out += '(';
        print_node(n.lhs, out);
        out += ')';
    };
    auto infix = [&](char op) {
        out += '(';
        print_node(n.lhs, out);
        out += op;
        print_node(n.rhs, out);
        out += ')';
    };
    switch (n.op) {
    case Op::Constant:
        out += n.value < 0 ? "(" + format_double(n.value) + ")" : format_double(n.value);
        break;
    case Op::State:
        out += 'x' + std::to_string(n.index + 1);
        break;
    case Op::Input:
        out += 'u' + std::to_string(n.index + 1);
        break;
    case Op::Time:
        out += 't';
        break;
    case Op::Neg:
        out += "(-";
        print_node(n.lhs, out);
        out += ')';
        break;
    case Op::Sin: unary_fn("sin"); break;
    case Op::Cos: unary_fn("cos"); break;
    case Op::Exp: unary_fn("exp"); break;
    case Op::Abs: unary_fn("abs"); break;
    case Op::Sqrt: unary_fn("sqrt"); break;
    case Op::Add: infix('+'); break;
    case Op::Sub: infix('-'); break;
    case Op::Mul: infix('*'); break;
    case Op::Div: infix('/'); break;
    case Op::Pow:
        out += '(';
        print_node(n.lhs, out);
        out += ")^" + std::to_string(n.index);
        break;
    }
}

VectorField::VectorField(std::vector<Expression> components, int n, int m)
    : components_(std::move(components)), n_(n), m_(m)
{
    if (static_cast<int>(components_.size()) != n)
        throw invalid_input("vector field has " + std::to_string(components_.size()) + " components, expected " +
                            std::to_string(n));
}

VectorField VectorField::parse(const std::vector<std::string>& texts, int n, int m)
{
    std::vector<Expression> comps;
    comps.reserve(texts.size());
    for (const auto& t : texts)
        comps.push_back(expr::parse(t, n, m));
    return VectorField(std::move(comps), n, m);
}

VectorField VectorField::zero(int n, int m)
{
    std::vector<Expression> comps;
    for (int i = 0; i < n; ++i)
        comps.push_back(expr::parse("0", n, m));
    return VectorField(std::move(comps), n, m);
}

bool VectorField::is_identically_zero() const
{
    for (const auto& c : components_)
        if (!c.is_zero_constant())
            return false;
    return true;
}

Vector VectorField::eval(const Vector& x, const Vector& u) const
{
    if (x.size() != n_ || u.size() != m_)
        throw invalid_input("vector field evaluated with wrong dimensions");
    Vector inner = in_map_ ? Vector(*in_map_ * x) : x;
    Vector out(n_);
    const Bindings b{std::span<const double>(inner.data(), static_cast<std::size_t>(inner.size())),
                     std::span<const double>(u.data(), static_cast<std::size_t>(u.size())), 0.0};
    for (int i = 0; i < n_; ++i) {
        try {
            out(i) = components_[static_cast<std::size_t>(i)].eval(b);
        }
        catch (const ExprError& e) {
            throw ExprError(e.kind(), static_cast<std::size_t>(i),
                            "component " + std::to_string(i + 1) + ": " + e.what());
        }
    }
    return out_map_ ? Vector(*out_map_ * out) : out;
}

VectorField VectorField::wrapped(const Matrix& in, const Matrix& out) const
{
    if (in.rows() != n_ || in.cols() != n_ || out.rows() != n_ || out.cols() != n_)
        throw invalid_input("vector field wrapping matrices must be n x n");
    VectorField f = *this;
    f.in_map_ = in_map_ ? Matrix(*in_map_ * in) : in;
    f.out_map_ = out_map_ ? Matrix(out * *out_map_) : out;
    return f;
}

Vector eval(const VectorField& field, const Vector& x, const Vector& u) { return field.eval(x, u); }

Matrix jacobian(const VectorField& field, const Vector& x, const Vector& u, double step)
{
    if (!(step > 0.0))
        throw invalid_input("jacobian step must be positive");
    const int n = field.n();
    Matrix jac(n, n);
    Vector probe = x;
    for (int j = 0; j < n; ++j) {
        const double h = step * std::max(1.0, std::abs(x(j)));
        probe(j) = x(j) + h;
        const Vector fp = field.eval(probe, u);
        probe(j) = x(j) - h;
        const Vector fm = field.eval(probe, u);
        probe(j) = x(j);
        jac.col(j) = (fp - fm) / (2.0 * h);
    }
    return jac;
}

}  // namespace lipobs::expr
