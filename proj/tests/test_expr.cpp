#include <doctest.h>

#include <cmath>
#include <numbers>

#include "lipobs/expr.hpp"

using namespace lipobs;
using namespace lipobs::expr;

namespace {

double eval_at(const std::string& text, std::vector<double> x, std::vector<double> u = {}, double t = 0.0)
{
    const auto e = parse(text, Symbols{static_cast<int>(x.size()), static_cast<int>(u.size()), true});
    return e.eval(Bindings{x, u, t});
}

ExprErrorKind parse_error_kind(const std::string& text, int n = 2, int m = 0)
{
    try {
        (void)parse(text, n, m);
    }
    catch (const ExprError& e) {
        return e.kind();
    }
    FAIL("expected a parse error for " << text);
    return ExprErrorKind::Syntax;
}

}  // namespace

TEST_CASE("integer power of a state")
{
    const auto e = parse("x1^3", 2, 0);
    std::vector<double> x{2.0, 0.0};
    CHECK(e.eval(Bindings{x, {}, 0.0}) == 8.0);
}

TEST_CASE("sine nonlinearity of the flexible joint")
{
    CHECK(eval_at("-3.33*sin(x3)", {0, 0, std::numbers::pi / 2, 0}) == doctest::Approx(-3.33).epsilon(1e-15));
}

TEST_CASE("operator precedence")
{
    CHECK(eval_at("2+3*4^2", {}) == 50.0);
    CHECK(eval_at("-2^2", {}) == -4.0);
    CHECK(eval_at("(1+2)*(3-4)/2", {}) == -1.5);
    CHECK(eval_at("2^-1", {}) == 0.5);
    CHECK(eval_at("1 - 2 - 3", {}) == -4.0);
    CHECK(eval_at("8/4/2", {}) == 1.0);
    CHECK(eval_at("1.5e2 + .5", {}) == 150.5);
}

TEST_CASE("functions, constants, inputs and time")
{
    CHECK(eval_at("cos(pi)", {}) == doctest::Approx(-1.0));
    CHECK(eval_at("exp(1)", {}) == doctest::Approx(std::exp(1.0)));
    CHECK(eval_at("abs(x1) + sqrt(x2)", {-3.0, 16.0}) == 7.0);
    CHECK(eval_at("u1 * x1", {2.0}, {5.0}) == 10.0);
    CHECK(eval_at("0.15*exp(-t)*sin(t)", {}, {}, 1.0) == doctest::Approx(0.15 * std::exp(-1.0) * std::sin(1.0)));
}

TEST_CASE("cubic nonlinearity at a quarter")
{
    CHECK(eval_at("x1^3", {0.25}) == 0.015625);
}

TEST_CASE("parse errors carry a kind and position")
{
    CHECK(parse_error_kind("x1 +") == ExprErrorKind::Syntax);
    CHECK(parse_error_kind("(x1") == ExprErrorKind::Syntax);
    CHECK(parse_error_kind("x1 x2") == ExprErrorKind::Syntax);
    CHECK(parse_error_kind("x1^2.5") == ExprErrorKind::Syntax);
    CHECK(parse_error_kind("") == ExprErrorKind::Syntax);
    CHECK(parse_error_kind("x3") == ExprErrorKind::UnknownIdentifier);
    CHECK(parse_error_kind("x0") == ExprErrorKind::UnknownIdentifier);
    CHECK(parse_error_kind("u1") == ExprErrorKind::UnknownIdentifier);
    CHECK(parse_error_kind("y1") == ExprErrorKind::UnknownIdentifier);
    CHECK(parse_error_kind("t") == ExprErrorKind::UnknownIdentifier);
    CHECK(parse_error_kind("sin(x1, x2)") == ExprErrorKind::Arity);
    CHECK(parse_error_kind("sin()") == ExprErrorKind::Arity);

    try {
        (void)parse("x1 + * x2", 2, 0);
        FAIL("no error");
    }
    catch (const ExprError& e) {
        CHECK(e.position() == 5);
        CHECK(e.code() == ErrorCode::InvalidInput);
    }
}

TEST_CASE("domain errors and overflow")
{
    const auto check_kind = [](const std::string& text, std::vector<double> x, ExprErrorKind kind) {
        const auto e = parse(text, static_cast<int>(x.size()), 0);
        try {
            (void)e.eval(Bindings{x, {}, 0.0});
            FAIL("no error for " << text);
        }
        catch (const ExprError& err) {
            CHECK(err.kind() == kind);
        }
    };
    check_kind("sqrt(x1)", {-1.0}, ExprErrorKind::Domain);
    check_kind("1/x1", {0.0}, ExprErrorKind::Domain);
    check_kind("x1^-2", {0.0}, ExprErrorKind::Domain);
    check_kind("exp(x1)", {1000.0}, ExprErrorKind::Overflow);
    check_kind("x1^3", {1e200}, ExprErrorKind::Overflow);
}

TEST_CASE("printing re-parses to the same function")
{
    for (const std::string text : {"-3.33*sin(x3)", "x1^3 - 6*x1^5 - 2*x1^2*x2", "(x1+x2)*(x1-x2)/3",
                                   "-(x1 - -x2)^2", "abs(x4) + sqrt(exp(x1)) - cos(0.1)"}) {
        const auto a = parse(text, 4, 0);
        const auto b = parse(a.to_string(), 4, 0);
        std::vector<double> x{0.3, -1.2, 0.7, 2.5};
        CHECK(b.eval(Bindings{x, {}, 0.0}) == a.eval(Bindings{x, {}, 0.0}));
        CHECK(a.source() == text);
    }
}

TEST_CASE("vector field evaluation")
{
    const auto ex3 = VectorField::parse({"x1^3", "-6*x1^5 - 6*x1^2*x2 - 2*x1^4 - 2*x1^2"}, 2, 0);
    const Vector zero = eval(ex3, Vector::Zero(2), Vector());
    CHECK(zero.norm() == 0.0);

    const auto ex2 = VectorField::parse({"0", "0", "0", "-3.33*sin(x3)"}, 4, 0);
    Vector x(4);
    x << 0, 0, std::numbers::pi, 0;
    const Vector v = ex2.eval(x, Vector());
    CHECK(v.head(3).norm() == 0.0);
    CHECK(std::abs(v(3)) < 1e-14);

    CHECK(VectorField::zero(3, 1).is_identically_zero());
    CHECK_FALSE(ex2.is_identically_zero());
    CHECK_THROWS_AS(VectorField::parse({"x1"}, 2, 0), Error);
}

TEST_CASE("wrapped field composes coordinate maps")
{
    const auto f = VectorField::parse({"x1*x2", "sin(x1)"}, 2, 0);
    Matrix in(2, 2), out(2, 2);
    in << 1, 2, 0, 1;
    out << 3, 0, 1, 1;
    const auto g = f.wrapped(in, out);
    CHECK(g.is_wrapped());
    Vector x(2);
    x << 0.4, -0.7;
    const Vector expected = out * f.eval(in * x, Vector());
    CHECK((g.eval(x, Vector()) - expected).norm() < 1e-15);

    const auto h = g.wrapped(out, in);
    const Vector twice = in * (out * f.eval(in * (out * x), Vector()));
    CHECK((h.eval(x, Vector()) - twice).norm() < 1e-14);
}

TEST_CASE("central-difference Jacobian")
{
    const auto s = VectorField::parse({"sin(x1)"}, 1, 0);
    CHECK(std::abs(jacobian(s, Vector::Zero(1), Vector())(0, 0) - 1.0) < 1e-8);

    const auto c = VectorField::parse({"x1^3"}, 1, 0);
    CHECK(std::abs(jacobian(c, Vector::Ones(1), Vector())(0, 0) - 3.0) < 1e-8);

    const auto ex2 = VectorField::parse({"0", "0", "0", "-3.33*sin(x3)"}, 4, 0);
    const Matrix j = jacobian(ex2, Vector::Zero(4), Vector());
    Matrix expected = Matrix::Zero(4, 4);
    expected(3, 2) = -3.33;
    CHECK((j - expected).cwiseAbs().maxCoeff() < 1e-9);
}
