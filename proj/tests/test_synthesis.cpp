#include <doctest.h>

#include <functional>

#include "lipobs/io.hpp"
#include "lipobs/synthesis.hpp"

using namespace lipobs;

namespace {

Matrix mat(std::initializer_list<std::initializer_list<double>> rows)
{
    Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.begin()->size()));
    Eigen::Index i = 0;
    for (const auto& r : rows) {
        Eigen::Index j = 0;
        for (double v : r)
            m(i, j++) = v;
        ++i;
    }
    return m;
}

PlantModel example1(bool first_state = false)
{
    return make_plant(mat({{0, 1}, {1, -1}}), first_state ? mat({{1, 0}}) : mat({{0, 1}}));
}

io::PlantFile data(const std::string& name) { return io::load_plant(std::string(LIPOBS_DATA_DIR) + "/" + name); }

PlantModel example2_transformed() { return data("ex2_transformed.plant").design_model(); }
PlantModel example3() { return data("ex3.plant").model; }

ErrorCode error_of(const std::function<void()>& f)
{
    try {
        f();
    }
    catch (const Error& e) {
        return e.code();
    }
    return ErrorCode::Ok;
}

// Certificate properties every returned design must have.
void check_certificate(const PlantModel& plant, const ObserverDesign& d)
{
    const auto report = verify_design(plant, d);
    for (const auto& c : report.checks) {
        INFO(c.name << " margin " << c.margin);
        CHECK(c.passed);
    }
    CHECK(report.pass);
    CHECK(linalg::min_eig(linalg::symmetrize(d.P)) > 0.0);
    CHECK(linalg::spectral_abscissa(plant.A - d.L * plant.C) < -d.beta);
    if (d.xi && (d.theorem == Theorem::T1 || d.theorem == Theorem::T3 || d.theorem == Theorem::T5)) {
        CHECK(d.gamma_star == doctest::Approx(1.0 / *d.xi).epsilon(1e-12));
        CHECK(linalg::max_eig(linalg::symmetrize(d.P)) < 1.0 / (2.0 * d.gamma_star) + 1e-6);
    }
    if (d.zeta) {
        REQUIRE(d.mu_star);
        CHECK(*d.mu_star == doctest::Approx(std::sqrt(*d.zeta)).epsilon(1e-12));
    }
    CHECK((d.P * d.L - d.F).norm() <= 1e-8 * std::max(1.0, d.F.norm()));
}

}  // namespace

TEST_CASE("plant validation")
{
    auto p = example1();
    CHECK_NOTHROW(p.validate());
    CHECK(p.observability_rank() == 2);
    p.C = Matrix::Zero(1, 3);
    CHECK_THROWS_AS(p.validate(), Error);
    p = example1();
    p.gamma = -1.0;
    CHECK_THROWS_AS(p.validate(), Error);
    p = example1();
    p.B = Matrix::Ones(2, 1);
    CHECK_THROWS_AS(p.validate(), Error);  // D must then be 1 x 1
}

TEST_CASE("fixed scalar gain: certified constant equals the closed form")
{
    // e' = -k e with V = p e^2: the LMIs give p = (1 + 2 delta) / (2k), xi = 2p + 2 delta,
    // so gamma = k / (1 + 2 delta + 2 delta k).
    const auto plant = make_plant(mat({{-1}}), mat({{1}}));
    const double delta = lmi::kDefaultMargin;
    for (double l : {1.0, 4.0, 9.0}) {
        const double k = 1.0 + l;
        const auto d = analyze_gain(plant, mat({{l}}), 0.0);
        CHECK(d.gamma_star == doctest::Approx(k / (1.0 + 2.0 * delta + 2.0 * delta * k)).epsilon(1e-6));
        check_certificate(plant, d);
    }
}

TEST_CASE("scalar plant is only limited by the strictness margin")
{
    // With F free, P can shrink to the margin: xi >= 2p + 2 delta >= 4 delta.
    const auto plant = make_plant(mat({{-1}}), mat({{1}}));
    const auto d = design_max_lipschitz(plant);
    CHECK(d.gamma_star == doctest::Approx(1.0 / (4.0 * lmi::kDefaultMargin)).epsilon(0.01));
    check_certificate(plant, d);
}

TEST_CASE("Example 1 with first-state measurement reproduces the reference constant")
{
    const auto plant = example1(true);
    const auto d = design_max_lipschitz(plant);
    CHECK(d.gamma_star == doctest::Approx(1.1933).epsilon(0.03));
    check_certificate(plant, d);
}

TEST_CASE("Example 1 as printed admits the prior-art constant")
{
    const auto plant = example1();
    const auto d = design_max_lipschitz(plant);
    check_certificate(plant, d);
    CHECK(d.gamma_star >= 0.49);
    CHECK_NOTHROW(design_feasibility(plant, 0.49, std::nullopt, 0.0));
    CHECK(error_of([&] { (void)design_feasibility(plant, 2.0, std::nullopt, 0.0); }) == ErrorCode::Infeasible);
}

TEST_CASE("unobservable unstable plant is infeasible")
{
    const auto plant = make_plant(mat({{0, 1}, {1, -1}}), Matrix::Zero(1, 2));
    CHECK(error_of([&] { (void)design_max_lipschitz(plant); }) == ErrorCode::Infeasible);
}

TEST_CASE("decay rate: continuity at zero and infeasibility for huge rates")
{
    const auto plant = example1(true);
    const auto d0 = design_max_lipschitz(plant);
    const auto d1 = design_with_decay(plant, 1e-6);
    CHECK(d1.gamma_star == doctest::Approx(d0.gamma_star).epsilon(0.01));
    check_certificate(plant, d1);
    CHECK(error_of([&] { (void)design_with_decay(plant, 1e6); }) == ErrorCode::Infeasible);
    CHECK(error_of([&] { (void)design_with_decay(plant, 0.0); }) == ErrorCode::InvalidInput);
}

TEST_CASE("Example 2 transformed: decay-constrained maximum")
{
    const auto plant = example2_transformed();
    const auto d = design_with_decay(plant, 0.2);
    CHECK(d.gamma_star == doctest::Approx(2.4177).epsilon(0.03));
    check_certificate(plant, d);
    CHECK(robustness_margin(d, *plant.gamma) > 2.3);
}

TEST_CASE("H-infinity design on Example 2")
{
    const auto plant = example2_transformed();
    const auto d = design_hinf(plant, 0.2, *plant.gamma);
    REQUIRE(d.mu_star);
    CHECK(d.gamma_star == *plant.gamma);
    check_certificate(plant, d);
    // Any feasible mu above the optimum stays feasible.
    CHECK_NOTHROW(design_feasibility(plant, *plant.gamma, *d.mu_star * 1.05, 0.2));

    auto no_disturbance = plant;
    no_disturbance.B = Matrix::Zero(4, 1);
    no_disturbance.D = Matrix::Zero(2, 1);
    const auto d0 = design_hinf(no_disturbance, 0.2, *plant.gamma);
    CHECK(*d0.mu_star < 2e-3);  // zeta sits at the margin floor
    check_certificate(no_disturbance, d0);

    auto no_output = plant;
    no_output.H = Matrix::Zero(4, 4);
    const auto dh = design_hinf(no_output, 0.2, *plant.gamma);
    CHECK(*dh.mu_star < *d.mu_star);
    check_certificate(no_output, dh);

    auto big_h = plant;
    big_h.H = 1.5 * Matrix::Identity(4, 4);
    CHECK(error_of([&] { (void)design_hinf(big_h, 0.2, *plant.gamma); }) == ErrorCode::InvalidInput);
}

TEST_CASE("multi-objective design on Example 3")
{
    const auto plant = example3();
    const auto d = design_multiobjective(plant, 0.05, 0.9);
    REQUIRE(d.mu_star);
    REQUIRE(d.lambda);
    CHECK(*d.lambda == 0.9);
    check_certificate(plant, d);
    CHECK(d.gamma_star > *plant.gamma);

    const auto lo = design_multiobjective(plant, 0.05, 0.5);
    CHECK(lo.gamma_star <= d.gamma_star * (1 + 1e-6));
    CHECK(*lo.mu_star <= *d.mu_star * (1 + 1e-6));
    CHECK(error_of([&] { (void)design_multiobjective(plant, 0.05, 1.5); }) == ErrorCode::InvalidInput);
}

TEST_CASE("multi-objective end points")
{
    auto plant = example3();
    // With no performance output the lambda = 1 problem is the decay-constrained maximum.
    plant.H = Matrix::Zero(2, 2);
    const auto one = design_multiobjective(plant, 0.05, 1.0);
    const auto t3 = design_with_decay(plant, 0.05);
    CHECK(one.gamma_star == doctest::Approx(t3.gamma_star).epsilon(0.02));
    check_certificate(plant, one);

    const auto ex3 = example3();
    const auto zero = design_multiobjective(ex3, 0.05, 0.0);
    const auto t4 = design_hinf(ex3, 0.05, *ex3.gamma);
    CHECK(*zero.mu_star == doctest::Approx(*t4.mu_star).epsilon(0.02));
    check_certificate(ex3, zero);

    auto no_gamma = ex3;
    no_gamma.gamma.reset();
    CHECK(error_of([&] { (void)design_multiobjective(no_gamma, 0.05, 0.0); }) == ErrorCode::InvalidInput);
}

TEST_CASE("feasibility problems")
{
    const auto ex3 = example3();
    const auto d = design_feasibility(ex3, 0.4167, 1.5, 0.05);
    check_certificate(ex3, d);
    CHECK(d.gamma_star == 0.4167);
    CHECK(error_of([&] { (void)design_feasibility(ex3, 0.0, 1.5, 0.05); }) == ErrorCode::InvalidInput);
    CHECK(error_of([&] { (void)design_feasibility(ex3, 0.4, -1.0, 0.05); }) == ErrorCode::InvalidInput);
}

TEST_CASE("sequential design on Example 3")
{
    const auto ex3 = example3();
    const auto s = sequential_design(ex3, 0.05);
    CHECK(s.stage1.gamma_star >= 0.5525);
    check_certificate(ex3, s.stage1);
    REQUIRE(s.stage2.mu_star);
    auto at_used = ex3;
    at_used.gamma = s.gamma_used;
    check_certificate(at_used, s.stage2);
    CHECK(s.gamma_used <= s.stage1.gamma_star);
    CHECK(s.gamma_reduced == (s.gamma_used < s.stage1.gamma_star));
    REQUIRE(s.margin);
    CHECK(*s.margin == doctest::Approx(s.gamma_used - *ex3.gamma));
    const auto t4 = design_hinf(ex3, 0.05, *ex3.gamma);
    CHECK(*s.stage2.mu_star >= *t4.mu_star);
}

TEST_CASE("robustness margin")
{
    ObserverDesign d;
    d.gamma_star = 2.4177;
    CHECK(robustness_margin(d, 0.0833) == doctest::Approx(2.3344));
    d.gamma_star = 0.4472;
    CHECK(robustness_margin(d, 3.33) < 0.0);
    CHECK(robustness_margin(d, 0.4472) == 0.0);
}

TEST_CASE("verification rejects an unstable error system")
{
    const auto plant = example1();
    auto d = design_max_lipschitz(plant);
    d.L = Matrix::Zero(2, 1);
    d.F = Matrix::Zero(2, 1);
    const auto report = verify_design(plant, d);
    CHECK_FALSE(report.pass);
    const auto* c = report.find("spectral abscissa");
    REQUIRE(c);
    CHECK_FALSE(c->passed);
    // A has eigenvalue (-1 + sqrt 5) / 2.
    CHECK(c->margin == doctest::Approx(-(std::sqrt(5.0) - 1.0) / 2.0));
}

TEST_CASE("reference Example 2 gain")
{
    const auto file = data("ex2_transformed.plant");
    const Matrix L = mat({{33.4865, 38.5694}, {129.9249, 282.8603}, {59.89713, 102.1561}, {108.2134, 171.0910}});
    CHECK(linalg::spectral_abscissa(file.model.A - L * file.model.C) < -0.2);
    const auto plant = file.design_model();
    const Matrix l_bar = *file.transform * L;
    const auto d = analyze_gain(plant, l_bar, 0.2);
    check_certificate(plant, d);
    CHECK(d.gamma_star > *plant.gamma);
}

TEST_CASE("problem dump matches the theorem structure")
{
    const auto p = example3();
    CHECK(build_problem(p, Theorem::T5, 0.05, std::nullopt, 0.9).layout().contains("zeta"));
    CHECK(build_problem(p, Theorem::T4, 0.05, 0.4, std::nullopt).layout().contains("alpha"));
    CHECK_FALSE(build_problem(p, Theorem::T3, 0.05, std::nullopt, std::nullopt).layout().contains("zeta"));
    CHECK_THROWS_AS(build_problem(p, Theorem::T4, 0.05, std::nullopt, std::nullopt), Error);
}
