#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "lipobs/io.hpp"
#include "lipobs/lipschitz.hpp"
#include "lipobs/sdp.hpp"
#include "lipobs/sim.hpp"
#include "lipobs/synthesis.hpp"

using namespace lipobs;
namespace fs = std::filesystem;

namespace {

constexpr double kEx1Gamma = 1.1933, kEx1Tol = 0.03, kEx1Seconds = 1.0;
constexpr double kEx2GammaT = 2.4177, kEx2GammaU = 0.4472, kEx2GammaTol = 0.03;
constexpr double kEx2Mu = 0.5753, kEx2MuTol = 0.05, kEx2Seconds = 5.0;
constexpr double kEx3Gamma = 0.5525, kEx3Mu = 1.1705, kEx3Tol = 0.05, kEx3Seconds = 10.0;
constexpr double kEx2Beta = 0.2, kEx3Beta = 0.05, kEx3Lambda = 0.9;
constexpr double kOracleTol = 1e-6, kGapRel = 1e-8, kFdRel = 1e-5;
constexpr double kEigSlack = 1e-6;
constexpr double kGainSlack = 0.02;
constexpr double kRk4Low = 12.0, kRk4High = 20.0;
constexpr double kDeltaLipschitz = 0.5, kConverged = 1e-3;
constexpr int kDeltaInstances = 5;
constexpr double kEstEx2 = 3.33, kEstEx2T = 0.08325, kEstTolT = 0.01, kEstEx3 = 0.4167, kEstTolEx3 = 0.05;
constexpr double kLinearTol = 1e-6;
constexpr unsigned kSeed = 20240611;

std::string fmt(double v, int digits = 6)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", digits, v);
    return buf;
}

bool within(double value, double target, double rel) { return std::abs(value - target) <= rel * std::abs(target); }

double seconds_since(std::chrono::steady_clock::time_point start)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

// One line per criterion; sub-checks are listed on indented lines below it.
class Criterion {
public:
    explicit Criterion(std::string id, std::string title) : id_(std::move(id)), title_(std::move(title)) {}

    void check(bool ok, const std::string& what)
    {
        pass_ = pass_ && ok;
        items_.push_back((ok ? "  ok    " : "  FAIL  ") + what);
    }
    void info(const std::string& what) { items_.push_back("  info  " + what); }

    bool print() const
    {
        std::printf("%s %s  %s\n", id_.c_str(), pass_ ? "PASS" : "FAIL", title_.c_str());
        for (const auto& s : items_)
            std::printf("%s\n", s.c_str());
        std::fflush(stdout);
        return pass_;
    }

private:
    std::string id_, title_;
    bool pass_ = true;
    std::vector<std::string> items_;
};

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

Vector vec(std::initializer_list<double> v)
{
    Vector out(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double x : v)
        out(i++) = x;
    return out;
}

io::PlantFile data(const char* name) { return io::load_plant(std::string(LIPOBS_DATA_DIR) + "/" + name); }

struct Designed {
    std::string name;
    PlantModel plant;
    ObserverDesign design;
};

std::vector<Designed> g_designs;

const ObserverDesign& keep(const std::string& name, const PlantModel& plant, ObserverDesign d)
{
    g_designs.push_back({name, plant, std::move(d)});
    return g_designs.back().design;
}

sim::SimulationConfig sim_config(const Vector& x0, const Vector& xhat0, double t_end = 10.0)
{
    sim::SimulationConfig c;
    c.x0 = x0;
    c.xhat0 = xhat0;
    c.t_end = t_end;
    return c;
}

double trajectory_lipschitz(const expr::VectorField& phi, const sim::Trace& tr, int m)
{
    lipschitz::Region box;
    box.lower = tr.x.colwise().minCoeff().cwiseMin(tr.xhat.colwise().minCoeff()).transpose();
    box.upper = tr.x.colwise().maxCoeff().cwiseMax(tr.xhat.colwise().maxCoeff()).transpose();
    box.samples_per_axis = 11;
    return lipschitz::estimate_lipschitz(phi, box, Vector::Zero(m)).value;
}

std::string ex1_line(const ObserverDesign& d) { return "gamma* = " + fmt(d.gamma_star); }

// ---------------------------------------------------------------------------------------------

bool ac1()
{
    Criterion c("AC1", "Example 1: Theorem 1 on A = [[0,1],[1,-1]], C = [0 1]");
    const auto A = mat({{0, 1}, {1, -1}});
    const auto plant = make_plant(A, mat({{0, 1}}));
    const auto start = std::chrono::steady_clock::now();
    const auto& d = keep("ex1 t1", plant, design_max_lipschitz(plant));
    const double secs = seconds_since(start);
    c.check(within(d.gamma_star, kEx1Gamma, kEx1Tol),
            ex1_line(d) + " (expected " + fmt(kEx1Gamma) + " +/- 3%)");
    c.check(secs < kEx1Seconds, "runtime " + fmt(secs, 3) + " s (< 1 s)");

    const auto first = make_plant(A, mat({{1, 0}}));
    const auto& d1 = keep("ex1 t1, C = [1 0]", first, design_max_lipschitz(first));
    c.info("with C = [1 0]: " + ex1_line(d1));
    return c.print();
}

bool ac2()
{
    Criterion c("AC2", "Example 2: flexible joint, beta = 0.2, Theorems 3 and 4");
    const auto file = data("ex2_transformed.plant");
    const auto transformed = file.design_model();
    auto untransformed = data("ex2.plant").model;

    const auto start = std::chrono::steady_clock::now();
    const auto& t3 = keep("ex2 t3 transformed", transformed, design_with_decay(transformed, kEx2Beta));
    const auto& t3u = keep("ex2 t3 original", untransformed, design_with_decay(untransformed, kEx2Beta));
    const auto& t4 =
        keep("ex2 t4 transformed", transformed, design_hinf(transformed, kEx2Beta, *transformed.gamma));
    const double secs = seconds_since(start);

    c.check(within(t3.gamma_star, kEx2GammaT, kEx2GammaTol),
            "transformed gamma* = " + fmt(t3.gamma_star) + " (expected " + fmt(kEx2GammaT) + " +/- 3%)");
    c.check(within(t3u.gamma_star, kEx2GammaU, kEx2GammaTol),
            "untransformed gamma* = " + fmt(t3u.gamma_star) + " (expected " + fmt(kEx2GammaU) + " +/- 3%)");
    c.check(t4.mu_star && within(*t4.mu_star, kEx2Mu, kEx2MuTol),
            "Theorem 4 mu* = " + fmt(t4.mu_star.value_or(NAN)) + " at gamma = " + fmt(*transformed.gamma) +
                " (expected " + fmt(kEx2Mu) + " +/- 5%)");
    c.check(secs < kEx2Seconds, "runtime " + fmt(secs, 3) + " s (< 5 s)");

    try {
        (void)design_feasibility(transformed, *transformed.gamma, kEx2Mu, kEx2Beta);
        c.info("feasibility at mu = " + fmt(kEx2Mu) + ": feasible");
    }
    catch (const Error& e) {
        c.info("feasibility at mu = " + fmt(kEx2Mu) + ": " + e.what());
    }
    return c.print();
}

bool ac3()
{
    Criterion c("AC3", "Example 3: Theorem 5, beta = 0.05, lambda = 0.9, and lambda sweep");
    const auto plant = data("ex3.plant").model;
    const auto& d = keep("ex3 t5 lambda 0.9", plant, design_multiobjective(plant, kEx3Beta, kEx3Lambda));
    c.check(within(d.gamma_star, kEx3Gamma, kEx3Tol),
            "gamma* = " + fmt(d.gamma_star) + " (expected " + fmt(kEx3Gamma) + " +/- 5%)");
    c.check(d.mu_star && within(*d.mu_star, kEx3Mu, kEx3Tol),
            "mu* = " + fmt(d.mu_star.value_or(NAN)) + " (expected " + fmt(kEx3Mu) + " +/- 5%)");

    const auto start = std::chrono::steady_clock::now();
    std::vector<ObserverDesign> sweep;
    for (int k = 1; k <= 10; ++k)
        sweep.push_back(design_multiobjective(plant, kEx3Beta, 0.09 * k));
    const double secs = seconds_since(start);
    bool gamma_up = true, mu_up = true;
    std::string curve;
    for (std::size_t k = 0; k < sweep.size(); ++k) {
        if (k > 0) {
            gamma_up = gamma_up && sweep[k].gamma_star >= sweep[k - 1].gamma_star * (1 - 1e-6);
            mu_up = mu_up && *sweep[k].mu_star >= *sweep[k - 1].mu_star * (1 - 1e-6);
        }
        curve += (k ? " " : "") + fmt(*sweep[k].lambda, 2) + ":" + fmt(sweep[k].gamma_star, 4) + "/" +
                 fmt(*sweep[k].mu_star, 4);
        keep("ex3 sweep lambda " + fmt(*sweep[k].lambda, 2), plant, sweep[k]);
    }
    c.check(gamma_up, "gamma*(lambda) non-decreasing over lambda = 0.09..0.9");
    c.check(mu_up, "mu*(lambda) non-decreasing over lambda = 0.09..0.9");
    c.check(secs < kEx3Seconds, "10-point sweep runtime " + fmt(secs, 3) + " s (< 10 s)");
    c.info("lambda:gamma*/mu* " + curve);
    return c.print();
}

bool ac4()
{
    using namespace lmi;
    Criterion c("AC4", "SDP core oracle suite");
    constexpr double margin = 1e-9;
    auto one = [](double v) { return Matrix::Constant(1, 1, v); };
    auto solved = [&](const std::string& name, const LmiProblem& p, double expected,
                      const std::function<double(const sdp::SdpSolution&)>& value) {
        const auto s = sdp::solve(p);
        const bool opt = s.status == sdp::Status::Optimal;
        const double got = opt ? value(s) : NAN;
        c.check(opt && std::abs(got - expected) <= kOracleTol,
                name + ": " + fmt(got, 10) + " vs " + fmt(expected, 10));
        c.check(opt && s.certified_gap <= kGapRel * (1.0 + std::abs(s.objective)),
                name + ": certified gap " + fmt(s.certified_gap, 3));
    };

    {
        DecisionLayout l;
        const auto p = l.add_scalar("p", 0.0);
        solved("scalar Lyapunov -2ap >= q, a = -1, q = 1", assemble(l, vec({1}), {make_block("b", 2.0 * p - one(1))}, margin),
               0.5, [](const auto& s) { return s.objective; });
    }
    {
        DecisionLayout l;
        const auto x = l.add_scalar("x");
        solved("eigenvalue [[x,1],[1,x]] >= 0",
               assemble(l, vec({1}), {make_block("b", x.times(Matrix::Identity(2, 2)) + mat({{0, 1}, {1, 0}}))}, margin),
               1.0, [](const auto& s) { return s.x(0); });
    }
    {
        DecisionLayout l;
        const auto x1 = l.add_scalar("x1");
        const auto x2 = l.add_scalar("x2");
        const Matrix e1 = mat({{1, 0, 0}, {0, 0, 0}, {0, 0, 0}});
        const Matrix e2 = mat({{0, 0, 0}, {0, 1, 0}, {0, 0, 0}});
        const Matrix e3 = mat({{0, 0, 0}, {0, 0, 0}, {0, 0, 1}});
        solved("diagonal LP min x1 + 2 x2, x1 >= 1, x2 >= 0, x1 + x2 >= 3",
               assemble(l, vec({1, 2}), {make_block("lp", x1.times(e1 + e3) + x2.times(e2 + e3) - (e1 + 3.0 * e3))}, margin),
               3.0, [](const auto& s) { return s.objective; });
    }
    {
        DecisionLayout l;
        const auto x1 = l.add_scalar("x1");
        const auto x2 = l.add_scalar("x2");
        const Matrix e1 = mat({{1, 0}, {0, 0}}), e2 = mat({{0, 0}, {0, 1}});
        solved("diagonal LP max x1 + x2, x1 <= 2, x2 <= 5",
               assemble(l, vec({-1, -1}), {make_block("lp", -1.0 * (x1.times(e1) + x2.times(e2)) + mat({{2, 0}, {0, 5}}))},
                        margin),
               -7.0, [](const auto& s) { return s.objective; });
    }
    {
        DecisionLayout l;
        const auto t = l.add_scalar("t");
        const Matrix a = mat({{2, -1, 0}, {-1, 2, -1}, {0, -1, 2}});
        solved("largest eigenvalue of tridiag(-1, 2, -1)",
               assemble(l, vec({1}), {make_block("b", t.times(Matrix::Identity(3, 3)) - a)}, margin),
               2.0 + std::sqrt(2.0), [](const auto& s) { return s.x(0); });
    }
    {
        DecisionLayout l;
        const auto p = l.add_scalar("p");
        const auto q = l.add_scalar("q");
        solved("Schur [[p,1],[1,q]] >= 0, q <= 4",
               assemble(l, vec({1, 0}),
                        {make_block("s", p.times(mat({{1, 0}, {0, 0}})) + q.times(mat({{0, 0}, {0, 1}})) + mat({{0, 1}, {1, 0}})),
                         make_block("cap", -1.0 * q + one(4))},
                        margin),
               0.25, [](const auto& s) { return s.objective; });
    }

    std::mt19937 rng(kSeed);
    std::normal_distribution<double> normal;
    double worst = 0.0;
    for (int trial = 0; trial < 5; ++trial) {
        DecisionLayout l;
        std::vector<AffineExpr> vars;
        for (int i = 0; i < 5; ++i)
            vars.push_back(l.add_scalar("y" + std::to_string(i)));
        auto sym = [&](int n) {
            Matrix m(n, n);
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j)
                    m(i, j) = normal(rng);
            return Matrix(0.5 * (m + m.transpose()));
        };
        AffineExpr e(Matrix(10.0 * Matrix::Identity(4, 4) + sym(4)));
        for (const auto& v : vars)
            e += v.times(sym(4));
        Vector cvec(5), x(5);
        for (int i = 0; i < 5; ++i) {
            cvec(i) = normal(rng);
            x(i) = 0.1 * normal(rng);
        }
        const auto problem = assemble(l, cvec, {make_block("b", e)});
        const double t = 2.5, h = 1e-6;
        const auto step = sdp::newton_step(problem, x, t);
        for (int i = 0; i < 5; ++i) {
            Vector xp = x, xm = x;
            xp(i) += h;
            xm(i) -= h;
            const double fd = (*sdp::barrier_value(problem, xp, t) - *sdp::barrier_value(problem, xm, t)) / (2 * h);
            worst = std::max(worst, std::abs(fd - step.gradient(i)) / std::max(1.0, std::abs(step.gradient(i))));
        }
    }
    c.check(worst <= kFdRel, "barrier gradient vs central differences on 5 random problems: worst relative error " +
                                 fmt(worst, 3) + " (<= 1e-5)");
    return c.print();
}

bool ac5()
{
    Criterion c("AC5", "Certificates of every design returned above");
    for (const auto& [name, plant, d] : g_designs) {
        const auto report = verify_design(plant, d);
        const double lmax = linalg::max_eig(linalg::symmetrize(d.P));
        const double bound = 1.0 / (2.0 * d.gamma_star) + kEigSlack;
        const double abscissa = linalg::spectral_abscissa(plant.A - d.L * plant.C);
        c.check(report.pass, name + ": LMI blocks PSD after margin shift");
        c.check(lmax < bound, name + ": lambda_max(P) = " + fmt(lmax) + " < 1/(2 gamma*) + 1e-6 = " + fmt(bound));
        c.check(abscissa < -d.beta, name + ": spectral abscissa of A - LC = " + fmt(abscissa) + " < -beta = " +
                                        fmt(-d.beta));
    }
    return c.print();
}

struct Ac6Traces {
    sim::Trace ex2, ex3, ex3_gain;
};

bool ac6(Ac6Traces& out)
{
    Criterion c("AC6", "Simulation guarantees: decay bound, L2 gain, RK4 order");
    {
        const auto file = data("ex2_transformed.plant");
        const auto plant = file.design_model();
        const Matrix& T = *file.transform;
        const auto d = design_with_decay(plant, kEx2Beta);
        const auto tr = sim::simulate(plant, d.L, sim_config(T * vec({0, -1, 0, 2}), T * vec({1, 0, -0.5, 0})));
        const double actual = trajectory_lipschitz(plant.phi, tr, plant.m());
        c.check(actual <= d.gamma_star, "Example 2 precondition: Lipschitz on trajectory box " + fmt(actual) +
                                            " <= gamma* " + fmt(d.gamma_star));
        const auto r = sim::decay_check(tr, d);
        c.check(r.pass, "Example 2 decay bound on [0, 10]: worst ratio " + fmt(r.worst_ratio) + " at t = " +
                            fmt(r.worst_time));
        out.ex2 = tr.map_states(T.inverse());
    }
    const auto plant = data("ex3.plant").model;
    const auto d = design_multiobjective(plant, kEx3Beta, kEx3Lambda);
    {
        const auto tr = sim::simulate(plant, d.L, sim_config(vec({-0.05, 0.05}), vec({0.05, -0.05})));
        const double actual = trajectory_lipschitz(plant.phi, tr, plant.m());
        c.check(actual <= d.gamma_star, "Example 3 precondition: Lipschitz on trajectory box " + fmt(actual) +
                                            " <= gamma* " + fmt(d.gamma_star));
        const auto r = sim::decay_check(tr, d);
        c.check(r.pass, "Example 3 decay bound on [0, 10]: worst ratio " + fmt(r.worst_ratio) + " at t = " +
                            fmt(r.worst_time));
        out.ex3 = tr;
    }
    {
        auto cfg = sim_config(vec({0, 0}), vec({0, 0}));
        cfg.disturbance = sim::TimeSignal::parse({"0.15*exp(-t)*sin(t)"});
        const auto tr = sim::simulate(plant, d.L, cfg);
        const double g = sim::empirical_gain(tr).value_or(NAN);
        c.check(g <= *d.mu_star * (1.0 + kGainSlack),
                "Example 3 empirical L2 gain " + fmt(g) + " <= mu* + 2% = " + fmt(*d.mu_star * (1.0 + kGainSlack)));
        out.ex3_gain = tr;
    }
    {
        const auto scalar = make_plant(mat({{-1}}), mat({{1}}));
        const double l = 3.0, T = 2.0;
        auto run = [&](double dt) {
            auto cfg = sim_config(vec({1}), vec({0}), T);
            cfg.dt = dt;
            cfg.substeps = 1;
            const auto tr = sim::simulate(scalar, mat({{l}}), cfg);
            const double exact = std::exp(-T) - std::exp(-(1.0 + l) * T);
            return std::abs(tr.xhat(tr.samples() - 1, 0) - exact);
        };
        const double ratio = run(0.02) / run(0.01);
        c.check(ratio >= kRk4Low && ratio <= kRk4High,
                "RK4 terminal error ratio for dt 0.02 -> 0.01: " + fmt(ratio) + " (in [12, 20])");
    }
    return c.print();
}

bool ac7()
{
    Criterion c("AC7", "Robustness margin: Example 2 design under 5 random plant-side perturbations");
    const auto file = data("ex2_transformed.plant");
    const auto plant = file.design_model();
    const Matrix& T = *file.transform;
    const auto d = design_with_decay(plant, kEx2Beta);
    const auto cfg = sim_config(T * vec({0, -1, 0, 2}), T * vec({1, 0, -0.5, 0}));
    c.info("margin gamma* - gamma = " + fmt(robustness_margin(d, *plant.gamma)));

    std::mt19937 rng(kSeed);
    std::uniform_real_distribution<double> amp(0.1, kDeltaLipschitz);
    std::uniform_int_distribution<int> row(0, 3);
    std::normal_distribution<double> normal;
    for (int k = 0; k < kDeltaInstances; ++k) {
        Vector dir(4);
        for (int i = 0; i < 4; ++i)
            dir(i) = normal(rng);
        dir.normalize();
        const double a = amp(rng);
        std::string arg;
        for (int i = 0; i < 4; ++i)
            arg += (i ? "+" : "") + std::string("(") + linalg::format_double(dir(i)) + ")*x" + std::to_string(i + 1);
        std::vector<std::string> texts(4, "0");
        texts[static_cast<std::size_t>(row(rng))] = linalg::format_double(a) + "*sin(" + arg + ")";
        const auto delta = expr::VectorField::parse(texts, 4, 0);

        const auto r = sim::perturbation_test(plant, d, delta, cfg, sim::Perturbation::PlantOnly);
        const auto shared = sim::perturbation_test(plant, d, delta, cfg, sim::Perturbation::Shared);
        std::string label = "instance " + std::to_string(k + 1) + " (" + texts[0] + ", " + texts[1] + ", " +
                            texts[2] + ", " + texts[3] + ")";
        c.check(r.delta_lipschitz <= kDeltaLipschitz,
                label + ": estimated Lipschitz " + fmt(r.delta_lipschitz) + " <= 0.5");
        c.check(!r.blew_up && r.final_ratio <= kConverged,
                "instance " + std::to_string(k + 1) + " plant-only: ||e(10)||/||e(0)|| = " + fmt(r.final_ratio) +
                    " (<= 1e-3)");
        c.info("instance " + std::to_string(k + 1) + " shared with observer: ||e(10)||/||e(0)|| = " +
               fmt(shared.final_ratio));
    }
    return c.print();
}

bool ac8()
{
    Criterion c("AC8", "Lipschitz estimator");
    const auto ex2 = data("ex2.plant");
    auto region = [](const Box& b) {
        lipschitz::Region r;
        r.lower = b.lower;
        r.upper = b.upper;
        return r;
    };
    const double v2 = lipschitz::estimate_lipschitz(ex2.model.phi, region(*ex2.model.region), Vector::Zero(0)).value;
    c.check(within(v2, kEstEx2, 1e-6), "Example 2: " + fmt(v2, 10) + " (expected 3.33)");
    const auto t2 = lipschitz::transform(ex2.model, Eigen::Vector4d(1, 1, 4, 0.1).asDiagonal().toDenseMatrix());
    const double v2t = lipschitz::estimate_lipschitz(t2.phi, region(*t2.region), Vector::Zero(0)).value;
    c.check(within(v2t, kEstEx2T, kEstTolT), "Example 2 transformed: " + fmt(v2t) + " (expected 0.083 +/- 1%)");
    const auto ex3 = data("ex3.plant");
    const auto r3 = lipschitz::estimate_lipschitz(ex3.model.phi, region(*ex3.model.region), Vector::Zero(0));
    c.check(within(r3.value, kEstEx3, kEstTolEx3),
            "Example 3 on [-0.25,0.25]x[-2,0]: " + fmt(r3.value) + " at (" + fmt(r3.argmax(0)) + ", " +
                fmt(r3.argmax(1)) + ") (expected 0.4167 +/- 5%)");

    std::mt19937 rng(kSeed);
    std::normal_distribution<double> normal;
    double worst = 0.0;
    for (int trial = 0; trial < 5; ++trial) {
        const int n = 2 + trial % 3;
        Matrix M(n, n);
        std::vector<std::string> rows;
        for (int i = 0; i < n; ++i) {
            std::string s;
            for (int j = 0; j < n; ++j) {
                M(i, j) = normal(rng);
                s += (j ? "+" : "") + std::string("(") + linalg::format_double(M(i, j)) + ")*x" + std::to_string(j + 1);
            }
            rows.push_back(s);
        }
        lipschitz::Region box;
        box.lower = Vector::Constant(n, -1.0);
        box.upper = Vector::Constant(n, 1.0);
        box.samples_per_axis = 5;
        const double est =
            lipschitz::estimate_lipschitz(expr::VectorField::parse(rows, n, 0), box, Vector::Zero(0)).value;
        worst = std::max(worst, std::abs(est - linalg::max_singular_value(M)));
    }
    c.check(worst <= kLinearTol, "linear fields x -> Mx, 5 random M: worst |estimate - sigma_max(M)| = " +
                                     fmt(worst, 3) + " (<= 1e-6)");
    return c.print();
}

// Every row has the header's column count and every cell is a finite number.
std::string check_csv(const fs::path& path, std::size_t& rows)
{
    std::ifstream in(path);
    if (!in)
        return "cannot open";
    std::string line;
    if (!std::getline(in, line) || line.empty())
        return "missing header";
    const auto columns = static_cast<std::size_t>(std::count(line.begin(), line.end(), ',')) + 1;
    rows = 0;
    while (std::getline(in, line)) {
        std::size_t cells = 0;
        std::stringstream ss(line);
        for (std::string cell; std::getline(ss, cell, ',');) {
            double v;
            const auto [p, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
            if (ec != std::errc() || p != cell.data() + cell.size() || !std::isfinite(v))
                return "row " + std::to_string(rows + 1) + ": bad cell '" + cell + "'";
            ++cells;
        }
        if (cells != columns)
            return "row " + std::to_string(rows + 1) + " has " + std::to_string(cells) + " cells";
        ++rows;
    }
    return rows >= 2 ? "" : "fewer than two rows";
}

bool ac9(const fs::path& dir, const Ac6Traces& traces)
{
    Criterion c("AC9", "Trace CSVs for the figures exist and parse (" + dir.string() + ")");
    fs::create_directories(dir);
    auto write_trace = [&](const char* name, const sim::Trace& tr) {
        std::ofstream os(dir / name);
        sim::write_csv(tr, os, {10});
    };

    const auto ex1 = make_plant(mat({{0, 1}, {1, -1}}), mat({{0, 1}}));
    const auto d1 = design_max_lipschitz(ex1);
    write_trace("figure1_ex1.csv", sim::simulate(ex1, d1.L, sim_config(vec({1, -1}), vec({0, 0}))));
    write_trace("figure2_ex2.csv", traces.ex2);
    {
        const auto plant = data("ex3.plant").model;
        std::ofstream os(dir / "figure3_tradeoff.csv");
        os << "lambda,gamma_star,mu_star\n";
        for (int k = 1; k <= 10; ++k) {
            const auto d = design_multiobjective(plant, kEx3Beta, 0.1 * k);
            os << linalg::format_double(*d.lambda) << ',' << linalg::format_double(d.gamma_star) << ','
               << linalg::format_double(*d.mu_star) << '\n';
        }
    }
    write_trace("figure4_ex3.csv", traces.ex3);
    write_trace("figure5_ex3_disturbance.csv", traces.ex3_gain);

    for (const char* name : {"figure1_ex1.csv", "figure2_ex2.csv", "figure3_tradeoff.csv", "figure4_ex3.csv",
                              "figure5_ex3_disturbance.csv"}) {
        std::size_t rows = 0;
        const auto err = check_csv(dir / name, rows);
        c.check(err.empty(), std::string(name) + (err.empty() ? ": " + std::to_string(rows) + " rows" : ": " + err));
    }
    return c.print();
}

}  // namespace

int main(int argc, char** argv)
{
    const fs::path dir = argc > 1 ? fs::path(argv[1]) : fs::path("acceptance_traces");
    int failed = 0;
    auto run = [&](const std::function<bool()>& f) {
        try {
            failed += f() ? 0 : 1;
        }
        catch (const std::exception& e) {
            std::printf("  error: %s\n", e.what());
            ++failed;
        }
    };
    Ac6Traces traces;
    run(ac1);
    run(ac2);
    run(ac3);
    run(ac4);
    run(ac5);
    run([&] { return ac6(traces); });
    run(ac7);
    run(ac8);
    run([&] { return ac9(dir, traces); });
    std::printf("%d of 9 criteria failed\n", failed);
    return failed == 0 ? 0 : 1;
}
