#include "lipobs/synthesis.hpp"

#include <Eigen/Cholesky>
#include <cmath>
#include <limits>

namespace lipobs {

using lmi::AffineExpr;

void PlantModel::validate() const
{
    const auto n = A.rows();
    if (n == 0 || A.cols() != n)
        throw invalid_input("A must be a non-empty square matrix");
    if (C.cols() != n)
        throw invalid_input("C must have n = " + std::to_string(n) + " columns");
    if (B.rows() != n)
        throw invalid_input("B must have n = " + std::to_string(n) + " rows");
    if (D.rows() != C.rows() || D.cols() != B.cols())
        throw invalid_input("D must be p x q (" + std::to_string(C.rows()) + "x" + std::to_string(B.cols()) + ")");
    if (H.cols() != n)
        throw invalid_input("H must have n = " + std::to_string(n) + " columns");
    if (phi.n() != n)
        throw invalid_input("phi must have n = " + std::to_string(n) + " components");
    if (gamma && !(*gamma > 0.0))
        throw invalid_input("gamma must be positive");
    if (region) {
        if (region->lower.size() != n || region->upper.size() != n)
            throw invalid_input("region bounds must have n entries");
        if ((region->lower.array() > region->upper.array()).any())
            throw invalid_input("region lower bound exceeds upper bound");
    }
    if (transform && (transform->rows() != n || transform->cols() != n))
        throw invalid_input("transform must be n x n");
    const bool finite = A.allFinite() && B.allFinite() && C.allFinite() && D.allFinite() && H.allFinite();
    if (!finite)
        throw invalid_input("plant matrices must be finite");
}

int PlantModel::observability_rank() const { return linalg::observability_rank(A, C); }

PlantModel make_plant(Matrix a, Matrix c, expr::VectorField phi)
{
    PlantModel p;
    const auto n = a.rows();
    p.B = Matrix::Zero(n, 0);
    p.D = Matrix::Zero(c.rows(), 0);
    p.H = Matrix::Zero(0, n);
    p.phi = phi.n() == n ? std::move(phi) : expr::VectorField::zero(static_cast<int>(n), 0);
    p.A = std::move(a);
    p.C = std::move(c);
    return p;
}

const char* to_string(Theorem t)
{
    switch (t) {
    case Theorem::T1: return "t1";
    case Theorem::T3: return "t3";
    case Theorem::T4: return "t4";
    case Theorem::T5: return "t5";
    case Theorem::Feasibility: return "feas";
    case Theorem::FixedGain: return "fixed_gain";
    }
    return "?";
}

namespace {

enum class Structure { Lipschitz, Hinf, Multi };
enum class Goal { None, Xi, Zeta, Weighted, Gain };

struct Formulation {
    Structure structure = Structure::Lipschitz;
    Goal goal = Goal::Xi;
    double beta = 0.0;
    double lambda = 0.0;
    std::optional<double> gamma;       // Hinf: prescribed Lipschitz constant
    std::optional<double> fixed_xi;    // Lipschitz/Multi
    std::optional<double> fixed_zeta;  // Hinf/Multi
    bool drop_disturbance = false;     // Multi: zeta left free (its row/column removed)
    std::optional<Matrix> fixed_gain;  // F = P L with L given
    std::optional<double> xi_cap;      // Gain: upper bounds keeping the indices near-optimal
    std::optional<double> zeta_cap;
};

double h_norm_sq(const Matrix& h)
{
    if (h.size() == 0)
        return 0.0;
    return linalg::max_eig(h.transpose() * h);
}

Matrix hth(const PlantModel& plant)
{
    if (plant.H.rows() == 0)
        return Matrix::Zero(plant.n(), plant.n());
    return plant.H.transpose() * plant.H;
}

AffineExpr scalar_var(lmi::DecisionLayout& layout, const std::string& name, std::optional<double> fixed,
                      std::optional<double> lower = std::nullopt)
{
    if (fixed)
        return AffineExpr(Matrix::Constant(1, 1, *fixed));
    return layout.add_scalar(name, lower);
}

lmi::LmiProblem build(const PlantModel& plant, const Formulation& f, double margin)
{
    const int n = plant.n(), p = plant.p(), q = plant.q();
    const Matrix I = Matrix::Identity(n, n);
    lmi::DecisionLayout layout;

    const AffineExpr P = layout.add_symmetric("P", n);
    const AffineExpr F = f.fixed_gain ? AffineExpr(P * *f.fixed_gain) : layout.add_matrix("F", n, p);

    std::optional<AffineExpr> alpha;
    if (f.structure != Structure::Lipschitz)
        alpha = layout.add_scalar("alpha", 1.0);
    const AffineExpr eps = layout.add_scalar("epsilon", 0.0);

    std::optional<AffineExpr> xi, zeta;
    if (f.structure != Structure::Hinf)
        xi = scalar_var(layout, "xi", f.fixed_xi);
    if (f.structure != Structure::Lipschitz && !f.drop_disturbance)
        zeta = scalar_var(layout, "zeta", f.fixed_zeta, 0.0);

    std::vector<lmi::AffineBlock> blocks;

    const AffineExpr lyap = plant.A.transpose() * P + P * plant.A + (2.0 * f.beta) * P -
                            plant.C.transpose() * F.transpose() - F * plant.C;
    AffineExpr decay = -lyap - eps.times(I);
    decay = alpha ? decay - alpha->times(I) : decay - I;
    blocks.push_back(lmi::make_block("lyapunov", decay));

    const double shrink = 1.0 - h_norm_sq(plant.H);
    AffineExpr bound_diag;
    switch (f.structure) {
    case Structure::Lipschitz: bound_diag = (0.5 * *xi).times(I); break;
    case Structure::Hinf: bound_diag = AffineExpr(Matrix(shrink / (2.0 * *f.gamma) * I)); break;
    case Structure::Multi: bound_diag = (0.5 * shrink * *xi).times(I); break;
    }
    blocks.push_back(lmi::make_block("lipschitz bound", lmi::block({{bound_diag, P}, {P, bound_diag}})));

    if (f.structure != Structure::Lipschitz) {
        const AffineExpr hh(hth(plant));
        std::vector<std::vector<AffineExpr>> rows;
        const bool with_w = !f.drop_disturbance && q > 0;
        const AffineExpr cross = P * plant.B - F * plant.D;
        if (f.structure == Structure::Hinf) {
            const double g = *f.gamma;
            const AffineExpr top = hh + Matrix(0.5 * (g + 1.0 / g) * I) - alpha->times(I);
            if (with_w)
                rows = {{top, cross}, {cross.transpose(), -zeta->times(Matrix::Identity(q, q))}};
            else
                rows = {{top}};
        }
        else {
            const AffineExpr top = hh + (0.5 * *xi).times(I) - alpha->times(I);
            const AffineExpr eye(I);
            const AffineExpr mid = (-2.0 * *xi).times(I);
            if (with_w) {
                const AffineExpr zero_nq = AffineExpr::zero(n, q);
                rows = {{top, eye, cross},
                        {eye, mid, zero_nq},
                        {cross.transpose(), zero_nq.transpose(), -zeta->times(Matrix::Identity(q, q))}};
            }
            else {
                rows = {{top, eye}, {eye, mid}};
            }
        }
        blocks.push_back(lmi::make_block("hinf", -lmi::block(rows)));
    }

    blocks.push_back(lmi::make_block("P positive", P));

    AffineExpr goal = AffineExpr::zero(1, 1);
    switch (f.goal) {
    case Goal::None: break;
    case Goal::Xi: goal = *xi; break;
    case Goal::Zeta: goal = *zeta; break;
    case Goal::Weighted:
        goal = f.lambda * *xi;
        if (zeta)
            goal += (1.0 - f.lambda) * *zeta;
        break;
    case Goal::Gain: {
        // L'PL <= kappa I, i.e. [kappa I, F'; F, P] >= 0
        const AffineExpr kappa = layout.add_scalar("kappa");
        blocks.push_back(lmi::make_block(
            "gain bound", lmi::block({{kappa.times(Matrix::Identity(p, p)), F.transpose()}, {F, P}})));
        const AffineExpr one(Matrix::Ones(1, 1));
        if (f.xi_cap && xi && !f.fixed_xi)
            blocks.push_back(lmi::make_block("xi cap", *f.xi_cap * one - *xi));
        if (f.zeta_cap && zeta && !f.fixed_zeta)
            blocks.push_back(lmi::make_block("zeta cap", *f.zeta_cap * one - *zeta));
        goal = kappa;
        break;
    }
    }

    Vector c = Vector::Zero(layout.dimension());
    for (const auto& [index, coeff] : goal.terms())
        c(index) += coeff(0, 0);
    return lmi::assemble(std::move(layout), std::move(c), std::move(blocks), margin);
}

ObserverDesign extract(const PlantModel& plant, const Formulation& f, const lmi::LmiProblem& problem,
                       const Vector& x)
{
    const auto& layout = problem.layout();
    ObserverDesign d;
    d.P = layout.value("P", x);
    if (f.fixed_gain) {
        d.L = *f.fixed_gain;
        d.F = d.P * d.L;
    }
    else {
        d.F = layout.value("F", x);
        Eigen::LLT<Matrix> llt(d.P);
        if (llt.info() != Eigen::Success)
            throw Error(ErrorCode::NumericalFailure, "certificate P is not positive definite");
        d.L = llt.solve(d.F);
    }
    d.epsilon = layout.scalar("epsilon", x);
    if (layout.contains("alpha"))
        d.alpha = layout.scalar("alpha", x);
    if (layout.contains("xi"))
        d.xi = layout.scalar("xi", x);
    else if (f.fixed_xi)
        d.xi = *f.fixed_xi;
    if (layout.contains("zeta"))
        d.zeta = layout.scalar("zeta", x);
    else if (f.fixed_zeta)
        d.zeta = *f.fixed_zeta;
    d.beta = f.beta;
    if (f.structure == Structure::Hinf)
        d.gamma_star = *f.gamma;
    else if (d.xi)
        d.gamma_star = 1.0 / *d.xi;
    if (d.zeta)
        d.mu_star = std::sqrt(*d.zeta);
    (void)plant;
    return d;
}

void require_h_contractive(const PlantModel& plant)
{
    const double s = std::sqrt(h_norm_sq(plant.H));
    if (!(s < 1.0))
        throw invalid_input("largest singular value of H is " + std::to_string(s) +
                            "; the H-infinity constraints need it below 1");
}

void throw_on_status(const sdp::SdpSolution& sol, const char* what)
{
    switch (sol.status) {
    case sdp::Status::Optimal: return;
    case sdp::Status::Infeasible:
        throw Error(ErrorCode::Infeasible, std::string(what) + ": LMI problem is infeasible (" + sol.note + ")");
    case sdp::Status::MaxIterations:
        throw Error(ErrorCode::NumericalFailure, std::string(what) + ": solver hit the iteration limit");
    case sdp::Status::NumericalFailure:
        throw Error(ErrorCode::NumericalFailure, std::string(what) + ": " + sol.note);
    }
}

void require_verified(const PlantModel& plant, const ObserverDesign& d, double margin)
{
    const auto report = verify_design(plant, d, margin);
    if (report.pass)
        return;
    for (const auto& c : report.checks)
        if (!c.passed)
            throw Error(ErrorCode::NumericalFailure,
                        "design failed verification: " + c.name + " margin " + std::to_string(c.margin));
}

ObserverDesign run(const PlantModel& plant, const Formulation& f, Theorem tag, const DesignOptions& opts,
                   const char* what)
{
    plant.validate();
    const auto problem = build(plant, f, opts.margin);
    ObserverDesign d;
    if (f.goal == Goal::None) {
        const auto ip = sdp::find_interior_point(problem, opts.solver);
        if (!ip.x) {
            if (ip.status == sdp::Status::NumericalFailure)
                throw Error(ErrorCode::NumericalFailure, std::string(what) + ": " + ip.note);
            throw Error(ErrorCode::Infeasible, std::string(what) + ": LMI feasibility problem has no solution");
        }
        d = extract(plant, f, problem, *ip.x);
        d.iterations = ip.iterations;
    }
    else {
        const auto sol = sdp::solve(problem, opts.solver);
        throw_on_status(sol, what);
        d = extract(plant, f, problem, sol.x);
        d.objective = sol.objective;
        d.certified_gap = sol.certified_gap;
        d.iterations = sol.iterations;
        d.status = sol.status;
        if (opts.gain_relax > 0.0 && !f.fixed_gain) {
            Formulation g = f;
            g.goal = Goal::Gain;
            const auto relaxed = [&](std::optional<double> v) -> std::optional<double> {
                if (!v)
                    return std::nullopt;
                return *v + opts.gain_relax * std::max(std::abs(*v), 1e-9);
            };
            if (f.goal == Goal::Xi || f.goal == Goal::Weighted)
                g.xi_cap = relaxed(d.xi);
            if (f.goal == Goal::Zeta || f.goal == Goal::Weighted)
                g.zeta_cap = relaxed(d.zeta);
            const auto tight = build(plant, g, opts.margin);
            const auto polished = sdp::solve(tight, opts.solver);
            if (polished.status == sdp::Status::Optimal) {
                const Vector x = polished.x.head(problem.dimension());
                auto e = extract(plant, f, problem, x);
                if (verify_design(plant, e, opts.margin).pass) {
                    e.objective = problem.objective().dot(x);
                    e.certified_gap = sol.certified_gap + (e.objective - sol.objective);
                    e.iterations = sol.iterations + polished.iterations;
                    e.status = sol.status;
                    d = e;
                }
            }
        }
    }
    d.theorem = tag;
    if (f.structure == Structure::Multi && f.goal == Goal::Weighted)
        d.lambda = f.lambda;
    require_verified(plant, d, opts.margin);
    return d;
}

Formulation lipschitz_form(double beta)
{
    Formulation f;
    f.structure = Structure::Lipschitz;
    f.goal = Goal::Xi;
    f.beta = beta;
    return f;
}

}  // namespace

lmi::LmiProblem build_problem(const PlantModel& plant, Theorem theorem, double beta, std::optional<double> gamma,
                              std::optional<double> lambda, double margin)
{
    plant.validate();
    Formulation f;
    f.beta = beta;
    switch (theorem) {
    case Theorem::T1:
    case Theorem::T3: f = lipschitz_form(beta); break;
    case Theorem::T4:
        if (!gamma)
            throw invalid_input("Theorem 4 problem needs gamma");
        f.structure = Structure::Hinf;
        f.goal = Goal::Zeta;
        f.gamma = gamma;
        break;
    case Theorem::T5:
        f.structure = Structure::Multi;
        f.goal = Goal::Weighted;
        f.lambda = lambda.value_or(0.5);
        break;
    case Theorem::Feasibility:
        if (!gamma)
            throw invalid_input("feasibility problem needs gamma");
        f = lipschitz_form(beta);
        f.goal = Goal::None;
        f.fixed_xi = 1.0 / *gamma;
        break;
    case Theorem::FixedGain: throw invalid_input("fixed-gain problems need a gain; use analyze_gain");
    }
    return build(plant, f, margin);
}

ObserverDesign design_max_lipschitz(const PlantModel& plant, const DesignOptions& opts)
{
    return run(plant, lipschitz_form(0.0), Theorem::T1, opts, "design_max_lipschitz");
}

ObserverDesign design_with_decay(const PlantModel& plant, double beta, const DesignOptions& opts)
{
    if (!(beta > 0.0))
        throw invalid_input("decay rate beta must be positive");
    return run(plant, lipschitz_form(beta), Theorem::T3, opts, "design_with_decay");
}

ObserverDesign design_hinf(const PlantModel& plant, double beta, double gamma, const DesignOptions& opts)
{
    if (!(gamma > 0.0))
        throw invalid_input("Lipschitz constant gamma must be positive");
    if (!(beta >= 0.0))
        throw invalid_input("decay rate beta must be non-negative");
    require_h_contractive(plant);
    Formulation f;
    f.structure = Structure::Hinf;
    f.goal = Goal::Zeta;
    f.beta = beta;
    f.gamma = gamma;
    return run(plant, f, Theorem::T4, opts, "design_hinf");
}

namespace {

// Smallest xi for which the Theorem 5 constraints admit some finite zeta.
ObserverDesign max_gamma_hinf_compatible(const PlantModel& plant, double beta, const DesignOptions& opts)
{
    Formulation f;
    f.structure = Structure::Multi;
    f.goal = Goal::Xi;
    f.beta = beta;
    f.drop_disturbance = true;
    return run(plant, f, Theorem::T5, opts, "design_multiobjective");
}

ObserverDesign min_zeta_at_xi(const PlantModel& plant, double beta, double xi, const DesignOptions& opts)
{
    Formulation f;
    f.structure = Structure::Multi;
    f.goal = Goal::Zeta;
    f.beta = beta;
    f.fixed_xi = xi;
    return run(plant, f, Theorem::T5, opts, "design_multiobjective");
}

}  // namespace

ObserverDesign design_multiobjective(const PlantModel& plant, double beta, double lambda, const DesignOptions& opts)
{
    if (!(lambda >= 0.0 && lambda <= 1.0))
        throw invalid_input("lambda must lie in [0, 1]");
    if (!(beta >= 0.0))
        throw invalid_input("decay rate beta must be non-negative");
    require_h_contractive(plant);
    ObserverDesign d;
    if (lambda == 1.0) {
        // zeta carries no weight: maximize gamma first, then take the smallest zeta at that gamma.
        const auto first = max_gamma_hinf_compatible(plant, beta, opts);
        d = min_zeta_at_xi(plant, beta, *first.xi * (1.0 + opts.backoff), opts);
    }
    else if (lambda == 0.0) {
        if (!plant.gamma)
            throw invalid_input("lambda = 0 needs the plant's Lipschitz constant gamma to fix xi");
        d = min_zeta_at_xi(plant, beta, 1.0 / *plant.gamma, opts);
    }
    else {
        Formulation f;
        f.structure = Structure::Multi;
        f.goal = Goal::Weighted;
        f.beta = beta;
        f.lambda = lambda;
        d = run(plant, f, Theorem::T5, opts, "design_multiobjective");
    }
    d.lambda = lambda;
    return d;
}

ObserverDesign design_feasibility(const PlantModel& plant, double gamma, std::optional<double> mu, double beta,
                                  const DesignOptions& opts)
{
    if (!(gamma > 0.0))
        throw invalid_input("Lipschitz constant gamma must be positive");
    if (mu && !(*mu > 0.0))
        throw invalid_input("mu must be positive");
    if (!(beta >= 0.0))
        throw invalid_input("decay rate beta must be non-negative");
    Formulation f;
    f.goal = Goal::None;
    f.beta = beta;
    if (mu) {
        require_h_contractive(plant);
        f.structure = Structure::Hinf;
        f.gamma = gamma;
        f.fixed_zeta = *mu * *mu;
    }
    else {
        f.structure = Structure::Lipschitz;
        f.fixed_xi = 1.0 / gamma;
    }
    auto d = run(plant, f, Theorem::Feasibility, opts, "design_feasibility");
    d.gamma_star = gamma;
    d.mu_star = mu;
    return d;
}

ObserverDesign analyze_gain(const PlantModel& plant, const Matrix& L, double beta, const DesignOptions& opts)
{
    if (L.rows() != plant.n() || L.cols() != plant.p())
        throw invalid_input("gain must be n x p");
    Formulation f = lipschitz_form(beta);
    f.fixed_gain = L;
    return run(plant, f, Theorem::FixedGain, opts, "analyze_gain");
}

SequentialDesign sequential_design(const PlantModel& plant, double beta, const DesignOptions& opts)
{
    require_h_contractive(plant);
    SequentialDesign s;
    s.stage1 = beta > 0.0 ? design_with_decay(plant, beta, opts) : design_max_lipschitz(plant, opts);
    s.gamma_used = s.stage1.gamma_star;
    try {
        s.stage2 = design_hinf(plant, beta, s.gamma_used, opts);
    }
    catch (const Error& e) {
        if (e.code() != ErrorCode::Infeasible)
            throw;
        const auto cap = max_gamma_hinf_compatible(plant, beta, opts);
        s.gamma_used = cap.gamma_star / (1.0 + opts.backoff);
        s.gamma_reduced = true;
        s.stage2 = design_hinf(plant, beta, s.gamma_used, opts);
    }
    if (plant.gamma)
        s.margin = s.gamma_used - *plant.gamma;
    return s;
}

double robustness_margin(const ObserverDesign& design, double gamma_actual) { return design.gamma_star - gamma_actual; }

const Check* VerificationReport::find(const std::string& name) const
{
    for (const auto& c : checks)
        if (c.name == name)
            return &c;
    return nullptr;
}

VerificationReport verify_design(const PlantModel& plant, const ObserverDesign& d, double margin)
{
    VerificationReport rep;
    const int n = plant.n();
    const Matrix I = Matrix::Identity(n, n);
    const Matrix& P = d.P;
    const Matrix F = d.F.size() == d.L.size() ? d.F : Matrix(P * d.L);
    auto add = [&](const std::string& name, double m, bool strict = false) {
        rep.checks.push_back({name, m, strict ? m > 0.0 : m >= 0.0});
    };
    auto add_lmi = [&](const std::string& name, const Matrix& block) {
        const Matrix s = linalg::symmetrize(block);
        const double m = linalg::min_eig(s) - margin;
        rep.checks.push_back({name, m, m >= -lmi::roundoff_tolerance(s)});
    };
    if (P.rows() != n || P.cols() != n || d.L.rows() != n || d.L.cols() != plant.p()) {
        add("dimensions", -1.0);
        return rep;
    }

    const bool hinf_form = d.alpha.has_value();
    const double q = hinf_form ? *d.alpha : 1.0;
    const Matrix lyap = plant.A.transpose() * P + P * plant.A + 2.0 * d.beta * P - plant.C.transpose() * F.transpose() -
                        F * plant.C;
    add_lmi("lyapunov", -lyap - (q + d.epsilon) * I);
    add("epsilon bound", d.epsilon - margin);
    if (hinf_form)
        add("alpha bound", *d.alpha - 1.0 - margin);

    const double shrink = 1.0 - h_norm_sq(plant.H);
    double diag = 0.0;
    switch (d.theorem) {
    case Theorem::T4: diag = shrink / (2.0 * d.gamma_star); break;
    case Theorem::T5: diag = 0.5 * shrink * d.xi.value_or(1.0 / d.gamma_star); break;
    case Theorem::Feasibility:
        diag = hinf_form ? shrink / (2.0 * d.gamma_star) : 0.5 / d.gamma_star;
        break;
    default: diag = 0.5 * d.xi.value_or(1.0 / d.gamma_star); break;
    }
    Matrix bound(2 * n, 2 * n);
    bound << diag * I, P, P, diag * I;
    add_lmi("lipschitz bound", bound);

    if (hinf_form && d.zeta) {
        const int qd = plant.q();
        const Matrix cross = P * plant.B - F * plant.D;
        const Matrix hh = hth(plant);
        Matrix m;
        if (d.theorem == Theorem::T5) {
            const double xi = d.xi.value_or(1.0 / d.gamma_star);
            m = Matrix::Zero(2 * n + qd, 2 * n + qd);
            m.topLeftCorner(n, n) = hh + (0.5 * xi - *d.alpha) * I;
            m.block(0, n, n, n) = I;
            m.block(n, 0, n, n) = I;
            m.block(n, n, n, n) = -2.0 * xi * I;
            m.block(0, 2 * n, n, qd) = cross;
            m.block(2 * n, 0, qd, n) = cross.transpose();
            m.bottomRightCorner(qd, qd) = -*d.zeta * Matrix::Identity(qd, qd);
        }
        else {
            const double g = d.gamma_star;
            m = Matrix::Zero(n + qd, n + qd);
            m.topLeftCorner(n, n) = hh + 0.5 * (g + 1.0 / g - 2.0 * *d.alpha) * I;
            m.block(0, n, n, qd) = cross;
            m.block(n, 0, qd, n) = cross.transpose();
            m.bottomRightCorner(qd, qd) = -*d.zeta * Matrix::Identity(qd, qd);
        }
        add_lmi("hinf", -m);
        add("zeta bound", *d.zeta - margin);
    }

    add_lmi("P positive", P);
    const double abscissa = linalg::spectral_abscissa(plant.A - d.L * plant.C);
    add("spectral abscissa", -d.beta - abscissa, true);
    if (d.gamma_star > 0.0)
        add("P norm premise", 1.0 / (2.0 * d.gamma_star) + 1e-6 - linalg::max_eig(linalg::symmetrize(P)));

    rep.kappa_p = linalg::condition_number_spd(linalg::symmetrize(P));
    rep.pass = true;
    for (const auto& c : rep.checks)
        rep.pass = rep.pass && c.passed;
    return rep;
}

}  // namespace lipobs
